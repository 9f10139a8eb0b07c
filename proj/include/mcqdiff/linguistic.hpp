#pragma once

#include <array>
#include <string>
#include <vector>

#include "mcqdiff/dataset.hpp"

namespace mcqdiff {

inline constexpr int kLinguisticFeatureCount = 17;

/// Column names, in feature order.
const std::array<std::string, kLinguisticFeatureCount>& linguistic_feature_names();

/// Whole-word (and whole-phrase) lists used by the counting features.
/// Shipped as versioned data files under data/wordlists/; the built-in lists
/// mirror version 1 of those files.
struct Wordlists {
    std::vector<std::string> negation;
    std::vector<std::string> additive;
    std::vector<std::string> causal;
    std::vector<std::string> temporal;
    std::vector<std::string> adversative;
    std::vector<std::string> wh;

    static const Wordlists& builtin();
    static Wordlists from_dir(const std::string& dir);
};

/// The 17 surface features over stem + choices. Counting is whole-word and
/// case-insensitive; empty text yields all zeros.
std::array<double, kLinguisticFeatureCount> linguistic_features(
    const std::string& stem, const std::vector<std::string>& choices,
    const Wordlists& lists = Wordlists::builtin());

std::array<double, kLinguisticFeatureCount> linguistic_features(
    const MCQItem& item, const Wordlists& lists = Wordlists::builtin());

}  // namespace mcqdiff
