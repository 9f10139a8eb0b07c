#pragma once

#include <string>
#include <vector>

namespace mcqdiff {

/// Lowercases, then extracts maximal runs of two or more letters, digits or
/// underscores; everything else separates tokens.
std::vector<std::string> tokenize(const std::string& text);

/// Adjacent token pairs joined by a single space.
std::vector<std::string> bigrams(const std::vector<std::string>& tokens);

}  // namespace mcqdiff
