#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcqdiff/dataset.hpp"

namespace mcqdiff {

/// A choice ordering for one item: permutation[p] is the original choice
/// index shown at letter position p.
struct Ordering {
    std::string item_id;
    std::vector<int> permutation;
};

/// All n! permutations in lexicographic order when n! <= count, otherwise
/// `count` distinct permutations sampled without replacement (seeded).
std::vector<std::vector<int>> generate_orderings(int n_choices, int count, uint64_t seed);

/// Orderings for one item, derived from (seed, item_id) so every model probes
/// the same orderings.
std::vector<Ordering> orderings_for_item(const MCQItem& item, uint64_t seed,
                                         int count = 10);

uint64_t ordering_seed(uint64_t seed, const std::string& item_id);

int expected_ordering_count(int n_choices, int count = 10);

}  // namespace mcqdiff
