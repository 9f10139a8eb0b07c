#pragma once

#include <cstdint>
#include <vector>

#include "mcqdiff/features.hpp"
#include "mcqdiff/forest.hpp"

namespace mcqdiff {

/// Mean RMSE increase per feature when that feature's test column is
/// permuted, averaged over `repeats` seeded permutations. A feature no tree
/// uses scores exactly zero.
std::vector<double> permutation_importance(const RandomForestModel& model,
                                           const FeatureMatrix& X_test,
                                           const std::vector<double>& y_test, int repeats,
                                           uint64_t seed);

}  // namespace mcqdiff
