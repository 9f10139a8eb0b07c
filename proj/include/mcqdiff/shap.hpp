#pragma once

#include <span>
#include <string>
#include <vector>

#include "mcqdiff/forest.hpp"

namespace mcqdiff {

/// Additive per-feature attribution of one prediction.
/// Invariant: base_value + sum(contributions) equals the model prediction.
struct ShapExplanation {
    std::string item_id;
    double base_value = 0.0;
    std::vector<double> contributions;
    std::vector<double> feature_values;
};

/// Coverage-weighted mean over leaves: the value of the empty coalition.
double tree_expected_value(const RegressionTree& tree);

/// Exact Shapley values of the coverage-conditioned expectation game.
/// Per leaf, the Shapley weight sum is evaluated as a Beta integral of the
/// multilinear extension via Gauss-Legendre quadrature; every term is
/// non-negative, so the computation stays stable on arbitrarily deep trees.
/// Features absent from the tree contribute zero.
std::vector<double> tree_shap(const RegressionTree& tree, std::span<const double> x,
                              int n_features);

/// Same game valued by explicit subset enumeration over the tree's distinct
/// features (at most 12); exponential by design, used as the test oracle.
std::vector<double> brute_force_shapley(const RegressionTree& tree,
                                        std::span<const double> x, int n_features);

/// Per-tree values averaged over the ensemble (linearity of the mean).
ShapExplanation forest_shap(const RandomForestModel& model, std::span<const double> x,
                            const std::string& item_id);

struct ShapSummaryRow {
    std::string feature;
    double mean_abs_contribution = 0.0;
};

/// Features ranked by mean absolute contribution, descending; ties broken
/// lexicographically; at most top_k rows.
std::vector<ShapSummaryRow> shap_summary(const std::vector<ShapExplanation>& explanations,
                                         const std::vector<std::string>& schema,
                                         int top_k = 10);

/// Per-item records for the ranked features: item_id,feature,feature_value,contribution.
std::string shap_details_csv(const std::vector<ShapExplanation>& explanations,
                             const std::vector<std::string>& schema,
                             const std::vector<ShapSummaryRow>& ranking);

/// Static horizontal bar chart of the ranking.
std::string shap_summary_svg(const std::vector<ShapSummaryRow>& ranking);

}  // namespace mcqdiff
