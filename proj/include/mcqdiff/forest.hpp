#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mcqdiff/features.hpp"

namespace mcqdiff {

/// Defaults follow the common reference regressor: 100 trees, unlimited
/// depth, bootstrap on, all features considered at every split.
struct ForestConfig {
    int n_trees = 100;
    std::optional<int> max_depth;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    double max_features_fraction = 1.0;
    bool bootstrap = true;
    uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean training target at this node
    int n_samples = 0;   // training rows reaching this node
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    bool is_leaf(int i) const { return nodes[static_cast<size_t>(i)].feature < 0; }
    double predict(std::span<const double> x) const;
    int max_depth() const;
};

struct RandomForestModel {
    ForestConfig config;
    std::vector<std::string> feature_schema;
    std::string train_fingerprint;
    std::vector<RegressionTree> trees;

    double predict(std::span<const double> x) const;
    std::vector<double> predict_rows(const std::vector<std::vector<double>>& rows) const;

    std::string to_json_text() const;
    static RandomForestModel from_json_text(const std::string& text);
    void save(const std::string& path) const;
    static RandomForestModel load(const std::string& path);
};

/// Trains the ensemble. Tree t draws its bootstrap sample and per-node
/// feature subsets from an RNG seeded with config.seed + t, so parallel and
/// sequential training produce identical models.
RandomForestModel fit_forest(const std::vector<std::vector<double>>& X,
                             const std::vector<double>& y,
                             const std::vector<std::string>& feature_schema,
                             const ForestConfig& config);

RandomForestModel fit_forest(const FeatureMatrix& X, const std::vector<double>& y,
                             const ForestConfig& config);

/// Baseline that always predicts the training-set mean.
struct DummyModel {
    double mean = 0.0;
};

DummyModel fit_dummy(const std::vector<double>& y);
double predict_dummy(const DummyModel& model);

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat);

}  // namespace mcqdiff
