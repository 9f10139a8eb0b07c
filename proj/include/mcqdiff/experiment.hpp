#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcqdiff/dataset.hpp"
#include "mcqdiff/embedding_client.hpp"
#include "mcqdiff/features.hpp"
#include "mcqdiff/inference_client.hpp"

namespace mcqdiff {

enum class FeatureBlockKind {
    Tfidf,
    Embedding,
    UncertaintyFirstToken,
    UncertaintyOrder,
    SimilarityGeneral,
    SimilarityMedical,
    Linguistic,
};

std::string feature_block_name(FeatureBlockKind kind);
FeatureBlockKind feature_block_from_name(const std::string& name);

struct SplitSpec {
    std::optional<std::string> fixed_path;  // split file; overrides the seeded split
    uint64_t seed = 0;
    double ratio = 0.7;
    bool group_aware = false;
};

/// One experiment: a dataset, a target label, a split, and a feature set.
struct ExperimentSpec {
    std::string dataset_path;
    std::string label;
    std::vector<std::string> required_labels;  // defaults to {label}
    SplitSpec split;
    std::vector<FeatureBlockKind> feature_blocks;  // canonical order, no duplicates
    std::string endpoints_path;
    int repetitions = 10;
    uint64_t seed = 0;
    std::string method_label;   // report row; defaults to the block list
    std::string dataset_label;  // report column; defaults to the dataset file stem

    std::string digest() const;
    std::string to_json_text() const;
    static ExperimentSpec from_json_text(const std::string& text);
    static ExperimentSpec load(const std::string& path);

    std::string effective_method_label() const;
    std::string effective_dataset_label() const;
};

/// Named endpoint slots referenced by the feature blocks.
struct EndpointsConfig {
    std::vector<ModelEndpoint> inference;
    std::optional<EmbeddingEndpoint> embedding_text;
    std::optional<EmbeddingEndpoint> similarity_general;
    std::optional<EmbeddingEndpoint> similarity_medical;

    /// Accepts either an object with named slots or a bare list of inference
    /// endpoints.
    static EndpointsConfig from_json_text(const std::string& text);
    static EndpointsConfig load(const std::string& path);
};

struct ExperimentResult {
    std::string spec_digest;
    std::string method_label;
    std::string dataset_label;
    std::vector<double> per_rep_rmse;
    double mean_rmse = 0.0;
    double std_rmse = 0.0;
    double dummy_rmse = 0.0;
    double runtime_seconds = 0.0;  // informational; never rendered into reports
    std::string error;             // non-empty marks a failed row
};

struct RunContext {
    std::string cache_dir = ".mcqdiff_cache";
    /// When set, replaces the experiment's endpoints file (used by tests and by the
    /// --endpoints CLI override).
    std::optional<EndpointsConfig> endpoints_override;
};

/// Feature matrix over all dataset items, fitted on train items only
/// (TF-IDF vocabulary never sees test documents).
FeatureMatrix build_features(const ExperimentSpec& spec, const Dataset& dataset,
                             const DatasetSplit& split, const EndpointsConfig& endpoints,
                             const std::string& cache_dir);

DatasetSplit resolve_split(const ExperimentSpec& spec, const Dataset& dataset);

/// Trains `repetitions` forests with per-repetition seeds on the train side
/// and reports test RMSE; the dummy baseline is computed once.
ExperimentResult run_experiment(const ExperimentSpec& spec, const RunContext& ctx);

/// Runs specs in order; a failing spec yields an error row and the grid
/// continues.
std::vector<ExperimentResult> run_grid(const std::vector<ExperimentSpec>& specs,
                                       const RunContext& ctx);

/// Forest seed for repetition r, decorrelated so repetitions never share
/// per-tree RNG streams.
uint64_t repetition_seed(uint64_t experiment_seed, int repetition);

}  // namespace mcqdiff
