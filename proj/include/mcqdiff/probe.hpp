#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mcqdiff/dataset.hpp"
#include "mcqdiff/inference_client.hpp"
#include "mcqdiff/orderings.hpp"

namespace mcqdiff {

/// First-token distribution for one (item, model, ordering) probe.
struct ProbeRecord {
    std::string item_id;
    std::string model_name;
    std::vector<int> permutation;
    std::map<char, double> letter_probs;
    char selected_letter = 'A';
    std::string raw_response_digest;
};

/// Position of the highest-probability letter; ties go to the letter whose
/// original choice index (through the permutation) is lowest.
int select_position(const std::map<char, double>& letter_probs,
                    const std::vector<int>& permutation);

/// The two per-(item, model) uncertainty metrics.
struct UncertaintyFeatures {
    std::string item_id;
    std::string model_name;
    double first_token = 0.0;        // normalized mean probability of the correct choice
    double order_sensitivity = 0.0;  // fraction of orderings selecting the correct choice
    int n_orderings = 0;
};

/// Reduces all probe records of one (item, model) pair. The records'
/// permutations must be pairwise distinct; letter keys must match each
/// record's ordering.
UncertaintyFeatures compute_uncertainty_features(const MCQItem& item,
                                                 const std::vector<ProbeRecord>& records);

/// Per-choice means of the letter probabilities, normalized to sum to one
/// (uniform when all means are zero).
std::vector<double> normalized_choice_means(const MCQItem& item,
                                            const std::vector<ProbeRecord>& records);

/// JSONL-backed probe cache keyed by (item_id, model_name, permutation).
/// Appends are flushed immediately so an interrupted run can resume.
class ProbeCache {
public:
    explicit ProbeCache(std::string path);  // loads existing records, if any

    const ProbeRecord* find(const std::string& item_id, const std::string& model_name,
                            const std::vector<int>& permutation) const;
    void put(const ProbeRecord& record);
    size_t size() const;
    std::vector<ProbeRecord> records_for(const std::string& item_id,
                                         const std::string& model_name) const;

private:
    std::string path_;
    mutable std::mutex mutex_;
    std::map<std::string, ProbeRecord> records_;  // canonical key -> record
};

/// Item-major matrix of uncertainty features: one row per item, two columns
/// per endpoint in endpoint order (first_token, then order_sensitivity).
struct UncertaintyMatrix {
    std::vector<std::string> model_names;
    std::vector<std::string> columns;  // unc.<model>.first_token / .order_sensitivity
    std::vector<std::string> item_ids;
    std::vector<std::vector<double>> rows;
};

/// Probes every (item, model, ordering) at most once across runs; cache hits
/// issue no HTTP requests. Requests run with at most max_inflight in flight
/// per endpoint. A permanently failing endpoint aborts with the cache intact.
UncertaintyMatrix probe_dataset(const Dataset& dataset,
                                const std::vector<ModelEndpoint>& endpoints,
                                const std::string& cache_path, uint64_t seed,
                                int orderings_count = 10);

std::string uncertainty_matrix_to_csv(const UncertaintyMatrix& m);

/// One row of the correctness-vs-certainty report.
struct ModelCorrectness {
    std::string model_name;
    double correctness = 0.0;  // fraction of items answered correctly by majority vote
    size_t n_correct = 0;
    size_t n_incorrect = 0;
    // mean certainty for the chosen option, conditioned on correctness
    std::optional<double> first_token_correct;
    std::optional<double> first_token_incorrect;
    std::optional<double> order_correct;
    std::optional<double> order_incorrect;
};

std::vector<ModelCorrectness> correctness_report(const Dataset& dataset,
                                                 const std::vector<ModelEndpoint>& endpoints,
                                                 const ProbeCache& cache,
                                                 uint64_t seed,
                                                 int orderings_count = 10);

std::string render_correctness_report(const std::vector<ModelCorrectness>& rows);
std::string render_correctness_row(const ModelCorrectness& row);

}  // namespace mcqdiff
