#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mcqdiff {

struct TfidfConfig {
    double max_df = 0.75;   // drop terms present in more than this fraction of docs
    int max_features = 1000;
    int ngram_max = 2;      // 1 = unigrams only, 2 = unigrams + bigrams
};

/// Vocabulary and smoothed idf weights fitted on training documents only.
/// idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1.
struct TfidfModel {
    TfidfConfig config;
    std::vector<std::string> terms;  // sorted lexicographically
    std::vector<double> idf;
    int n_docs = 0;

    std::unordered_map<std::string, int> index;  // term -> column

    void rebuild_index();
    std::string fingerprint() const;
    std::string to_json_text() const;
    static TfidfModel from_json_text(const std::string& text);
};

std::vector<std::string> document_terms(const std::string& text, const TfidfConfig& config);

/// Fits vocabulary and idf on train documents. When the vocabulary exceeds
/// max_features, the terms with the largest corpus-summed tf-idf mass are
/// kept, ties broken lexicographically.
TfidfModel fit_tfidf(const std::vector<std::string>& train_texts,
                     const TfidfConfig& config = {});

/// L2-normalized tf-idf vector, sparse as (column, value) pairs sorted by
/// column. Out-of-vocabulary terms are ignored; an all-zero vector stays zero.
std::vector<std::pair<int, double>> tfidf_transform(const TfidfModel& model,
                                                    const std::string& text);

std::vector<double> tfidf_transform_dense(const TfidfModel& model, const std::string& text);

}  // namespace mcqdiff
