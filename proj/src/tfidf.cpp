#include "mcqdiff/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/tokenizer.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

void TfidfModel::rebuild_index() {
    index.clear();
    index.reserve(terms.size());
    for (size_t i = 0; i < terms.size(); ++i) index.emplace(terms[i], static_cast<int>(i));
}

std::string TfidfModel::fingerprint() const { return sha256_hex(to_json_text()); }

std::string TfidfModel::to_json_text() const {
    json j;
    j["max_df"] = config.max_df;
    j["max_features"] = config.max_features;
    j["ngram_max"] = config.ngram_max;
    j["n_docs"] = n_docs;
    j["terms"] = terms;
    j["idf"] = idf;
    return j.dump();
}

TfidfModel TfidfModel::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed tfidf model: ") + e.what());
    }
    TfidfModel m;
    m.config.max_df = j.at("max_df").get<double>();
    m.config.max_features = j.at("max_features").get<int>();
    m.config.ngram_max = j.at("ngram_max").get<int>();
    m.n_docs = j.at("n_docs").get<int>();
    for (const auto& t : j.at("terms")) m.terms.push_back(t.get<std::string>());
    for (const auto& v : j.at("idf")) m.idf.push_back(v.get<double>());
    if (m.terms.size() != m.idf.size())
        throw ValidationError("tfidf model: terms/idf size mismatch");
    m.rebuild_index();
    return m;
}

std::vector<std::string> document_terms(const std::string& text, const TfidfConfig& config) {
    auto tokens = tokenize(text);
    std::vector<std::string> terms = tokens;
    if (config.ngram_max >= 2) {
        for (auto& b : bigrams(tokens)) terms.push_back(std::move(b));
    }
    return terms;
}

TfidfModel fit_tfidf(const std::vector<std::string>& train_texts, const TfidfConfig& config) {
    if (train_texts.empty()) throw ValidationError("cannot fit tf-idf on an empty corpus");
    if (config.ngram_max < 1 || config.ngram_max > 2)
        throw ValidationError("tfidf ngram_max must be 1 or 2");
    if (config.max_features < 1) throw ValidationError("tfidf max_features must be >= 1");

    const int n_docs = static_cast<int>(train_texts.size());
    std::map<std::string, int> df;
    std::map<std::string, long long> total_count;
    for (const auto& text : train_texts) {
        std::map<std::string, int> counts;
        for (auto& term : document_terms(text, config)) ++counts[term];
        for (const auto& [term, count] : counts) {
            ++df[term];
            total_count[term] += count;
        }
    }

    struct Candidate {
        std::string term;
        double idf;
        double mass;
    };
    std::vector<Candidate> candidates;
    for (const auto& [term, d] : df) {
        if (static_cast<double>(d) / n_docs > config.max_df) continue;
        double idf = std::log((1.0 + n_docs) / (1.0 + d)) + 1.0;
        double mass = static_cast<double>(total_count[term]) * idf;
        candidates.push_back(Candidate{term, idf, mass});
    }

    if (static_cast<int>(candidates.size()) > config.max_features) {
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.mass != b.mass) return a.mass > b.mass;
            return a.term < b.term;
        });
        candidates.resize(static_cast<size_t>(config.max_features));
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.term < b.term; });

    TfidfModel model;
    model.config = config;
    model.n_docs = n_docs;
    model.terms.reserve(candidates.size());
    model.idf.reserve(candidates.size());
    for (auto& c : candidates) {
        model.terms.push_back(std::move(c.term));
        model.idf.push_back(c.idf);
    }
    model.rebuild_index();
    return model;
}

std::vector<std::pair<int, double>> tfidf_transform(const TfidfModel& model,
                                                    const std::string& text) {
    std::map<int, double> values;
    for (const auto& term : document_terms(text, model.config)) {
        auto it = model.index.find(term);
        if (it != model.index.end())
            values[it->second] += model.idf[static_cast<size_t>(it->second)];
    }
    double norm_sq = 0.0;
    for (const auto& [col, v] : values) norm_sq += v * v;
    std::vector<std::pair<int, double>> out;
    out.reserve(values.size());
    const double norm = std::sqrt(norm_sq);
    for (const auto& [col, v] : values)
        out.emplace_back(col, norm > 0.0 ? v / norm : 0.0);
    return out;
}

std::vector<double> tfidf_transform_dense(const TfidfModel& model, const std::string& text) {
    std::vector<double> out(model.terms.size(), 0.0);
    for (const auto& [col, v] : tfidf_transform(model, text))
        out[static_cast<size_t>(col)] = v;
    return out;
}

}  // namespace mcqdiff
