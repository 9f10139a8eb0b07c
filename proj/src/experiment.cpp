#include "mcqdiff/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/forest.hpp"
#include "mcqdiff/linguistic.hpp"
#include "mcqdiff/probe.hpp"
#include "mcqdiff/similarity.hpp"
#include "mcqdiff/tfidf.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

namespace {

// canonical block order: uncertainty, text, similarity, linguistic
const std::vector<FeatureBlockKind> kCanonicalOrder = {
    FeatureBlockKind::UncertaintyFirstToken, FeatureBlockKind::UncertaintyOrder,
    FeatureBlockKind::Tfidf,                 FeatureBlockKind::Embedding,
    FeatureBlockKind::SimilarityGeneral,     FeatureBlockKind::SimilarityMedical,
    FeatureBlockKind::Linguistic,
};

std::vector<FeatureBlockKind> canonicalize_blocks(std::vector<FeatureBlockKind> blocks) {
    if (blocks.empty())
        throw ValidationError("experiment needs at least one feature block");
    std::set<FeatureBlockKind> wanted(blocks.begin(), blocks.end());
    std::vector<FeatureBlockKind> out;
    for (auto kind : kCanonicalOrder)
        if (wanted.count(kind)) out.push_back(kind);
    return out;
}

}  // namespace

std::string feature_block_name(FeatureBlockKind kind) {
    switch (kind) {
        case FeatureBlockKind::Tfidf: return "tfidf";
        case FeatureBlockKind::Embedding: return "embedding";
        case FeatureBlockKind::UncertaintyFirstToken: return "uncertainty_first_token";
        case FeatureBlockKind::UncertaintyOrder: return "uncertainty_order";
        case FeatureBlockKind::SimilarityGeneral: return "similarity_general";
        case FeatureBlockKind::SimilarityMedical: return "similarity_medical";
        case FeatureBlockKind::Linguistic: return "linguistic";
    }
    throw ValidationError("unknown feature block kind");
}

FeatureBlockKind feature_block_from_name(const std::string& name) {
    for (auto kind : kCanonicalOrder)
        if (feature_block_name(kind) == name) return kind;
    throw ValidationError("unknown feature block: " + name);
}

std::string ExperimentSpec::to_json_text() const {
    json j;
    j["dataset"] = dataset_path;
    j["label"] = label;
    if (!required_labels.empty()) j["required_labels"] = required_labels;
    json js;
    if (split.fixed_path) {
        js["fixed"] = *split.fixed_path;
    } else {
        js["seed"] = split.seed;
        js["ratio"] = split.ratio;
        js["group_aware"] = split.group_aware;
    }
    j["split"] = js;
    json blocks = json::array();
    for (auto kind : feature_blocks) blocks.push_back(feature_block_name(kind));
    j["feature_blocks"] = blocks;
    j["endpoints"] = endpoints_path;
    j["repetitions"] = repetitions;
    j["seed"] = seed;
    if (!method_label.empty()) j["method_label"] = method_label;
    if (!dataset_label.empty()) j["dataset_label"] = dataset_label;
    return j.dump();
}

ExperimentSpec ExperimentSpec::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed experiment spec: ") + e.what());
    }
    ExperimentSpec spec;
    spec.dataset_path = j.at("dataset").get<std::string>();
    spec.label = j.at("label").get<std::string>();
    if (j.contains("required_labels"))
        for (const auto& l : j.at("required_labels"))
            spec.required_labels.push_back(l.get<std::string>());
    if (j.contains("split")) {
        const json& js = j.at("split");
        if (js.contains("fixed")) {
            spec.split.fixed_path = js.at("fixed").get<std::string>();
        } else {
            if (js.contains("seed")) spec.split.seed = js.at("seed").get<uint64_t>();
            if (js.contains("ratio")) spec.split.ratio = js.at("ratio").get<double>();
            if (js.contains("group_aware"))
                spec.split.group_aware = js.at("group_aware").get<bool>();
        }
    }
    std::vector<FeatureBlockKind> blocks;
    for (const auto& b : j.at("feature_blocks"))
        blocks.push_back(feature_block_from_name(b.get<std::string>()));
    spec.feature_blocks = canonicalize_blocks(std::move(blocks));
    if (j.contains("endpoints")) spec.endpoints_path = j.at("endpoints").get<std::string>();
    if (j.contains("repetitions")) spec.repetitions = j.at("repetitions").get<int>();
    if (spec.repetitions < 1) throw ValidationError("repetitions must be >= 1");
    if (j.contains("seed")) spec.seed = j.at("seed").get<uint64_t>();
    if (j.contains("method_label")) spec.method_label = j.at("method_label").get<std::string>();
    if (j.contains("dataset_label"))
        spec.dataset_label = j.at("dataset_label").get<std::string>();
    return spec;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
    return from_json_text(read_file(path));
}

std::string ExperimentSpec::digest() const { return sha256_hex(to_json_text()); }

std::string ExperimentSpec::effective_method_label() const {
    if (!method_label.empty()) return method_label;
    std::string out;
    for (auto kind : feature_blocks) {
        if (!out.empty()) out += "+";
        out += feature_block_name(kind);
    }
    return out;
}

std::string ExperimentSpec::effective_dataset_label() const {
    if (!dataset_label.empty()) return dataset_label;
    return std::filesystem::path(dataset_path).stem().string();
}

EndpointsConfig EndpointsConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed endpoints config: ") + e.what());
    }
    EndpointsConfig cfg;
    if (j.is_array()) {
        cfg.inference = model_endpoints_from_json_text(text);
        return cfg;
    }
    if (j.contains("inference"))
        cfg.inference = model_endpoints_from_json_text(j.at("inference").dump());
    for (const auto& [slot, target] :
         std::vector<std::pair<std::string, std::optional<EmbeddingEndpoint>*>>{
             {"embedding_text", &cfg.embedding_text},
             {"similarity_general", &cfg.similarity_general},
             {"similarity_medical", &cfg.similarity_medical}}) {
        if (j.contains(slot))
            *target = embedding_endpoint_from_json_text(j.at(slot).dump());
    }
    return cfg;
}

EndpointsConfig EndpointsConfig::load(const std::string& path) {
    return from_json_text(read_file(path));
}

DatasetSplit resolve_split(const ExperimentSpec& spec, const Dataset& dataset) {
    if (spec.split.fixed_path) {
        DatasetSplit loaded = parse_split(*spec.split.fixed_path);
        FixedSplit fixed{loaded.train, loaded.test};
        return split_dataset(dataset, loaded.ratio > 0.0 && loaded.ratio < 1.0 ? loaded.ratio : 0.7,
                             loaded.seed, false, fixed);
    }
    return split_dataset(dataset, spec.split.ratio, spec.split.seed, spec.split.group_aware);
}

namespace {

const EmbeddingEndpoint& require_slot(const std::optional<EmbeddingEndpoint>& slot,
                                      const std::string& name) {
    if (!slot) throw ValidationError("endpoints config lacks the '" + name + "' slot");
    return *slot;
}

}  // namespace

FeatureMatrix build_features(const ExperimentSpec& spec, const Dataset& dataset,
                             const DatasetSplit& split, const EndpointsConfig& endpoints,
                             const std::string& cache_dir) {
    std::filesystem::create_directories(cache_dir);

    std::vector<FeatureBlock> blocks;
    const bool want_unc_ft =
        std::count(spec.feature_blocks.begin(), spec.feature_blocks.end(),
                   FeatureBlockKind::UncertaintyFirstToken) > 0;
    const bool want_unc_os =
        std::count(spec.feature_blocks.begin(), spec.feature_blocks.end(),
                   FeatureBlockKind::UncertaintyOrder) > 0;

    if (want_unc_ft || want_unc_os) {
        if (endpoints.inference.empty())
            throw ValidationError("uncertainty blocks need at least one inference endpoint");
        auto matrix = probe_dataset(dataset, endpoints.inference,
                                    cache_dir + "/probe_cache.jsonl", spec.seed);
        FeatureBlock block;
        block.name = "uncertainty";
        std::vector<size_t> keep;
        for (size_t m = 0; m < matrix.model_names.size(); ++m) {
            if (want_unc_ft) {
                block.columns.push_back(matrix.columns[2 * m]);
                keep.push_back(2 * m);
            }
            if (want_unc_os) {
                block.columns.push_back(matrix.columns[2 * m + 1]);
                keep.push_back(2 * m + 1);
            }
        }
        for (size_t i = 0; i < matrix.item_ids.size(); ++i) {
            std::vector<double> row;
            row.reserve(keep.size());
            for (size_t k : keep) row.push_back(matrix.rows[i][k]);
            block.rows.emplace(matrix.item_ids[i], std::move(row));
        }
        blocks.push_back(std::move(block));
    }

    for (auto kind : spec.feature_blocks) {
        switch (kind) {
            case FeatureBlockKind::UncertaintyFirstToken:
            case FeatureBlockKind::UncertaintyOrder:
                break;  // handled above
            case FeatureBlockKind::Tfidf: {
                std::vector<std::string> train_texts;
                train_texts.reserve(split.train.size());
                for (const auto& id : split.train)
                    train_texts.push_back(dataset.by_id(id).full_text());
                TfidfModel model = fit_tfidf(train_texts);
                FeatureBlock block;
                block.name = "tfidf";
                for (const auto& term : model.terms) block.columns.push_back("tfidf." + term);
                for (const auto& item : dataset.items())
                    block.rows.emplace(item.id, tfidf_transform_dense(model, item.full_text()));
                blocks.push_back(std::move(block));
                break;
            }
            case FeatureBlockKind::Embedding: {
                const auto& endpoint = require_slot(endpoints.embedding_text, "embedding_text");
                EmbeddingClient client(endpoint,
                                       cache_dir + "/embeddings_" + endpoint.name + ".jsonl");
                FeatureBlock block;
                block.name = "embedding";
                for (int d = 0; d < endpoint.dimension; ++d) {
                    char buf[16];
                    std::snprintf(buf, sizeof(buf), "%04d", d);
                    block.columns.push_back("emb." + endpoint.name + "." + buf);
                }
                for (const auto& item : dataset.items())
                    block.rows.emplace(item.id, client.fetch(item.full_text()));
                blocks.push_back(std::move(block));
                break;
            }
            case FeatureBlockKind::SimilarityGeneral:
            case FeatureBlockKind::SimilarityMedical: {
                const bool general = kind == FeatureBlockKind::SimilarityGeneral;
                const auto& endpoint =
                    general ? require_slot(endpoints.similarity_general, "similarity_general")
                            : require_slot(endpoints.similarity_medical, "similarity_medical");
                EmbeddingClient client(endpoint,
                                       cache_dir + "/embeddings_" + endpoint.name + ".jsonl");
                FeatureBlock block;
                block.name = general ? "similarity_general" : "similarity_medical";
                block.columns.push_back(general ? "sim.general" : "sim.medical");
                for (const auto& item : dataset.items())
                    block.rows.emplace(item.id,
                                       std::vector<double>{choice_similarity(item, client)});
                blocks.push_back(std::move(block));
                break;
            }
            case FeatureBlockKind::Linguistic: {
                FeatureBlock block;
                block.name = "linguistic";
                for (const auto& name : linguistic_feature_names())
                    block.columns.push_back("ling." + name);
                for (const auto& item : dataset.items()) {
                    auto f = linguistic_features(item);
                    block.rows.emplace(item.id, std::vector<double>(f.begin(), f.end()));
                }
                blocks.push_back(std::move(block));
                break;
            }
        }
    }

    std::vector<std::string> item_ids;
    item_ids.reserve(dataset.size());
    for (const auto& item : dataset.items()) item_ids.push_back(item.id);
    return assemble_features(blocks, item_ids);
}

uint64_t repetition_seed(uint64_t experiment_seed, int repetition) {
    return mix64(experiment_seed ^ mix64(0x72657073ULL + static_cast<uint64_t>(repetition)));
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const RunContext& ctx) {
    const auto start = std::chrono::steady_clock::now();

    std::vector<std::string> required = spec.required_labels;
    if (std::find(required.begin(), required.end(), spec.label) == required.end())
        required.push_back(spec.label);
    Dataset dataset = parse_dataset(spec.dataset_path, required);
    if (dataset.empty()) throw ValidationError("dataset is empty: " + spec.dataset_path);

    DatasetSplit split = resolve_split(spec, dataset);
    if (split.train.empty() || split.test.empty())
        throw ValidationError("split leaves one side empty");

    EndpointsConfig endpoints;
    if (ctx.endpoints_override)
        endpoints = *ctx.endpoints_override;
    else if (!spec.endpoints_path.empty())
        endpoints = EndpointsConfig::load(spec.endpoints_path);
    // specs whose blocks need no endpoints run fine with an empty config

    FeatureMatrix all_features = build_features(spec, dataset, split, endpoints, ctx.cache_dir);
    if (all_features.width() == 0) throw ValidationError("empty feature matrix");

    FeatureMatrix X_train = select_rows(all_features, split.train);
    FeatureMatrix X_test = select_rows(all_features, split.test);
    std::vector<double> y_train, y_test;
    for (const auto& id : split.train) y_train.push_back(dataset.by_id(id).label(spec.label));
    for (const auto& id : split.test) y_test.push_back(dataset.by_id(id).label(spec.label));

    ExperimentResult result;
    result.spec_digest = spec.digest();
    result.method_label = spec.effective_method_label();
    result.dataset_label = spec.effective_dataset_label();

    DummyModel dummy = fit_dummy(y_train);
    std::vector<double> dummy_pred(y_test.size(), predict_dummy(dummy));
    result.dummy_rmse = rmse(y_test, dummy_pred);

    for (int r = 0; r < spec.repetitions; ++r) {
        ForestConfig config;
        config.seed = repetition_seed(spec.seed, r);
        RandomForestModel model = fit_forest(X_train, y_train, config);
        result.per_rep_rmse.push_back(rmse(y_test, model.predict_rows(X_test.rows)));
    }

    double sum = 0.0;
    for (double v : result.per_rep_rmse) sum += v;
    result.mean_rmse = sum / static_cast<double>(result.per_rep_rmse.size());
    double var = 0.0;
    for (double v : result.per_rep_rmse) {
        double d = v - result.mean_rmse;
        var += d * d;
    }
    result.std_rmse = std::sqrt(var / static_cast<double>(result.per_rep_rmse.size()));

    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::vector<ExperimentResult> run_grid(const std::vector<ExperimentSpec>& specs,
                                       const RunContext& ctx) {
    std::vector<ExperimentResult> results;
    results.reserve(specs.size());
    for (const auto& spec : specs) {
        try {
            results.push_back(run_experiment(spec, ctx));
        } catch (const std::exception& e) {
            ExperimentResult failed;
            failed.spec_digest = spec.digest();
            failed.method_label = spec.effective_method_label();
            failed.dataset_label = spec.effective_dataset_label();
            failed.error = e.what();
            results.push_back(std::move(failed));
        }
    }
    return results;
}

}  // namespace mcqdiff
