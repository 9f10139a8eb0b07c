// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion carries its tolerance in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "mcqdiff/dataset.hpp"
#include "mcqdiff/experiment.hpp"
#include "mcqdiff/forest.hpp"
#include "mcqdiff/probe.hpp"
#include "mcqdiff/report.hpp"
#include "mcqdiff/shap.hpp"
#include "mcqdiff/tfidf.hpp"
#include "mcqdiff/util.hpp"
#include "mock_server.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace mcqdiff;
using mcqtest::make_item;
using mcqtest::make_planted_corpus;
using mcqtest::MockInferenceServer;
using mcqtest::MockItemRule;
using mcqtest::PlantedCorpus;
using mcqtest::TempDir;

namespace {

struct Harness {
    int failures = 0;

    void run(int number, const std::string& title, const std::function<void()>& body) {
        const auto start = std::chrono::steady_clock::now();
        std::string error;
        try {
            body();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (error.empty()) {
            std::printf("PASS  criterion %d: %s (%.2fs)\n", number, title.c_str(), seconds);
        } else {
            std::printf("FAIL  criterion %d: %s (%.2fs)\n      %s\n", number, title.c_str(),
                        seconds, error.c_str());
            ++failures;
        }
    }
};

void require(bool condition, const std::string& message) {
    if (!condition) throw std::runtime_error(message);
}

ProbeRecord record_for(const MCQItem& item, const std::vector<int>& perm,
                       const std::vector<double>& probs_by_choice) {
    ProbeRecord r;
    r.item_id = item.id;
    r.model_name = "m";
    r.permutation = perm;
    for (size_t pos = 0; pos < perm.size(); ++pos)
        r.letter_probs[static_cast<char>('A' + pos)] =
            probs_by_choice[static_cast<size_t>(perm[pos])];
    r.selected_letter = static_cast<char>('A' + select_position(r.letter_probs, perm));
    return r;
}

// criterion 1 -----------------------------------------------------------

void tfidf_oracle() {
    TfidfConfig config;
    config.ngram_max = 1;
    TfidfModel model = fit_tfidf({"neuron fires", "neuron rests", "brain rests"}, config);
    const double idf_neuron = model.idf[static_cast<size_t>(model.index.at("neuron"))];
    const double idf_fires = model.idf[static_cast<size_t>(model.index.at("fires"))];
    require(std::abs(idf_neuron - 1.287682) <= 1e-4,
            "idf(neuron) = " + format_full(idf_neuron) + ", expected 1.287682");
    require(std::abs(idf_fires - 1.693147) <= 1e-4,
            "idf(fires) = " + format_full(idf_fires) + ", expected 1.693147");
    auto dense = tfidf_transform_dense(model, "neuron fires");
    const double v_neuron = dense[static_cast<size_t>(model.index.at("neuron"))];
    const double v_fires = dense[static_cast<size_t>(model.index.at("fires"))];
    require(std::abs(v_neuron - 0.6053) <= 1e-4,
            "transform[neuron] = " + format_full(v_neuron) + ", expected 0.6053");
    require(std::abs(v_fires - 0.7960) <= 1e-4,
            "transform[fires] = " + format_full(v_fires) + ", expected 0.7960");
}

// criterion 2 -----------------------------------------------------------

void uncertainty_metrics() {
    MockInferenceServer server;
    TempDir dir("acc_unc");
    Dataset dataset = Dataset::from_items({
        make_item("tri", "three choice stem", {"aa", "bb", "cc"}, 1, 0.5),
        make_item("pent", "five choice stem", {"pp", "qq", "rr", "ss", "tt"}, 2, 0.5),
    });
    server.set_rule("three choice stem",
                    MockItemRule{{"aa", "bb", "cc"}, {0.2, 0.5, 0.3}, {}, false});
    server.set_rule("five choice stem",
                    MockItemRule{{"pp", "qq", "rr", "ss", "tt"},
                                 {0.1, 0.15, 0.4, 0.2, 0.15},
                                 {},
                                 false});
    const std::string cache_path = dir.file("cache.jsonl");
    probe_dataset(dataset, {server.endpoint("m", 20)}, cache_path, 0);

    ProbeCache cache(cache_path);
    auto records_tri = cache.records_for("tri", "m");
    auto records_pent = cache.records_for("pent", "m");
    require(records_tri.size() == 6,
            "3-choice item produced " + std::to_string(records_tri.size()) +
                " orderings, expected exactly 6");
    require(records_pent.size() == 10,
            "5-choice item produced " + std::to_string(records_pent.size()) +
                " orderings, expected exactly 10");
    std::set<std::vector<int>> perms_tri, perms_pent;
    for (const auto& r : records_tri) perms_tri.insert(r.permutation);
    for (const auto& r : records_pent) perms_pent.insert(r.permutation);
    require(perms_tri.size() == 6, "3-choice orderings are not distinct");
    require(perms_pent.size() == 10, "5-choice orderings are not distinct");

    for (const auto* records : {&records_tri, &records_pent}) {
        const MCQItem& item = dataset.by_id(records->front().item_id);
        auto norm = normalized_choice_means(item, *records);
        double sum = 0.0;
        for (double v : norm) sum += v;
        require(std::abs(sum - 1.0) <= 1e-9,
                "normalized means sum to " + format_full(sum) + ", expected 1 within 1e-9");
    }

    // three hand-enumerated fixtures, checked exactly
    {
        MCQItem item = make_item("f1", "s", {"a", "b", "c"}, 1, 0.5);
        std::vector<ProbeRecord> records;
        for (const auto& ordering : orderings_for_item(item, 0))
            records.push_back(record_for(item, ordering.permutation, {0.0, 1.0, 0.0}));
        auto f = compute_uncertainty_features(item, records);
        require(f.first_token == 1.0 && f.order_sensitivity == 1.0,
                "degenerate-certainty fixture: expected exactly (1, 1), got (" +
                    format_full(f.first_token) + ", " + format_full(f.order_sensitivity) + ")");
    }
    {
        MCQItem item = make_item("f2", "s", {"a", "b", "c", "d"}, 2, 0.5);
        std::vector<ProbeRecord> records;
        for (const auto& ordering : orderings_for_item(item, 1))
            records.push_back(record_for(item, ordering.permutation, {0.2, 0.2, 0.2, 0.2}));
        auto f = compute_uncertainty_features(item, records);
        require(f.first_token == 0.25,
                "all-equal fixture: first_token expected exactly 0.25, got " +
                    format_full(f.first_token));
        require(f.order_sensitivity == 0.0,
                "all-equal fixture: ties select choice 0, correct is 2, expected exactly 0");
    }
    {
        MCQItem item = make_item("f3", "s", {"a", "b", "c", "d", "e"}, 2, 0.5);
        auto orderings = orderings_for_item(item, 2);
        std::vector<ProbeRecord> records;
        for (size_t k = 0; k < orderings.size(); ++k) {
            std::vector<double> probs(5, 0.1);
            probs[k < 7 ? 2 : 0] = 0.6;
            records.push_back(record_for(item, orderings[k].permutation, probs));
        }
        auto f = compute_uncertainty_features(item, records);
        require(f.order_sensitivity == 0.7,
                "7-of-10 fixture: order_sensitivity expected exactly 0.7, got " +
                    format_full(f.order_sensitivity));
    }
}

// criterion 3 -----------------------------------------------------------

void forest_sanity() {
    // memorization: unpruned single tree, no bootstrap, distinct rows
    {
        std::mt19937_64 rng(0);
        std::vector<std::vector<double>> X;
        std::vector<double> y;
        for (int i = 0; i < 80; ++i) {
            X.push_back({static_cast<double>(rng() % 100000) / 100000.0,
                         static_cast<double>(rng() % 100000) / 100000.0});
            y.push_back(static_cast<double>(rng() % 100000) / 100000.0);
        }
        ForestConfig config;
        config.n_trees = 1;
        config.bootstrap = false;
        auto model = fit_forest(X, y, {"f0", "f1"}, config);
        double train_rmse = rmse(y, model.predict_rows(X));
        require(train_rmse == 0.0, "single-tree training RMSE = " + format_full(train_rmse) +
                                       ", expected exactly 0");
    }

    // y = w.x + eps, n=500, d=10, eps std 0.05, data seed 0
    std::mt19937_64 rng(0);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> w(10);
    for (auto& wi : w) wi = unit(rng) * 2.0 - 1.0;
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    std::vector<std::string> schema;
    for (int j = 0; j < 10; ++j) schema.push_back("f" + std::to_string(j));
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x(10);
        double target = 0.0;
        for (int j = 0; j < 10; ++j) {
            x[static_cast<size_t>(j)] = unit(rng);
            target += w[static_cast<size_t>(j)] * x[static_cast<size_t>(j)];
        }
        X.push_back(std::move(x));
        y.push_back(target + noise(rng));
    }
    std::vector<std::vector<double>> X_train(X.begin(), X.begin() + 350);
    std::vector<double> y_train(y.begin(), y.begin() + 350);
    std::vector<std::vector<double>> X_test(X.begin() + 350, X.end());
    std::vector<double> y_test(y.begin() + 350, y.end());

    const double dummy_rmse =
        rmse(y_test, std::vector<double>(y_test.size(), fit_dummy(y_train).mean));

    for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto start = std::chrono::steady_clock::now();
        ForestConfig config;
        config.n_trees = 100;
        config.seed = seed;
        auto model = fit_forest(X_train, y_train, schema, config);
        double forest_rmse = rmse(y_test, model.predict_rows(X_test));
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        require(forest_rmse < 0.5 * dummy_rmse,
                "seed " + std::to_string(seed) + ": forest RMSE " + format_full(forest_rmse) +
                    " not below 0.5 x dummy RMSE " + format_full(dummy_rmse));
        require(seconds < 10.0,
                "seed " + std::to_string(seed) + " took " + format_full(seconds) + "s (>=10s)");
    }
}

// criterion 4 -----------------------------------------------------------

struct RandomTreeGen {
    std::mt19937_64 rng;
    int n_features;
    int max_depth;

    RandomTreeGen(uint64_t seed, int features, int depth)
        : rng(seed), n_features(features), max_depth(depth) {}

    double unit() { return static_cast<double>(rng() % 100001) / 100000.0; }

    int grow(RegressionTree& tree, int depth, int coverage) {
        int index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.back().n_samples = coverage;
        const bool leaf = depth >= max_depth || coverage < 2 || unit() < 0.25;
        if (leaf) {
            tree.nodes[static_cast<size_t>(index)].feature = -1;
            tree.nodes[static_cast<size_t>(index)].value = unit() * 4.0 - 2.0;
            return index;
        }
        int feature = static_cast<int>(rng() % static_cast<uint64_t>(n_features));
        double threshold = unit();
        int left_coverage = 1 + static_cast<int>(rng() % static_cast<uint64_t>(coverage - 1));
        int left = grow(tree, depth + 1, left_coverage);
        int right = grow(tree, depth + 1, coverage - left_coverage);
        TreeNode& node = tree.nodes[static_cast<size_t>(index)];
        node.feature = feature;
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        return index;
    }

    RegressionTree tree() {
        RegressionTree t;
        grow(t, 0, 64 + static_cast<int>(rng() % 64));
        return t;
    }

    std::vector<double> point() {
        std::vector<double> x(static_cast<size_t>(n_features));
        for (auto& v : x) v = unit();
        return x;
    }
};

void shapley_checks() {
    // local accuracy on 1000 random (tree, x) pairs
    {
        RandomTreeGen gen(42, 10, 6);
        for (int pair = 0; pair < 1000; ++pair) {
            RegressionTree tree = gen.tree();
            auto x = gen.point();
            auto phi = tree_shap(tree, x, 10);
            double total = tree_expected_value(tree);
            for (double p : phi) total += p;
            const double gap = std::abs(total - tree.predict(x));
            require(gap <= 1e-8, "local accuracy violated by " + format_full(gap) +
                                     " on pair " + std::to_string(pair));
        }
    }
    // oracle equivalence on 200 random trees (<=12 features, depth <=4)
    {
        for (uint64_t seed = 0; seed < 200; ++seed) {
            RandomTreeGen gen(1000 + seed, 12, 4);
            RegressionTree tree = gen.tree();
            auto x = gen.point();
            auto fast = tree_shap(tree, x, 12);
            auto slow = brute_force_shapley(tree, x, 12);
            for (int f = 0; f < 12; ++f) {
                const double gap =
                    std::abs(fast[static_cast<size_t>(f)] - slow[static_cast<size_t>(f)]);
                require(gap <= 1e-8, "tree " + std::to_string(seed) + " feature " +
                                         std::to_string(f) + ": |fast - brute| = " +
                                         format_full(gap));
            }
        }
    }
}

// criterion 5 -----------------------------------------------------------

void central_claim() {
    MockInferenceServer server;
    TempDir dir("acc_claim");
    PlantedCorpus corpus = make_planted_corpus(120, 2024);
    corpus.configure(server);
    write_file(dir.file("data.jsonl"), serialize_dataset(corpus.dataset));

    RunContext ctx;
    ctx.cache_dir = dir.file("cache");
    EndpointsConfig endpoints;
    endpoints.inference = {server.endpoint("mock-model", 20, 4)};
    ctx.endpoints_override = endpoints;

    auto spec_with = [&](const std::vector<FeatureBlockKind>& blocks) {
        ExperimentSpec spec;
        spec.dataset_path = dir.file("data.jsonl");
        spec.label = "p_value";
        spec.split.seed = 1;
        spec.split.ratio = 0.7;
        spec.feature_blocks = blocks;
        spec.repetitions = 10;
        spec.seed = 3;
        return spec;
    };

    ExperimentResult text_only = run_experiment(spec_with({FeatureBlockKind::Tfidf}), ctx);
    ExperimentResult text_unc = run_experiment(
        spec_with({FeatureBlockKind::Tfidf, FeatureBlockKind::UncertaintyFirstToken,
                   FeatureBlockKind::UncertaintyOrder}),
        ctx);
    require(text_only.per_rep_rmse.size() == 10 && text_unc.per_rep_rmse.size() == 10,
            "expected 10 repetitions per spec");
    require(text_unc.mean_rmse < text_only.mean_rmse,
            "adding uncertainty did not lower mean RMSE: tfidf " +
                format_full(text_only.mean_rmse) + " vs tfidf+uncertainty " +
                format_full(text_unc.mean_rmse));
}

// criterion 6 -----------------------------------------------------------

std::pair<std::string, std::string> pipeline_report_bytes(uint64_t noise_seed) {
    MockInferenceServer server;
    TempDir dir("acc_determinism_" + std::to_string(noise_seed));
    PlantedCorpus corpus = make_planted_corpus(60, 77);
    corpus.configure(server);
    write_file(dir.file("data.jsonl"), serialize_dataset(corpus.dataset));

    RunContext ctx;
    ctx.cache_dir = dir.file("cache");
    EndpointsConfig endpoints;
    endpoints.inference = {server.endpoint("mock-model", 20, 3)};
    ctx.endpoints_override = endpoints;

    auto make_spec = [&](const std::vector<FeatureBlockKind>& blocks,
                         const std::string& method) {
        ExperimentSpec spec;
        spec.dataset_path = dir.file("data.jsonl");
        spec.label = "p_value";
        spec.split.seed = 5;
        spec.split.ratio = 0.7;
        spec.feature_blocks = blocks;
        spec.repetitions = 3;
        spec.seed = 9;
        spec.method_label = method;
        spec.dataset_label = "Synthetic";
        return spec;
    };

    GridReport report;
    report.references = {{"Reference Method", {{"Synthetic", 0.1234}}}};
    report.results = run_grid(
        {make_spec({FeatureBlockKind::Tfidf}, "Text"),
         make_spec({FeatureBlockKind::Tfidf, FeatureBlockKind::UncertaintyFirstToken,
                    FeatureBlockKind::UncertaintyOrder},
                   "Text + Uncertainty"),
         make_spec({FeatureBlockKind::UncertaintyFirstToken,
                    FeatureBlockKind::UncertaintyOrder},
                   "Uncertainty")},
        ctx);
    return {render_report(report, ReportFormat::Markdown),
            render_report(report, ReportFormat::Csv)};
}

void end_to_end_determinism() {
    auto first = pipeline_report_bytes(1);
    auto second = pipeline_report_bytes(2);
    require(first.first == second.first, "markdown reports differ between runs");
    require(first.second == second.second, "csv reports differ between runs");
    require(first.first.find("**") != std::string::npos, "no best value flagged");
}

// criterion 7 -----------------------------------------------------------

void correctness_vs_certainty() {
    MockInferenceServer server;
    TempDir dir("acc_correctness");
    std::vector<MCQItem> items;
    for (int i = 0; i < 20; ++i) {
        MCQItem item;
        item.id = "c" + std::to_string(i);
        item.stem = "certainty stem " + std::to_string(i);
        item.choices = {"opt " + std::to_string(i) + " a", "opt " + std::to_string(i) + " b",
                        "opt " + std::to_string(i) + " c"};
        // keep the correct choice off index 0 so position-bias ties never
        // accidentally count as correct
        item.correct_index = 1 + (i % 2);
        item.labels["p_value"] = 0.5;
        items.push_back(std::move(item));
    }
    Dataset dataset = Dataset::from_items(std::move(items));
    for (size_t i = 0; i < dataset.size(); ++i) {
        const MCQItem& item = dataset.items()[i];
        if (i < 10) {
            // confidently correct: mass 0.9 follows the correct choice
            std::vector<double> probs(3, 0.05);
            probs[static_cast<size_t>(item.correct_index)] = 0.9;
            server.set_rule(item.stem, MockItemRule{item.choices, probs, {}, false});
        } else {
            // diffusely wrong: mass sticks to letter positions, not choices
            server.set_rule(item.stem, MockItemRule{{}, {}, {0.7, 0.2, 0.1}, true});
        }
    }

    const std::string cache_path = dir.file("cache.jsonl");
    probe_dataset(dataset, {server.endpoint("m", 20)}, cache_path, 0);
    ProbeCache cache(cache_path);
    auto rows = correctness_report(dataset, {server.endpoint("m", 20)}, cache, 0);
    require(rows.size() == 1, "expected one model row");
    const auto& row = rows[0];
    require(row.n_correct > 0 && row.n_incorrect > 0,
            "fixture must produce both correct and incorrect items");
    require(row.first_token_correct.value() > row.first_token_incorrect.value(),
            "1st-token certainty: correct " + format_full(*row.first_token_correct) +
                " not above incorrect " + format_full(*row.first_token_incorrect));
    require(row.order_correct.value() > row.order_incorrect.value(),
            "choice-order certainty: correct " + format_full(*row.order_correct) +
                " not above incorrect " + format_full(*row.order_incorrect));
}

// criterion 8 -----------------------------------------------------------

void rmse_formula() {
    const double zero = rmse({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0});
    require(std::abs(zero - 0.0) <= 1e-9, "rmse(y, y) = " + format_full(zero));
    const double half = rmse({0.0, 1.0}, {0.0, 0.0});
    require(std::abs(half - std::sqrt(0.5)) <= 1e-9,
            "rmse([0,1],[0,0]) = " + format_full(half) + ", expected sqrt(0.5)");
    const double third = rmse({1.0, 2.0, 3.0}, {2.0, 2.0, 2.0});
    require(std::abs(third - std::sqrt(2.0 / 3.0)) <= 1e-9,
            "rmse([1,2,3],[2,2,2]) = " + format_full(third) + ", expected sqrt(2/3)");
}

}  // namespace

int main() {
    Harness harness;
    harness.run(1, "TF-IDF oracle values on the 3-document fixture", tfidf_oracle);
    harness.run(2, "uncertainty metrics against the mock inference server",
                uncertainty_metrics);
    harness.run(3, "forest sanity: memorization and 2x dummy margin across 10 seeds",
                forest_sanity);
    harness.run(4, "Shapley local accuracy (1000 pairs) and brute-force equivalence (200 trees)",
                shapley_checks);
    harness.run(5, "uncertainty features lower mean RMSE on planted-signal data",
                central_claim);
    harness.run(6, "end-to-end pipeline determinism (byte-identical reports)",
                end_to_end_determinism);
    harness.run(7, "mean certainty higher for correctly answered items (both metrics)",
                correctness_vs_certainty);
    harness.run(8, "RMSE formula hand-computed examples", rmse_formula);

    if (harness.failures == 0) {
        std::printf("all 8 acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance criteria FAILED\n", harness.failures);
    return 1;
}
