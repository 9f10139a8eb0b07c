#include <doctest.h>

#include <cmath>
#include <random>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/importance.hpp"
#include "mcqdiff/shap.hpp"

using namespace mcqdiff;

namespace {

// random tree with consistent child coverages; depth-first construction
struct RandomTreeGen {
    std::mt19937_64 rng;
    int n_features;
    int max_depth;

    explicit RandomTreeGen(uint64_t seed, int features, int depth)
        : rng(seed), n_features(features), max_depth(depth) {}

    double unit() { return static_cast<double>(rng() % 100001) / 100000.0; }

    int grow(RegressionTree& tree, int depth, int coverage) {
        int index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        TreeNode& placeholder = tree.nodes.back();
        placeholder.n_samples = coverage;
        const bool leaf = depth >= max_depth || coverage < 2 || unit() < 0.25;
        if (leaf) {
            tree.nodes[static_cast<size_t>(index)].feature = -1;
            tree.nodes[static_cast<size_t>(index)].value = unit() * 4.0 - 2.0;
            return index;
        }
        int feature = static_cast<int>(rng() % static_cast<uint64_t>(n_features));
        double threshold = unit();
        int left_coverage = 1 + static_cast<int>(rng() % static_cast<uint64_t>(coverage - 1));
        int right_coverage = coverage - left_coverage;
        int left = grow(tree, depth + 1, left_coverage);
        int right = grow(tree, depth + 1, right_coverage);
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

RegressionTree equal_coverage_stump(double left_value, double right_value) {
    RegressionTree tree;
    tree.nodes.push_back({0, 0.5, 1, 2, (left_value + right_value) / 2, 2});
    tree.nodes.push_back({-1, 0.0, -1, -1, left_value, 1});
    tree.nodes.push_back({-1, 0.0, -1, -1, right_value, 1});
    return tree;
}

}  // namespace

TEST_CASE("a single-leaf tree has zero contributions and its value as base") {
    RegressionTree leaf;
    leaf.nodes.push_back({-1, 0.0, -1, -1, 0.42, 10});
    auto phi = tree_shap(leaf, std::vector<double>{1.0, 2.0}, 2);
    CHECK(phi[0] == 0.0);
    CHECK(phi[1] == 0.0);
    CHECK(tree_expected_value(leaf) == doctest::Approx(0.42));
}

TEST_CASE("equal-coverage stump routed right attributes 0.5 to its feature") {
    RegressionTree tree = equal_coverage_stump(0.0, 1.0);
    std::vector<double> x{0.9};  // routed right
    auto phi = tree_shap(tree, x, 1);
    CHECK(phi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tree_expected_value(tree) == doctest::Approx(0.5));
    auto oracle = brute_force_shapley(tree, x, 1);
    CHECK(oracle[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("brute force: empty and full coalition anchor values") {
    RegressionTree tree = equal_coverage_stump(0.0, 1.0);
    // v(empty) = coverage mean = 0.5; v(full) = prediction = 1 at x right
    std::vector<double> x{0.9};
    auto phi = brute_force_shapley(tree, x, 1);
    CHECK(tree_expected_value(tree) + phi[0] == doctest::Approx(tree.predict(x)));
}

TEST_CASE("tree_shap equals brute force on random small trees") {
    int checked = 0;
    for (uint64_t seed = 0; seed < 60; ++seed) {
        RandomTreeGen gen(seed, 12, 4);
        RegressionTree tree = gen.tree();
        for (int trial = 0; trial < 3; ++trial) {
            auto x = gen.point();
            auto fast = tree_shap(tree, x, 12);
            auto slow = brute_force_shapley(tree, x, 12);
            for (int f = 0; f < 12; ++f)
                CHECK(std::abs(fast[static_cast<size_t>(f)] - slow[static_cast<size_t>(f)]) <=
                      1e-8);
            ++checked;
        }
    }
    CHECK(checked == 180);
}

TEST_CASE("local accuracy holds on random trees") {
    for (uint64_t seed = 100; seed < 140; ++seed) {
        RandomTreeGen gen(seed, 8, 5);
        RegressionTree tree = gen.tree();
        auto x = gen.point();
        auto phi = tree_shap(tree, x, 8);
        double total = tree_expected_value(tree);
        for (double p : phi) total += p;
        CHECK(std::abs(total - tree.predict(x)) <= 1e-8);
    }
}

TEST_CASE("forest of one tree equals tree_shap") {
    RandomTreeGen gen(7, 6, 4);
    RandomForestModel model;
    model.config.n_trees = 1;
    model.feature_schema = {"a", "b", "c", "d", "e", "f"};
    model.trees.push_back(gen.tree());
    auto x = gen.point();
    auto single = tree_shap(model.trees[0], x, 6);
    auto explanation = forest_shap(model, x, "item");
    for (size_t f = 0; f < 6; ++f)
        CHECK(explanation.contributions[f] == doctest::Approx(single[f]).epsilon(1e-12));
    CHECK(explanation.item_id == "item");
    CHECK(explanation.feature_values == x);
}

TEST_CASE("mirrored trees cancel to zero contributions") {
    RandomForestModel model;
    model.config.n_trees = 2;
    model.feature_schema = {"f0"};
    model.trees = {equal_coverage_stump(0.0, 1.0), equal_coverage_stump(1.0, 0.0)};
    auto explanation = forest_shap(model, std::vector<double>{0.9}, "x");
    CHECK(explanation.contributions[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(explanation.base_value == doctest::Approx(0.5).epsilon(1e-12));  // mean of 0.5 and 0.5
}

TEST_CASE("forest local accuracy") {
    RandomForestModel model;
    model.config.n_trees = 5;
    model.feature_schema = {"a", "b", "c", "d"};
    RandomTreeGen gen(21, 4, 4);
    for (int t = 0; t < 5; ++t) model.trees.push_back(gen.tree());
    for (int trial = 0; trial < 20; ++trial) {
        auto x = gen.point();
        auto e = forest_shap(model, x, "p");
        double total = e.base_value;
        for (double c : e.contributions) total += c;
        CHECK(std::abs(total - model.predict(x)) <= 1e-8);
    }
}

TEST_CASE("symmetric features receive equal contributions") {
    // root splits f0, both children split f1 with the same threshold and
    // coverages; leaf values depend only on how many splits x passes
    RegressionTree tree;
    tree.nodes.push_back({0, 0.5, 1, 4, 1.0, 4});   // root
    tree.nodes.push_back({1, 0.5, 2, 3, 0.5, 2});   // left: f1
    tree.nodes.push_back({-1, 0.0, -1, -1, 0.0, 1});
    tree.nodes.push_back({-1, 0.0, -1, -1, 1.0, 1});
    tree.nodes.push_back({1, 0.5, 5, 6, 1.5, 2});   // right: f1
    tree.nodes.push_back({-1, 0.0, -1, -1, 1.0, 1});
    tree.nodes.push_back({-1, 0.0, -1, -1, 2.0, 1});
    std::vector<double> x{0.9, 0.9};  // passes both splits the same way
    auto phi = tree_shap(tree, x, 2);
    CHECK(phi[0] == doctest::Approx(phi[1]).epsilon(1e-12));
    auto oracle = brute_force_shapley(tree, x, 2);
    CHECK(phi[0] == doctest::Approx(oracle[0]).epsilon(1e-10));
}

TEST_CASE("zero-coverage nodes are rejected") {
    RegressionTree tree = equal_coverage_stump(0.0, 1.0);
    tree.nodes[1].n_samples = 0;
    CHECK_THROWS_WITH_AS(tree_shap(tree, std::vector<double>{0.1}, 1),
                         doctest::Contains("zero-coverage"), ValidationError);
}

TEST_CASE("brute force refuses more than 12 distinct features") {
    // right-leaning chain splitting a fresh feature at every level
    RegressionTree tree;
    const int kFeatures = 13;
    for (int f = 0; f < kFeatures; ++f) {
        int index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({f, 0.5, index + 1, index + 2, 0.0, kFeatures + 1 - f});
        tree.nodes.push_back({-1, 0.0, -1, -1, static_cast<double>(f), 1});  // left leaf
        if (f == kFeatures - 1)
            tree.nodes.push_back({-1, 0.0, -1, -1, 99.0, 1});  // final right leaf
    }
    // rewire: each internal node's right child is the next internal node
    for (int f = 0; f + 1 < kFeatures; ++f)
        tree.nodes[static_cast<size_t>(2 * f)].right = 2 * (f + 1);
    std::vector<double> x(kFeatures, 0.9);
    CHECK_THROWS_WITH_AS(brute_force_shapley(tree, x, kFeatures),
                         doctest::Contains("at most 12"), ValidationError);
    // the fast path handles it fine
    auto phi = tree_shap(tree, x, kFeatures);
    double total = tree_expected_value(tree);
    for (double p : phi) total += p;
    CHECK(std::abs(total - tree.predict(x)) <= 1e-8);
}

TEST_CASE("local accuracy survives deep sparse-feature trees") {
    // sparse binary columns force chain-shaped trees hundreds of levels deep;
    // regression for the cancellation blowup of the classic path recursion
    std::mt19937_64 rng(0);
    const size_t n = 200, d = 150;
    std::vector<std::vector<double>> X(n, std::vector<double>(d, 0.0));
    std::vector<double> y(n);
    std::vector<std::string> schema;
    for (size_t j = 0; j < d; ++j) schema.push_back("f" + std::to_string(j));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < d; ++j) X[i][j] = (rng() % 100) < 3 ? 1.0 : 0.0;
        y[i] = static_cast<double>(rng() % 1000) / 1000.0;
    }
    ForestConfig config;
    config.n_trees = 5;
    auto model = fit_forest(X, y, schema, config);
    int depth = 0;
    for (const auto& tree : model.trees) depth = std::max(depth, tree.max_depth());
    CHECK(depth > 25);  // the fixture must actually be deep
    for (int trial = 0; trial < 10; ++trial) {
        auto e = forest_shap(model, X[static_cast<size_t>(trial)], "x");
        double total = e.base_value;
        for (double c : e.contributions) {
            total += c;
            CHECK(std::abs(c) <= 1.0 + 1e-9);  // Shapley values of a [0,1] game
        }
        CHECK(std::abs(total - model.predict(X[static_cast<size_t>(trial)])) <= 1e-8);
    }
}

TEST_CASE("shap summary ranks by mean absolute contribution") {
    ShapExplanation e;
    e.item_id = "i";
    e.base_value = 0.0;
    e.contributions = {0.2, -0.5};
    e.feature_values = {1.0, 2.0};
    auto ranking = shap_summary({e}, {"f1", "f2"}, 10);
    REQUIRE(ranking.size() == 2);
    CHECK(ranking[0].feature == "f2");
    CHECK(ranking[0].mean_abs_contribution == doctest::Approx(0.5));
    CHECK(ranking[1].feature == "f1");

    auto top1 = shap_summary({e}, {"f1", "f2"}, 1);
    CHECK(top1.size() == 1);
    auto all = shap_summary({e}, {"f1", "f2"}, 99);  // top_k larger than feature count
    CHECK(all.size() == 2);
}

TEST_CASE("shap summary breaks ties lexicographically") {
    ShapExplanation e;
    e.contributions = {0.3, 0.3};
    e.feature_values = {0.0, 0.0};
    auto ranking = shap_summary({e}, {"zeta", "alpha"}, 10);
    CHECK(ranking[0].feature == "alpha");
    CHECK(ranking[1].feature == "zeta");
}

TEST_CASE("shap details CSV exports per-item records for ranked features") {
    ShapExplanation e1;
    e1.item_id = "a";
    e1.contributions = {0.1, 0.4};
    e1.feature_values = {7.0, 8.0};
    ShapExplanation e2;
    e2.item_id = "b";
    e2.contributions = {-0.2, 0.0};
    e2.feature_values = {1.0, 2.0};
    auto ranking = shap_summary({e1, e2}, {"x", "y"}, 1);
    std::string csv = shap_details_csv({e1, e2}, {"x", "y"}, ranking);
    CHECK(csv.find("item_id,feature,feature_value,contribution") == 0);
    CHECK(csv.find("a,y,") != std::string::npos);
    CHECK(csv.find("b,y,") != std::string::npos);
    CHECK(csv.find(",x,") == std::string::npos);  // only the top-1 feature exported
}

TEST_CASE("svg bar chart contains one bar per ranked feature") {
    std::vector<ShapSummaryRow> ranking = {{"unc.m.first_token", 0.31}, {"tfidf.neuron", 0.07}};
    std::string svg = shap_summary_svg(ranking);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("unc.m.first_token") != std::string::npos);
    CHECK(svg.find("tfidf.neuron") != std::string::npos);
    CHECK(std::count(svg.begin(), svg.end(), '\n') > 4);
    CHECK(svg == shap_summary_svg(ranking));  // deterministic bytes
}

TEST_CASE("permutation importance: unused features score exactly zero") {
    // feature 1 is constant in training, so no tree can split on it
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 60; ++i) {
        double a = static_cast<double>(rng() % 1000) / 1000.0;
        X.push_back({a, 0.5});
        y.push_back(a);
    }
    ForestConfig config;
    config.n_trees = 10;
    auto model = fit_forest(X, y, {"used", "unused"}, config);

    FeatureMatrix X_test;
    X_test.schema = {"used", "unused"};
    std::vector<double> y_test;
    for (int i = 0; i < 30; ++i) {
        double a = static_cast<double>(rng() % 1000) / 1000.0;
        X_test.ids.push_back("t" + std::to_string(i));
        X_test.rows.push_back({a, static_cast<double>(i)});  // varies at test time
        y_test.push_back(a);
    }
    auto importance = permutation_importance(model, X_test, y_test, 3, 0);
    CHECK(importance[1] == 0.0);
    CHECK(importance[0] > 0.0);  // the label-equal feature matters
    CHECK(permutation_importance(model, X_test, y_test, 3, 0) == importance);  // seeded
}
