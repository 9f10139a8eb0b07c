#include <doctest.h>

#include <cmath>
#include <random>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/forest.hpp"

using namespace mcqdiff;

namespace {

struct Synthetic {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    std::vector<std::string> schema;
};

// y = w.x + noise
Synthetic linear_data(size_t n, size_t d, double noise_std, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_std);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> w(d);
    for (auto& wi : w) wi = unit(rng) * 2.0 - 1.0;
    Synthetic data;
    for (size_t j = 0; j < d; ++j) data.schema.push_back("f" + std::to_string(j));
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> x(d);
        double target = 0.0;
        for (size_t j = 0; j < d; ++j) {
            x[j] = unit(rng);
            target += w[j] * x[j];
        }
        data.X.push_back(std::move(x));
        data.y.push_back(target + noise(rng));
    }
    return data;
}

RegressionTree stump(double left_value, double right_value) {
    RegressionTree tree;
    tree.nodes.push_back({0, 0.5, 1, 2, (left_value + right_value) / 2, 2});
    tree.nodes.push_back({-1, 0.0, -1, -1, left_value, 1});
    tree.nodes.push_back({-1, 0.0, -1, -1, right_value, 1});
    return tree;
}

}  // namespace

TEST_CASE("constant targets give constant predictions") {
    Synthetic data = linear_data(40, 3, 0.0, 1);
    std::fill(data.y.begin(), data.y.end(), 0.37);
    ForestConfig config;
    config.n_trees = 10;
    auto model = fit_forest(data.X, data.y, data.schema, config);
    for (const auto& x : data.X) CHECK(model.predict(x) == doctest::Approx(0.37));
    for (const auto& tree : model.trees) CHECK(tree.nodes.size() == 1);  // zero variance stops
}

TEST_CASE("an unpruned single tree without bootstrap memorizes distinct rows") {
    Synthetic data = linear_data(60, 4, 0.0, 5);
    ForestConfig config;
    config.n_trees = 1;
    config.bootstrap = false;
    auto model = fit_forest(data.X, data.y, data.schema, config);
    auto predictions = model.predict_rows(data.X);
    CHECK(rmse(data.y, predictions) == doctest::Approx(0.0).epsilon(1e-12));
    for (size_t i = 0; i < data.y.size(); ++i)
        CHECK(predictions[i] == doctest::Approx(data.y[i]).epsilon(1e-12));
}

TEST_CASE("identical seeds give identical fingerprints and predictions") {
    Synthetic data = linear_data(50, 4, 0.05, 2);
    ForestConfig config;
    config.n_trees = 8;
    config.seed = 99;
    auto a = fit_forest(data.X, data.y, data.schema, config);
    auto b = fit_forest(data.X, data.y, data.schema, config);
    CHECK(a.train_fingerprint == b.train_fingerprint);
    CHECK(a.to_json_text() == b.to_json_text());
    config.seed = 100;
    auto c = fit_forest(data.X, data.y, data.schema, config);
    CHECK(a.to_json_text() != c.to_json_text());
}

TEST_CASE("prediction of two stumps is their mean") {
    RandomForestModel model;
    model.config.n_trees = 2;
    model.feature_schema = {"f0"};
    model.trees = {stump(0.2, 0.2), stump(0.4, 0.4)};
    CHECK(model.predict(std::vector<double>{0.0}) == doctest::Approx(0.3));
}

TEST_CASE("a single-leaf tree predicts its value everywhere") {
    RegressionTree leaf;
    leaf.nodes.push_back({-1, 0.0, -1, -1, 0.8, 5});
    CHECK(leaf.predict(std::vector<double>{0.0}) == 0.8);
    CHECK(leaf.predict(std::vector<double>{123.0}) == 0.8);
}

TEST_CASE("dummy model oracle values") {
    CHECK(fit_dummy({0.0, 1.0}).mean == doctest::Approx(0.5));
    CHECK(fit_dummy({0.8}).mean == doctest::Approx(0.8));
    CHECK_THROWS_AS(fit_dummy({}), ValidationError);

    // train mean 0.5 against test [0.2, 0.4, 0.9]: rmse = sqrt(0.26/3)
    DummyModel dummy = fit_dummy({0.0, 1.0});
    std::vector<double> y_test{0.2, 0.4, 0.9};
    std::vector<double> pred(3, predict_dummy(dummy));
    CHECK(rmse(y_test, pred) == doctest::Approx(std::sqrt(0.26 / 3.0)).epsilon(1e-12));
    CHECK(rmse(y_test, pred) == doctest::Approx(0.29439).epsilon(1e-4));
}

TEST_CASE("rmse oracle values") {
    CHECK(rmse({1.0, 2.0}, {1.0, 2.0}) == 0.0);
    CHECK(std::abs(rmse({0.0, 1.0}, {0.0, 0.0}) - std::sqrt(0.5)) <= 1e-9);
    CHECK(std::abs(rmse({1.0, 2.0, 3.0}, {2.0, 2.0, 2.0}) - std::sqrt(2.0 / 3.0)) <= 1e-9);
    CHECK_THROWS_AS(rmse({1.0}, {1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(rmse({}, {}), ValidationError);
}

TEST_CASE("splits never increase weighted child variance") {
    Synthetic data = linear_data(80, 3, 0.1, 3);
    ForestConfig config;
    config.n_trees = 1;
    config.bootstrap = false;
    auto model = fit_forest(data.X, data.y, data.schema, config);
    const RegressionTree& tree = model.trees[0];

    // walk the tree with the actual training rows and compare SSE directly
    struct Frame {
        int node;
        std::vector<size_t> rows;
    };
    auto sse_of = [&](const std::vector<size_t>& rows) {
        double sum = 0.0, sumsq = 0.0;
        for (size_t i : rows) {
            sum += data.y[i];
            sumsq += data.y[i] * data.y[i];
        }
        return sumsq - sum * sum / static_cast<double>(rows.size());
    };
    std::vector<size_t> all(data.X.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<Frame> stack{{0, all}};
    while (!stack.empty()) {
        Frame frame = std::move(stack.back());
        stack.pop_back();
        const TreeNode& node = tree.nodes[static_cast<size_t>(frame.node)];
        CHECK(node.n_samples == static_cast<int>(frame.rows.size()));
        if (node.feature < 0) continue;
        std::vector<size_t> left, right;
        for (size_t i : frame.rows) {
            if (data.X[i][static_cast<size_t>(node.feature)] <= node.threshold)
                left.push_back(i);
            else
                right.push_back(i);
        }
        CHECK(!left.empty());
        CHECK(!right.empty());
        CHECK(sse_of(left) + sse_of(right) <= sse_of(frame.rows) + 1e-9);
        stack.push_back({node.left, std::move(left)});
        stack.push_back({node.right, std::move(right)});
    }
}

TEST_CASE("forest predictions stay within the training target range") {
    Synthetic data = linear_data(100, 5, 0.2, 4);
    ForestConfig config;
    config.n_trees = 20;
    auto model = fit_forest(data.X, data.y, data.schema, config);
    const double lo = *std::min_element(data.y.begin(), data.y.end());
    const double hi = *std::max_element(data.y.begin(), data.y.end());
    Synthetic probe = linear_data(50, 5, 0.2, 14);
    for (const auto& x : probe.X) {
        double p = model.predict(x);
        CHECK(p >= lo - 1e-12);
        CHECK(p <= hi + 1e-12);
    }
}

TEST_CASE("the forest beats the dummy by 2x on linear data") {
    Synthetic all = linear_data(500, 10, 0.05, 0);
    std::vector<std::vector<double>> X_train(all.X.begin(), all.X.begin() + 350);
    std::vector<double> y_train(all.y.begin(), all.y.begin() + 350);
    std::vector<std::vector<double>> X_test(all.X.begin() + 350, all.X.end());
    std::vector<double> y_test(all.y.begin() + 350, all.y.end());

    ForestConfig config;
    config.n_trees = 100;
    auto model = fit_forest(X_train, y_train, all.schema, config);
    double forest_rmse = rmse(y_test, model.predict_rows(X_test));
    double dummy_rmse = rmse(
        y_test, std::vector<double>(y_test.size(), predict_dummy(fit_dummy(y_train))));
    CHECK(forest_rmse < 0.5 * dummy_rmse);
}

TEST_CASE("max_depth and min_samples_leaf are honored") {
    Synthetic data = linear_data(64, 2, 0.0, 6);
    ForestConfig config;
    config.n_trees = 3;
    config.max_depth = 2;
    config.min_samples_leaf = 5;
    auto model = fit_forest(data.X, data.y, data.schema, config);
    for (const auto& tree : model.trees) {
        CHECK(tree.max_depth() <= 2);
        for (const auto& node : tree.nodes)
            if (node.feature < 0) CHECK(node.n_samples >= 5);
    }
}

TEST_CASE("max_features_fraction below one still trains") {
    Synthetic data = linear_data(60, 6, 0.05, 7);
    ForestConfig config;
    config.n_trees = 10;
    config.max_features_fraction = 0.5;
    auto model = fit_forest(data.X, data.y, data.schema, config);
    auto again = fit_forest(data.X, data.y, data.schema, config);
    CHECK(model.to_json_text() == again.to_json_text());  // deterministic subset draws
}

TEST_CASE("serialization round-trips predictions exactly") {
    Synthetic data = linear_data(70, 4, 0.1, 8);
    ForestConfig config;
    config.n_trees = 12;
    auto model = fit_forest(data.X, data.y, data.schema, config);
    auto loaded = RandomForestModel::from_json_text(model.to_json_text());
    Synthetic probe = linear_data(30, 4, 0.1, 9);
    for (const auto& x : probe.X) CHECK(loaded.predict(x) == model.predict(x));
    CHECK(loaded.train_fingerprint == model.train_fingerprint);
}

TEST_CASE("splits between adjacent doubles terminate and separate") {
    // regression: the midpoint of two 1-ulp-apart values rounds to the right
    // value, which used to produce an empty partition and infinite recursion
    const double v = 1.0 / 3.0;
    const double w = std::nextafter(v, 1.0);
    std::vector<std::vector<double>> X{{v}, {w}, {v}, {w}};
    std::vector<double> y{0.0, 1.0, 0.0, 1.0};
    ForestConfig config;
    config.n_trees = 3;
    config.bootstrap = false;
    auto model = fit_forest(X, y, {"f0"}, config);
    CHECK(model.predict(std::vector<double>{v}) == doctest::Approx(0.0));
    CHECK(model.predict(std::vector<double>{w}) == doctest::Approx(1.0));
}

TEST_CASE("invalid inputs are rejected") {
    std::vector<std::vector<double>> X{{0.0}, {1.0}};
    std::vector<double> y{0.0, 1.0};
    ForestConfig config;
    CHECK_THROWS_AS(fit_forest({}, {}, {"f0"}, config), ValidationError);
    CHECK_THROWS_AS(fit_forest(X, {0.0}, {"f0"}, config), ValidationError);
    std::vector<std::vector<double>> bad_x{{0.0}, {std::nan("")}};
    CHECK_THROWS_AS(fit_forest(bad_x, y, {"f0"}, config), ValidationError);
    std::vector<double> bad_y{0.0, std::nan("")};
    CHECK_THROWS_AS(fit_forest(X, bad_y, {"f0"}, config), ValidationError);

    auto model = fit_forest(X, y, {"f0"}, config);
    CHECK_THROWS_AS(model.predict(std::vector<double>{0.0, 1.0}), ValidationError);
}
