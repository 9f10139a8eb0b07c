#include "mcqdiff/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <json.hpp>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

using nlohmann::json;

namespace mcqdiff {

double RegressionTree::predict(std::span<const double> x) const {
    int node = 0;
    while (!is_leaf(node)) {
        const TreeNode& n = nodes[static_cast<size_t>(node)];
        node = x[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<size_t>(node)].value;
}

int RegressionTree::max_depth() const {
    // nodes are stored in preorder, so a simple DFS suffices
    struct Frame {
        int node;
        int depth;
    };
    int best = 0;
    std::vector<Frame> stack{{0, 0}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        best = std::max(best, f.depth);
        const TreeNode& n = nodes[static_cast<size_t>(f.node)];
        if (n.feature >= 0) {
            stack.push_back({n.left, f.depth + 1});
            stack.push_back({n.right, f.depth + 1});
        }
    }
    return best;
}

double RandomForestModel::predict(std::span<const double> x) const {
    if (x.size() != feature_schema.size())
        throw ValidationError("feature vector width " + std::to_string(x.size()) +
                              " does not match model schema width " +
                              std::to_string(feature_schema.size()));
    double sum = 0.0;
    for (const auto& tree : trees) sum += tree.predict(x);
    return sum / static_cast<double>(trees.size());
}

std::vector<double> RandomForestModel::predict_rows(
    const std::vector<std::vector<double>>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(predict(row));
    return out;
}

namespace {

struct TreeBuilder {
    const std::vector<std::vector<double>>& X;
    const std::vector<double>& y;
    const ForestConfig& config;
    std::mt19937_64 rng;
    RegressionTree tree;

    TreeBuilder(const std::vector<std::vector<double>>& X_, const std::vector<double>& y_,
                const ForestConfig& config_, uint64_t tree_seed)
        : X(X_), y(y_), config(config_), rng(tree_seed) {}

    int feature_count() const { return static_cast<int>(X[0].size()); }

    std::vector<int> candidate_features() {
        const int d = feature_count();
        if (config.max_features_fraction >= 1.0) {
            std::vector<int> all(static_cast<size_t>(d));
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        int m = std::max(1, static_cast<int>(config.max_features_fraction * d));
        // partial Fisher-Yates draw of m distinct features
        std::vector<int> pool(static_cast<size_t>(d));
        std::iota(pool.begin(), pool.end(), 0);
        std::vector<int> picked;
        picked.reserve(static_cast<size_t>(m));
        for (int i = 0; i < m; ++i) {
            size_t j = static_cast<size_t>(i) +
                       static_cast<size_t>(uniform_below(rng, static_cast<uint64_t>(d - i)));
            std::swap(pool[static_cast<size_t>(i)], pool[j]);
            picked.push_back(pool[static_cast<size_t>(i)]);
        }
        std::sort(picked.begin(), picked.end());  // evaluate in feature-index order
        return picked;
    }

    struct Split {
        bool found = false;
        int feature = -1;
        double threshold = 0.0;
        double children_sse = 0.0;
    };

    // best split = minimal summed child SSE; ties resolved by visiting
    // features ascending and thresholds ascending, keeping strict improvements
    Split best_split(const std::vector<int>& indices) {
        Split best;
        std::vector<std::pair<double, double>> xy(indices.size());
        for (int f : candidate_features()) {
            for (size_t i = 0; i < indices.size(); ++i) {
                xy[i] = {X[static_cast<size_t>(indices[i])][static_cast<size_t>(f)],
                         y[static_cast<size_t>(indices[i])]};
            }
            std::sort(xy.begin(), xy.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double sum_left = 0.0, sumsq_left = 0.0;
            double sum_right = 0.0, sumsq_right = 0.0;
            for (const auto& [xv, yv] : xy) {
                sum_right += yv;
                sumsq_right += yv * yv;
            }
            const size_t n = xy.size();
            for (size_t k = 0; k + 1 < n; ++k) {
                const double yv = xy[k].second;
                sum_left += yv;
                sumsq_left += yv * yv;
                sum_right -= yv;
                sumsq_right -= yv * yv;
                if (xy[k].first == xy[k + 1].first) continue;  // no boundary here
                const size_t n_left = k + 1;
                const size_t n_right = n - n_left;
                if (n_left < static_cast<size_t>(config.min_samples_leaf) ||
                    n_right < static_cast<size_t>(config.min_samples_leaf))
                    continue;
                double sse_left = sumsq_left - sum_left * sum_left / static_cast<double>(n_left);
                double sse_right =
                    sumsq_right - sum_right * sum_right / static_cast<double>(n_right);
                double score = std::max(0.0, sse_left) + std::max(0.0, sse_right);
                if (!best.found || score < best.children_sse) {
                    // the midpoint of two adjacent doubles can round up to the
                    // right value; fall back to the left value so the split
                    // always separates
                    double threshold = (xy[k].first + xy[k + 1].first) / 2.0;
                    if (!(threshold < xy[k + 1].first)) threshold = xy[k].first;
                    best.found = true;
                    best.feature = f;
                    best.threshold = threshold;
                    best.children_sse = score;
                }
            }
        }
        return best;
    }

    int build(const std::vector<int>& indices, int depth) {
        double sum = 0.0;
        double y_min = y[static_cast<size_t>(indices[0])];
        double y_max = y_min;
        for (int i : indices) {
            sum += y[static_cast<size_t>(i)];
            y_min = std::min(y_min, y[static_cast<size_t>(i)]);
            y_max = std::max(y_max, y[static_cast<size_t>(i)]);
        }

        int node_index = static_cast<int>(tree.nodes.size());
        TreeNode node;
        node.value = sum / static_cast<double>(indices.size());
        node.n_samples = static_cast<int>(indices.size());
        tree.nodes.push_back(node);

        const bool depth_exhausted = config.max_depth && depth >= *config.max_depth;
        if (indices.size() < static_cast<size_t>(config.min_samples_split) ||
            depth_exhausted || y_min == y_max)
            return node_index;

        Split split = best_split(indices);
        if (!split.found) return node_index;

        std::vector<int> left, right;
        for (int i : indices) {
            if (X[static_cast<size_t>(i)][static_cast<size_t>(split.feature)] <= split.threshold)
                left.push_back(i);
            else
                right.push_back(i);
        }
        if (left.empty() || right.empty()) return node_index;  // degenerate, keep the leaf

        tree.nodes[static_cast<size_t>(node_index)].feature = split.feature;
        tree.nodes[static_cast<size_t>(node_index)].threshold = split.threshold;
        int left_index = build(left, depth + 1);
        tree.nodes[static_cast<size_t>(node_index)].left = left_index;
        int right_index = build(right, depth + 1);
        tree.nodes[static_cast<size_t>(node_index)].right = right_index;
        return node_index;
    }

    RegressionTree run() {
        const size_t n = X.size();
        std::vector<int> indices;
        indices.reserve(n);
        if (config.bootstrap) {
            for (size_t i = 0; i < n; ++i)
                indices.push_back(static_cast<int>(uniform_below(rng, n)));
        } else {
            indices.resize(n);
            std::iota(indices.begin(), indices.end(), 0);
        }
        build(indices, 0);
        return std::move(tree);
    }
};

}  // namespace

RandomForestModel fit_forest(const std::vector<std::vector<double>>& X,
                             const std::vector<double>& y,
                             const std::vector<std::string>& feature_schema,
                             const ForestConfig& config) {
    if (X.empty() || y.empty()) throw ValidationError("cannot fit forest on empty data");
    if (X.size() != y.size())
        throw ValidationError("feature rows (" + std::to_string(X.size()) +
                              ") and targets (" + std::to_string(y.size()) + ") differ");
    if (X.size() < 2) throw ValidationError("forest training needs at least 2 rows");
    if (config.n_trees < 1) throw ValidationError("n_trees must be >= 1");
    if (!(config.max_features_fraction > 0.0 && config.max_features_fraction <= 1.0))
        throw ValidationError("max_features_fraction must lie in (0,1]");
    const size_t width = feature_schema.size();
    for (const auto& row : X) {
        if (row.size() != width)
            throw ValidationError("feature row width does not match the schema");
        for (double v : row)
            if (!std::isfinite(v)) throw ValidationError("non-finite value in features");
    }
    for (double v : y)
        if (!std::isfinite(v)) throw ValidationError("non-finite value in targets");

    RandomForestModel model;
    model.config = config;
    model.feature_schema = feature_schema;
    model.trees.resize(static_cast<size_t>(config.n_trees));

    std::atomic<int> next{0};
    auto train_some = [&]() {
        while (true) {
            int t = next.fetch_add(1);
            if (t >= config.n_trees) return;
            TreeBuilder builder(X, y, config, config.seed + static_cast<uint64_t>(t));
            model.trees[static_cast<size_t>(t)] = builder.run();
        }
    };
    size_t n_threads = std::min<size_t>(std::max(1u, std::thread::hardware_concurrency()),
                                        static_cast<size_t>(config.n_trees));
    if (n_threads <= 1) {
        train_some();
    } else {
        std::vector<std::thread> threads;
        for (size_t i = 0; i < n_threads; ++i) threads.emplace_back(train_some);
        for (auto& th : threads) th.join();
    }

    // fingerprint over schema, config, and training data
    std::string blob;
    for (const auto& s : feature_schema) {
        blob += s;
        blob += '\x1f';
    }
    json cfg;
    cfg["n_trees"] = config.n_trees;
    cfg["max_depth"] = config.max_depth ? json(*config.max_depth) : json(nullptr);
    cfg["min_samples_split"] = config.min_samples_split;
    cfg["min_samples_leaf"] = config.min_samples_leaf;
    cfg["max_features_fraction"] = config.max_features_fraction;
    cfg["bootstrap"] = config.bootstrap;
    cfg["seed"] = config.seed;
    blob += cfg.dump();
    for (size_t i = 0; i < X.size(); ++i) {
        for (double v : X[i]) {
            blob += format_full(v);
            blob += ',';
        }
        blob += '=';
        blob += format_full(y[i]);
        blob += '\n';
    }
    model.train_fingerprint = sha256_hex(blob);
    return model;
}

RandomForestModel fit_forest(const FeatureMatrix& X, const std::vector<double>& y,
                             const ForestConfig& config) {
    return fit_forest(X.rows, y, X.schema, config);
}

std::string RandomForestModel::to_json_text() const {
    json j;
    j["format_version"] = 1;
    json cfg;
    cfg["n_trees"] = config.n_trees;
    cfg["max_depth"] = config.max_depth ? json(*config.max_depth) : json(nullptr);
    cfg["min_samples_split"] = config.min_samples_split;
    cfg["min_samples_leaf"] = config.min_samples_leaf;
    cfg["max_features_fraction"] = config.max_features_fraction;
    cfg["bootstrap"] = config.bootstrap;
    cfg["seed"] = config.seed;
    j["config"] = cfg;
    j["feature_schema"] = feature_schema;
    j["train_fingerprint"] = train_fingerprint;
    json jtrees = json::array();
    for (const auto& tree : trees) {
        json jnodes = json::array();
        for (const auto& n : tree.nodes)
            jnodes.push_back(json::array(
                {n.feature, n.threshold, n.left, n.right, n.value, n.n_samples}));
        jtrees.push_back(json{{"nodes", jnodes}});
    }
    j["trees"] = jtrees;
    return j.dump();
}

RandomForestModel RandomForestModel::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed forest model: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw ValidationError("unsupported forest model format version");
    RandomForestModel m;
    const json& cfg = j.at("config");
    m.config.n_trees = cfg.at("n_trees").get<int>();
    if (!cfg.at("max_depth").is_null()) m.config.max_depth = cfg.at("max_depth").get<int>();
    m.config.min_samples_split = cfg.at("min_samples_split").get<int>();
    m.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
    m.config.max_features_fraction = cfg.at("max_features_fraction").get<double>();
    m.config.bootstrap = cfg.at("bootstrap").get<bool>();
    m.config.seed = cfg.at("seed").get<uint64_t>();
    for (const auto& s : j.at("feature_schema")) m.feature_schema.push_back(s.get<std::string>());
    m.train_fingerprint = j.at("train_fingerprint").get<std::string>();
    for (const auto& jt : j.at("trees")) {
        RegressionTree tree;
        for (const auto& jn : jt.at("nodes")) {
            TreeNode n;
            n.feature = jn.at(0).get<int>();
            n.threshold = jn.at(1).get<double>();
            n.left = jn.at(2).get<int>();
            n.right = jn.at(3).get<int>();
            n.value = jn.at(4).get<double>();
            n.n_samples = jn.at(5).get<int>();
            tree.nodes.push_back(n);
        }
        if (tree.nodes.empty()) throw ValidationError("forest model has an empty tree");
        m.trees.push_back(std::move(tree));
    }
    if (m.trees.size() != static_cast<size_t>(m.config.n_trees))
        throw ValidationError("forest model tree count does not match config");
    return m;
}

void RandomForestModel::save(const std::string& path) const {
    write_file(path, to_json_text());
}

RandomForestModel RandomForestModel::load(const std::string& path) {
    return from_json_text(read_file(path));
}

DummyModel fit_dummy(const std::vector<double>& y) {
    if (y.empty()) throw ValidationError("cannot fit dummy model on empty targets");
    double sum = 0.0;
    for (double v : y) sum += v;
    return DummyModel{sum / static_cast<double>(y.size())};
}

double predict_dummy(const DummyModel& model) { return model.mean; }

double rmse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.size() != y_hat.size())
        throw ValidationError("rmse: length mismatch (" + std::to_string(y.size()) + " vs " +
                              std::to_string(y_hat.size()) + ")");
    if (y.empty()) throw ValidationError("rmse: empty input");
    double sum = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        double d = y[i] - y_hat[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(y.size()));
}

}  // namespace mcqdiff
