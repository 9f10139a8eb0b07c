#include "mcqdiff/shap.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <utility>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

namespace mcqdiff {

namespace {

void validate_coverage(const RegressionTree& tree) {
    for (const auto& n : tree.nodes)
        if (n.n_samples <= 0)
            throw ValidationError("zero-coverage node: corrupt model");
}

double expected_value_at(const RegressionTree& tree, int node_index) {
    const TreeNode& node = tree.nodes[static_cast<size_t>(node_index)];
    if (node.feature < 0) return node.value;
    const double wl = tree.nodes[static_cast<size_t>(node.left)].n_samples;
    const double wr = tree.nodes[static_cast<size_t>(node.right)].n_samples;
    return (wl * expected_value_at(tree, node.left) + wr * expected_value_at(tree, node.right)) /
           (wl + wr);
}

// Gauss-Legendre nodes/weights on [0,1]; n nodes integrate polynomials of
// degree <= 2n-1 exactly. Cached per n because explanations reuse them.
const std::vector<std::pair<double, double>>& gauss_legendre_01(int n) {
    static std::mutex mutex;
    static std::map<int, std::vector<std::pair<double, double>>> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    std::vector<std::pair<double, double>> rule(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        // Newton iteration on P_n from the usual cosine initial guess
        double x = std::cos(M_PI * (k + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        const double weight = 2.0 / ((1.0 - x * x) * dp * dp);
        rule[static_cast<size_t>(k)] = {(x + 1.0) / 2.0, weight / 2.0};
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

// unique features along one root-to-leaf path with their merged fractions:
// one = 1 iff x follows every split of the feature on this path,
// zero = product of the coverage ratios of those splits
struct PathFeature {
    int feature;
    double one;
    double zero;
};

struct LeafShapWalker {
    const RegressionTree& tree;
    std::span<const double> x;
    std::vector<double>& phi;

    std::vector<PathFeature> active;
    std::vector<int> slot_of_feature;              // feature -> index into active, -1 if absent
    std::vector<std::pair<int, PathFeature>> undo;  // (slot or -1 for push, previous value)
    std::vector<double> values, prefix, suffix, acc;

    LeafShapWalker(const RegressionTree& t, std::span<const double> point,
                   std::vector<double>& out)
        : tree(t), x(point), phi(out) {
        slot_of_feature.assign(phi.size(), -1);
    }

    // phi_i += value * (one_i - zero_i) * Integral_0^1 prod_{j != i} (q*one_j + (1-q)*zero_j) dq
    // (Shapley weights as a Beta integral; the integrand is a product of
    // non-negative factors, so nothing cancels at any depth)
    void settle_leaf(double leaf_value) {
        const size_t m = active.size();
        if (m == 0) return;
        const auto& rule = gauss_legendre_01(static_cast<int>((m + 1) / 2));
        acc.assign(m, 0.0);
        values.resize(m);
        prefix.resize(m + 1);
        suffix.resize(m + 1);
        for (const auto& [q, wq] : rule) {
            for (size_t j = 0; j < m; ++j)
                values[j] = q * active[j].one + (1.0 - q) * active[j].zero;
            prefix[0] = 1.0;
            for (size_t j = 0; j < m; ++j) prefix[j + 1] = prefix[j] * values[j];
            suffix[m] = 1.0;
            for (size_t j = m; j > 0; --j) suffix[j - 1] = suffix[j] * values[j - 1];
            for (size_t j = 0; j < m; ++j) acc[j] += wq * prefix[j] * suffix[j + 1];
        }
        for (size_t j = 0; j < m; ++j)
            phi[static_cast<size_t>(active[j].feature)] +=
                leaf_value * (active[j].one - active[j].zero) * acc[j];
    }

    void walk(int node_index) {
        const TreeNode& node = tree.nodes[static_cast<size_t>(node_index)];
        if (node.feature < 0) {
            settle_leaf(node.value);
            return;
        }
        const double coverage = static_cast<double>(node.n_samples);
        const bool goes_left = x[static_cast<size_t>(node.feature)] <= node.threshold;
        for (int child : {node.left, node.right}) {
            const bool follows = (child == node.left) == goes_left;
            const double ratio =
                tree.nodes[static_cast<size_t>(child)].n_samples / coverage;
            push_edge(node.feature, follows, ratio);
            walk(child);
            pop_edge();
        }
    }

    void push_edge(int feature, bool follows, double ratio) {
        int slot = slot_of_feature[static_cast<size_t>(feature)];
        if (slot < 0) {
            undo.emplace_back(-1, PathFeature{feature, 0.0, 0.0});
            slot_of_feature[static_cast<size_t>(feature)] = static_cast<int>(active.size());
            active.push_back(PathFeature{feature, follows ? 1.0 : 0.0, ratio});
        } else {
            undo.emplace_back(slot, active[static_cast<size_t>(slot)]);
            active[static_cast<size_t>(slot)].one *= follows ? 1.0 : 0.0;
            active[static_cast<size_t>(slot)].zero *= ratio;
        }
    }

    void pop_edge() {
        auto [slot, previous] = undo.back();
        undo.pop_back();
        if (slot < 0) {
            slot_of_feature[static_cast<size_t>(active.back().feature)] = -1;
            active.pop_back();
        } else {
            active[static_cast<size_t>(slot)] = previous;
        }
    }
};

}  // namespace

double tree_expected_value(const RegressionTree& tree) {
    validate_coverage(tree);
    return expected_value_at(tree, 0);
}

std::vector<double> tree_shap(const RegressionTree& tree, std::span<const double> x,
                              int n_features) {
    validate_coverage(tree);
    std::vector<double> phi(static_cast<size_t>(n_features), 0.0);
    LeafShapWalker walker(tree, x, phi);
    walker.walk(0);
    return phi;
}

namespace {

// coverage-weighted expectation with the features in `mask` (over `features`)
// conditioned to follow x
double coalition_value(const RegressionTree& tree, int node_index,
                       std::span<const double> x, const std::vector<int>& features,
                       unsigned mask) {
    const TreeNode& node = tree.nodes[static_cast<size_t>(node_index)];
    if (node.feature < 0) return node.value;
    int slot = -1;
    for (size_t i = 0; i < features.size(); ++i)
        if (features[i] == node.feature) slot = static_cast<int>(i);
    if (slot >= 0 && (mask >> slot) & 1u) {
        const int next = x[static_cast<size_t>(node.feature)] <= node.threshold ? node.left
                                                                                : node.right;
        return coalition_value(tree, next, x, features, mask);
    }
    const double wl = tree.nodes[static_cast<size_t>(node.left)].n_samples;
    const double wr = tree.nodes[static_cast<size_t>(node.right)].n_samples;
    return (wl * coalition_value(tree, node.left, x, features, mask) +
            wr * coalition_value(tree, node.right, x, features, mask)) /
           (wl + wr);
}

}  // namespace

std::vector<double> brute_force_shapley(const RegressionTree& tree,
                                        std::span<const double> x, int n_features) {
    validate_coverage(tree);
    std::set<int> used;
    for (const auto& n : tree.nodes)
        if (n.feature >= 0) used.insert(n.feature);
    std::vector<int> features(used.begin(), used.end());
    const size_t f = features.size();
    if (f > 12)
        throw ValidationError("brute-force Shapley supports at most 12 distinct features, got " +
                              std::to_string(f));

    std::vector<double> values(1u << f);
    for (unsigned mask = 0; mask < (1u << f); ++mask)
        values[mask] = coalition_value(tree, 0, x, features, mask);

    std::vector<double> factorial(f + 1, 1.0);
    for (size_t i = 1; i <= f; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

    std::vector<double> phi(static_cast<size_t>(n_features), 0.0);
    for (size_t i = 0; i < f; ++i) {
        double total = 0.0;
        for (unsigned mask = 0; mask < (1u << f); ++mask) {
            if ((mask >> i) & 1u) continue;
            const int s = __builtin_popcount(mask);
            const double weight = factorial[static_cast<size_t>(s)] *
                                  factorial[f - static_cast<size_t>(s) - 1] / factorial[f];
            total += weight * (values[mask | (1u << i)] - values[mask]);
        }
        phi[static_cast<size_t>(features[i])] = total;
    }
    return phi;
}

ShapExplanation forest_shap(const RandomForestModel& model, std::span<const double> x,
                            const std::string& item_id) {
    if (x.size() != model.feature_schema.size())
        throw ValidationError("shap input width does not match model schema");
    ShapExplanation out;
    out.item_id = item_id;
    out.feature_values.assign(x.begin(), x.end());
    out.contributions.assign(model.feature_schema.size(), 0.0);
    double base = 0.0;
    for (const auto& tree : model.trees) {
        base += tree_expected_value(tree);
        auto phi = tree_shap(tree, x, static_cast<int>(model.feature_schema.size()));
        for (size_t i = 0; i < phi.size(); ++i) out.contributions[i] += phi[i];
    }
    const double n = static_cast<double>(model.trees.size());
    out.base_value = base / n;
    for (double& c : out.contributions) c /= n;
    return out;
}

std::vector<ShapSummaryRow> shap_summary(const std::vector<ShapExplanation>& explanations,
                                         const std::vector<std::string>& schema, int top_k) {
    if (explanations.empty())
        throw ValidationError("shap summary needs at least one explanation");
    std::vector<ShapSummaryRow> rows;
    rows.reserve(schema.size());
    for (size_t i = 0; i < schema.size(); ++i) {
        double sum = 0.0;
        for (const auto& e : explanations) sum += std::abs(e.contributions[i]);
        rows.push_back({schema[i], sum / static_cast<double>(explanations.size())});
    }
    std::sort(rows.begin(), rows.end(), [](const ShapSummaryRow& a, const ShapSummaryRow& b) {
        if (a.mean_abs_contribution != b.mean_abs_contribution)
            return a.mean_abs_contribution > b.mean_abs_contribution;
        return a.feature < b.feature;
    });
    if (top_k > 0 && rows.size() > static_cast<size_t>(top_k))
        rows.resize(static_cast<size_t>(top_k));
    return rows;
}

std::string shap_details_csv(const std::vector<ShapExplanation>& explanations,
                             const std::vector<std::string>& schema,
                             const std::vector<ShapSummaryRow>& ranking) {
    std::string out = "item_id,feature,feature_value,contribution\n";
    for (const auto& e : explanations) {
        for (const auto& row : ranking) {
            int col = -1;
            for (size_t i = 0; i < schema.size(); ++i)
                if (schema[i] == row.feature) col = static_cast<int>(i);
            if (col < 0) continue;
            out += e.item_id;
            out += ',';
            out += row.feature;
            out += ',';
            out += format_fixed(e.feature_values[static_cast<size_t>(col)], 6);
            out += ',';
            out += format_fixed(e.contributions[static_cast<size_t>(col)], 6);
            out += '\n';
        }
    }
    return out;
}

std::string shap_summary_svg(const std::vector<ShapSummaryRow>& ranking) {
    const int bar_height = 22;
    const int gap = 6;
    const int label_width = 260;
    const int chart_width = 360;
    const int height = static_cast<int>(ranking.size()) * (bar_height + gap) + gap + 24;
    double max_value = 0.0;
    for (const auto& row : ranking) max_value = std::max(max_value, row.mean_abs_contribution);
    if (max_value <= 0.0) max_value = 1.0;

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(label_width + chart_width + 80) + "\" height=\"" +
                      std::to_string(height) + "\">\n";
    svg += "<text x=\"8\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">"
           "mean |contribution|</text>\n";
    int y = 24 + gap;
    for (const auto& row : ranking) {
        const int w = static_cast<int>(chart_width * row.mean_abs_contribution / max_value);
        svg += "<text x=\"8\" y=\"" + std::to_string(y + bar_height - 6) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + row.feature + "</text>\n";
        svg += "<rect x=\"" + std::to_string(label_width) + "\" y=\"" + std::to_string(y) +
               "\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(bar_height) +
               "\" fill=\"#4477aa\"/>\n";
        svg += "<text x=\"" + std::to_string(label_width + w + 6) + "\" y=\"" +
               std::to_string(y + bar_height - 6) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" +
               format_fixed(row.mean_abs_contribution, 4) + "</text>\n";
        y += bar_height + gap;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace mcqdiff
