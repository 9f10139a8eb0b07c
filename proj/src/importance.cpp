#include "mcqdiff/importance.hpp"

#include <numeric>
#include <random>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

namespace mcqdiff {

std::vector<double> permutation_importance(const RandomForestModel& model,
                                           const FeatureMatrix& X_test,
                                           const std::vector<double>& y_test, int repeats,
                                           uint64_t seed) {
    if (X_test.rows.size() < 2)
        throw ValidationError("permutation importance needs at least 2 test rows");
    if (X_test.rows.size() != y_test.size())
        throw ValidationError("permutation importance: rows and targets differ");
    if (repeats < 1) throw ValidationError("permutation importance: repeats must be >= 1");
    if (X_test.schema != model.feature_schema)
        throw ValidationError("permutation importance: feature schema mismatch");

    const double baseline = rmse(y_test, model.predict_rows(X_test.rows));
    const size_t n = X_test.rows.size();
    const size_t width = X_test.width();

    std::vector<double> importance(width, 0.0);
    std::vector<std::vector<double>> work = X_test.rows;
    for (size_t f = 0; f < width; ++f) {
        double total = 0.0;
        for (int r = 0; r < repeats; ++r) {
            std::mt19937_64 rng(mix64(seed ^ mix64(f * 1000003ULL + static_cast<uint64_t>(r))));
            std::vector<size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            deterministic_shuffle(order, rng);
            for (size_t i = 0; i < n; ++i) work[i][f] = X_test.rows[order[i]][f];
            total += rmse(y_test, model.predict_rows(work)) - baseline;
        }
        for (size_t i = 0; i < n; ++i) work[i][f] = X_test.rows[i][f];
        importance[f] = total / repeats;
    }
    return importance;
}

}  // namespace mcqdiff
