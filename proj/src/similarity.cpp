#include "mcqdiff/similarity.hpp"

#include <cmath>

#include "mcqdiff/errors.hpp"

namespace mcqdiff {

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ValidationError("cosine: vector dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0)
        throw ValidationError("cosine: zero-norm embedding (degenerate endpoint)");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double choice_similarity(const MCQItem& item, EmbeddingClient& client) {
    if (item.n_choices() < 2)
        throw ValidationError("item '" + item.id + "' has no distractors");
    const auto answer = client.fetch(item.correct_choice());
    double sum = 0.0;
    size_t n = 0;
    for (int c = 0; c < item.n_choices(); ++c) {
        if (c == item.correct_index) continue;
        const auto d = client.fetch(item.choices[static_cast<size_t>(c)]);
        sum += cosine(d, answer);
        ++n;
    }
    return sum / static_cast<double>(n);
}

}  // namespace mcqdiff
