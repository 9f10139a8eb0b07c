#pragma once

#include <span>

#include "mcqdiff/dataset.hpp"
#include "mcqdiff/embedding_client.hpp"

namespace mcqdiff {

/// Throws ValidationError on a zero-norm vector (degenerate endpoint).
double cosine(std::span<const double> a, std::span<const double> b);

/// Mean cosine similarity between each distractor and the correct choice.
double choice_similarity(const MCQItem& item, EmbeddingClient& client);

}  // namespace mcqdiff
