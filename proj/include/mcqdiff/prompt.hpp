#pragma once

#include <string>
#include <vector>

#include "mcqdiff/dataset.hpp"
#include "mcqdiff/orderings.hpp"

namespace mcqdiff {

inline constexpr const char* kInstruction =
    "Below is a multiple-choice question. Choose the letter which best answers "
    "the question. Keep your response as brief as possible; just state the "
    "letter corresponding to your answer with no explanation.";

/// Letter shown at a position: 'A' for 0 ... 'J' for 9.
char choice_letter(int position);

/// The letters used by an n-choice item, in position order.
std::vector<char> choice_letters(int n_choices);

/// Byte-exact prompt: instruction, blank line, "Question:", stem, one
/// "<LETTER>. <choice>" line per choice in permuted order, blank line,
/// "Response:". No trailing newline.
std::string render_prompt(const MCQItem& item, const Ordering& ordering);

}  // namespace mcqdiff
