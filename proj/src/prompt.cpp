#include "mcqdiff/prompt.hpp"

#include <algorithm>
#include <set>

#include "mcqdiff/errors.hpp"

namespace mcqdiff {

char choice_letter(int position) {
    if (position < 0 || position > 9)
        throw ValidationError("choice position out of range: " + std::to_string(position));
    return static_cast<char>('A' + position);
}

std::vector<char> choice_letters(int n_choices) {
    std::vector<char> out;
    out.reserve(static_cast<size_t>(n_choices));
    for (int i = 0; i < n_choices; ++i) out.push_back(choice_letter(i));
    return out;
}

std::string render_prompt(const MCQItem& item, const Ordering& ordering) {
    const auto& perm = ordering.permutation;
    if (static_cast<int>(perm.size()) != item.n_choices())
        throw ValidationError("ordering size mismatch for item '" + item.id + "'");
    std::set<int> seen(perm.begin(), perm.end());
    if (static_cast<int>(seen.size()) != item.n_choices() || *seen.begin() != 0 ||
        *seen.rbegin() != item.n_choices() - 1)
        throw ValidationError("ordering is not a permutation for item '" + item.id + "'");

    std::string out = kInstruction;
    out += "\n\nQuestion:\n";
    out += item.stem;
    out += '\n';
    for (size_t pos = 0; pos < perm.size(); ++pos) {
        out += choice_letter(static_cast<int>(pos));
        out += ". ";
        out += item.choices[static_cast<size_t>(perm[pos])];
        out += '\n';
    }
    out += "\nResponse:";
    return out;
}

}  // namespace mcqdiff
