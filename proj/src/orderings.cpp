#include "mcqdiff/orderings.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

namespace mcqdiff {

namespace {

int64_t factorial(int n) {
    int64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

}  // namespace

int expected_ordering_count(int n_choices, int count) {
    return static_cast<int>(std::min<int64_t>(count, factorial(n_choices)));
}

std::vector<std::vector<int>> generate_orderings(int n_choices, int count, uint64_t seed) {
    if (n_choices < 2 || n_choices > 10)
        throw ValidationError("orderings need 2-10 choices, got " + std::to_string(n_choices));
    if (count < 1) throw ValidationError("ordering count must be positive");

    std::vector<int> identity(static_cast<size_t>(n_choices));
    std::iota(identity.begin(), identity.end(), 0);

    if (factorial(n_choices) <= count) {
        std::vector<std::vector<int>> all;
        std::vector<int> perm = identity;
        do {
            all.push_back(perm);
        } while (std::next_permutation(perm.begin(), perm.end()));
        return all;
    }

    std::mt19937_64 rng(seed);
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> out;
    while (static_cast<int>(out.size()) < count) {
        std::vector<int> perm = identity;
        deterministic_shuffle(perm, rng);
        if (seen.insert(perm).second) out.push_back(perm);
    }
    return out;
}

uint64_t ordering_seed(uint64_t seed, const std::string& item_id) {
    return mix64(seed ^ fnv1a64(item_id));
}

std::vector<Ordering> orderings_for_item(const MCQItem& item, uint64_t seed, int count) {
    auto perms = generate_orderings(item.n_choices(), count, ordering_seed(seed, item.id));
    std::vector<Ordering> out;
    out.reserve(perms.size());
    for (auto& p : perms) out.push_back(Ordering{item.id, std::move(p)});
    return out;
}

}  // namespace mcqdiff
