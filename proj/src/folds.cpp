#include "surplus/folds.hpp"

#include <numeric>
#include <stdexcept>

namespace surplus {

FoldAssignment make_folds(int n, int k, uint64_t seed) {
    if (k < 2) throw std::invalid_argument("make_folds: need K >= 2");
    if (k > n) throw std::invalid_argument("make_folds: K cannot exceed n");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    // Fisher-Yates with our own uniform ints; std::shuffle sequences are
    // implementation-defined
    for (int i = n - 1; i > 0; --i) {
        const int j = rng.uniform_int(i + 1);
        std::swap(order[i], order[j]);
    }

    FoldAssignment fa;
    fa.n = n;
    fa.k = k;
    fa.seed = seed;
    fa.fold.resize(n);
    for (int pos = 0; pos < n; ++pos) fa.fold[order[pos]] = pos % k;
    return fa;
}

std::vector<int> FoldAssignment::rows_in(int fold_id) const {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i)
        if (fold[i] == fold_id) rows.push_back(i);
    return rows;
}

std::vector<int> FoldAssignment::rows_excluding(int fold_id) const {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i)
        if (fold[i] != fold_id) rows.push_back(i);
    return rows;
}

}  // namespace surplus
