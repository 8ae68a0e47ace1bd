#ifndef SURPLUS_FOLDS_HPP
#define SURPLUS_FOLDS_HPP

#include <cstdint>
#include <vector>

#include "surplus/common.hpp"

namespace surplus {

// Balanced random K-fold partition; fold sizes differ by at most one and the
// assignment is deterministic per seed.
struct FoldAssignment {
    int n = 0;
    int k = 2;
    uint64_t seed = 0;
    std::vector<int> fold;  // fold index per observation

    std::vector<int> rows_in(int fold_id) const;
    std::vector<int> rows_excluding(int fold_id) const;
};

FoldAssignment make_folds(int n, int k, uint64_t seed);

}  // namespace surplus

#endif
