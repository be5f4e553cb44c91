#pragma once

#include "semprop/random.hpp"
#include "semprop/types.hpp"

#include <random>
#include <unordered_set>

namespace semprop {

struct FoldSplit {
    std::vector<ClassId> seen;
    std::vector<ClassId> unseen;
};

/// Partitions the classes into n_folds disjoint groups by a seeded
/// shuffle; fold i treats group i as unseen and the rest as seen. The
/// unseen groups cover every class exactly once. Within each fold the
/// original class order is preserved.
inline std::vector<FoldSplit> make_folds(const std::vector<ClassId>& class_ids, int n_folds,
                                         std::uint64_t seed) {
    if (n_folds < 2) throw Error("make_folds: need at least 2 folds, got " +
                                 std::to_string(n_folds));
    if (static_cast<std::size_t>(n_folds) > class_ids.size())
        throw Error("make_folds: " + std::to_string(n_folds) + " folds exceed the " +
                    std::to_string(class_ids.size()) + " classes");

    std::vector<std::size_t> order(class_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    detail::seeded_shuffle(order, rng);

    // Group sizes differ by at most one; the first (n mod folds) groups
    // take the extra class.
    std::vector<int> group_of(class_ids.size());
    const std::size_t base = class_ids.size() / static_cast<std::size_t>(n_folds);
    const std::size_t extra = class_ids.size() % static_cast<std::size_t>(n_folds);
    std::size_t cursor = 0;
    for (int g = 0; g < n_folds; ++g) {
        const std::size_t size = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k) group_of[order[cursor++]] = g;
    }

    std::vector<FoldSplit> folds(static_cast<std::size_t>(n_folds));
    for (std::size_t i = 0; i < class_ids.size(); ++i)
        for (int g = 0; g < n_folds; ++g) {
            auto& fold = folds[static_cast<std::size_t>(g)];
            if (group_of[i] == g)
                fold.unseen.push_back(class_ids[i]);
            else
                fold.seen.push_back(class_ids[i]);
        }
    return folds;
}

}  // namespace semprop
