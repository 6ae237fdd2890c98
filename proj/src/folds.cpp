#include "gfstack/folds.hpp"

#include "gfstack/errors.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace gfstack {

FoldPlan make_balanced_folds(const Eigen::VectorXd& targets, std::size_t k, SeededRng rng) {
    const auto n = static_cast<std::size_t>(targets.size());
    if (k < 2) throw ValidationError("fold count must be at least 2, got " + std::to_string(k));
    if (k > n) {
        throw ValidationError("fold count " + std::to_string(k) + " exceeds sample count " + std::to_string(n));
    }
    if (!targets.allFinite()) throw ValidationError("fold targets must be finite");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return targets[a] < targets[b]; });

    FoldPlan plan;
    plan.k = k;
    plan.assignments.assign(n, 0);
    std::vector<std::size_t> slots(k);
    for (std::size_t start = 0; start < n; start += k) {
        std::iota(slots.begin(), slots.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(slots));
        const std::size_t end = std::min(n, start + k);
        for (std::size_t i = start; i < end; ++i) plan.assignments[order[i]] = slots[i - start];
    }
    return plan;
}

SplitIndices split_indices(const FoldPlan& plan, std::size_t fold) {
    if (fold >= plan.k) {
        throw ValidationError("fold " + std::to_string(fold) + " out of range for " + std::to_string(plan.k) +
                              "-fold plan");
    }
    SplitIndices out;
    for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
        (plan.assignments[i] == fold ? out.test : out.train).push_back(i);
    }
    return out;
}

}  // namespace gfstack
