#pragma once

#include "gfstack/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace gfstack {

/// Assignment of n samples to k folds.
struct FoldPlan {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;  // length n, values in [0, k)

    std::size_t size() const { return assignments.size(); }
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Target-balanced folds: samples are sorted by target and dealt out in
/// consecutive groups of k, each group in a freshly shuffled fold order. Every
/// fold therefore receives one sample from each target stratum, which keeps
/// per-fold target mean and spread close to the global values.
FoldPlan make_balanced_folds(const Eigen::VectorXd& targets, std::size_t k, SeededRng rng);

/// Test rows are those assigned to `fold`; train rows are all others. Both
/// lists are in ascending index order.
SplitIndices split_indices(const FoldPlan& plan, std::size_t fold);

}  // namespace gfstack
