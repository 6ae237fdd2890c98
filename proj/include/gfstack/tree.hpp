#pragma once

#include "gfstack/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace gfstack {

enum class ThresholdMode {
    best,    // exhaustive scan of midpoints between sorted distinct values
    random,  // one uniform draw in [min, max) per candidate feature
};

struct TreeParams {
    int max_depth = 3;
    int min_samples_leaf = 1;
    int max_features = 0;  // features tried per split; 0 = all
    ThresholdMode mode = ThresholdMode::best;
};

/// Internal nodes route x[feature] <= threshold to the left child.
struct TreeNode {
    std::int32_t feature = -1;  // -1 for leaves
    double threshold = 0.0;
    double value = 0.0;         // mean target of the node's training samples
    std::int32_t left = -1;
    std::int32_t right = -1;

    bool is_leaf() const { return feature < 0; }
};

/// Binary regression tree stored in preorder (node 0 is the root; a left
/// child always directly follows its parent).
struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
    int depth() const;
    std::size_t leaf_count() const;
};

/// Grows a variance-reduction CART on the rows listed in `samples` (duplicates
/// allowed, as produced by bootstrapping). An empty list means every row once.
///
/// A node becomes a leaf when it reaches max_depth, holds fewer than
/// 2 * min_samples_leaf samples, is pure, or admits no split leaving at least
/// min_samples_leaf samples on both sides. Among candidate splits the lowest
/// weighted child variance wins; ties go to the lowest feature index, then to
/// the smallest threshold.
RegressionTree fit_cart(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params,
                        SeededRng& rng, const std::vector<std::size_t>& samples = {});

/// Chooses the training rows of one ensemble member.
using RowSampler = std::function<std::vector<std::size_t>(std::size_t n_rows, SeededRng& rng)>;

/// n draws with replacement.
RowSampler bootstrap_sampler();
/// Every row exactly once (no resampling).
RowSampler all_rows_sampler();

/// Trains n_trees trees; tree t draws its rows and its splits from
/// rng.child(t), so the result does not depend on the thread count.
std::vector<RegressionTree> fit_tree_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                              const TreeParams& params, int n_trees, const RowSampler& sampler,
                                              const SeededRng& rng);

}  // namespace gfstack
