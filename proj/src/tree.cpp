#include "gfstack/tree.hpp"

#include "gfstack/errors.hpp"
#include "gfstack/parallel.hpp"

#include <algorithm>
#include <numeric>

namespace gfstack {

double RegressionTree::predict_row(const Eigen::MatrixXd& x, Eigen::Index row) const {
    std::int32_t node = 0;
    while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = x(row, n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = predict_row(x, i);
    return out;
}

int RegressionTree::depth() const {
    if (nodes.empty()) return 0;
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes[i].is_leaf()) {
            level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

// Presorted growth: every feature keeps the node's sample slots sorted by that
// feature in one contiguous range, so split search and partitioning are linear
// in the node size.
class TreeGrower {
public:
    TreeGrower(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params, SeededRng& rng,
               const std::vector<std::size_t>& samples)
        : x_(x), params_(params), rng_(rng), rows_(samples), d_(static_cast<std::size_t>(x.cols())) {
        if (rows_.empty()) {
            rows_.resize(static_cast<std::size_t>(x.rows()));
            std::iota(rows_.begin(), rows_.end(), std::size_t{0});
        }
        m_ = rows_.size();
        yv_.resize(m_);
        for (std::size_t s = 0; s < m_; ++s) yv_[s] = y[static_cast<Eigen::Index>(rows_[s])];

        sorted_.resize(d_ * m_);
        for (std::size_t f = 0; f < d_; ++f) {
            auto* order = sorted_.data() + f * m_;
            std::iota(order, order + m_, std::uint32_t{0});
            const auto col = static_cast<Eigen::Index>(f);
            std::stable_sort(order, order + m_, [&](std::uint32_t a, std::uint32_t b) {
                return x_(static_cast<Eigen::Index>(rows_[a]), col) < x_(static_cast<Eigen::Index>(rows_[b]), col);
            });
        }
        goes_left_.assign(m_, 0);
        scratch_.resize(m_);
        features_.resize(d_);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    RegressionTree grow() {
        RegressionTree tree;
        if (m_ == 0) {
            tree.nodes.push_back(TreeNode{});
            return tree;
        }
        build(tree, 0, m_, 0);
        return tree;
    }

private:
    struct Split {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double score = 0.0;  // sum_left^2/n_left + sum_right^2/n_right, larger is better
    };

    double value_at(std::size_t f, std::size_t pos) const {
        return x_(static_cast<Eigen::Index>(rows_[sorted_[f * m_ + pos]]), static_cast<Eigen::Index>(f));
    }

    std::int32_t build(RegressionTree& tree, std::size_t begin, std::size_t end, int depth) {
        const std::size_t count = end - begin;
        double sum = 0.0;
        bool pure = true;
        const double first = yv_[sorted_[begin]];
        for (std::size_t pos = begin; pos < end; ++pos) {
            const double v = yv_[sorted_[pos]];
            sum += v;
            pure = pure && v == first;
        }

        const auto index = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes.back().value = sum / static_cast<double>(count);

        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        if (depth >= params_.max_depth || count < 2 * min_leaf || pure || d_ == 0) return index;

        const Split split = find_split(begin, end, sum);
        if (!split.found) return index;

        // Left side is a prefix of the chosen feature's sorted range.
        std::size_t mid = begin;
        for (std::size_t pos = begin; pos < end; ++pos) {
            const bool left = value_at(split.feature, pos) <= split.threshold;
            goes_left_[sorted_[split.feature * m_ + pos]] = left ? 1 : 0;
            mid += left ? 1 : 0;
        }
        for (std::size_t f = 0; f < d_; ++f) partition(f, begin, end);

        tree.nodes[static_cast<std::size_t>(index)].feature = static_cast<std::int32_t>(split.feature);
        tree.nodes[static_cast<std::size_t>(index)].threshold = split.threshold;
        const std::int32_t left = build(tree, begin, mid, depth + 1);
        const std::int32_t right = build(tree, mid, end, depth + 1);
        tree.nodes[static_cast<std::size_t>(index)].left = left;
        tree.nodes[static_cast<std::size_t>(index)].right = right;
        return index;
    }

    void partition(std::size_t f, std::size_t begin, std::size_t end) {
        auto* order = sorted_.data() + f * m_;
        std::size_t write = begin;
        std::size_t spill = 0;
        for (std::size_t pos = begin; pos < end; ++pos) {
            const std::uint32_t s = order[pos];
            if (goes_left_[s]) {
                order[write++] = s;
            } else {
                scratch_[spill++] = s;
            }
        }
        std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(spill), order + write);
    }

    std::vector<std::size_t> candidate_features() {
        const auto k = static_cast<std::size_t>(params_.max_features);
        if (k == 0 || k >= d_) return features_;
        std::vector<std::size_t> pool = features_;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng_.below(d_ - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    Split find_split(std::size_t begin, std::size_t end, double total) {
        const std::size_t count = end - begin;
        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        Split best;
        for (const std::size_t f : candidate_features()) {
            const auto* order = sorted_.data() + f * m_;
            const double lo = value_at(f, begin);
            const double hi = value_at(f, end - 1);
            if (!(lo < hi)) continue;

            if (params_.mode == ThresholdMode::best) {
                double left_sum = 0.0;
                for (std::size_t pos = begin; pos + 1 < end; ++pos) {
                    left_sum += yv_[order[pos]];
                    const double a = value_at(f, pos);
                    const double b = value_at(f, pos + 1);
                    if (!(a < b)) continue;
                    const std::size_t n_left = pos - begin + 1;
                    const std::size_t n_right = count - n_left;
                    if (n_left < min_leaf || n_right < min_leaf) continue;
                    const double right_sum = total - left_sum;
                    const double score = left_sum * left_sum / static_cast<double>(n_left) +
                                         right_sum * right_sum / static_cast<double>(n_right);
                    if (!best.found || score > best.score) {
                        double threshold = std::midpoint(a, b);
                        if (!(threshold < b)) threshold = a;
                        best = {true, f, threshold, score};
                    }
                }
            } else {
                double threshold = rng_.uniform(lo, hi);
                if (!(threshold < hi)) threshold = lo;
                double left_sum = 0.0;
                std::size_t n_left = 0;
                for (std::size_t pos = begin; pos < end && value_at(f, pos) <= threshold; ++pos) {
                    left_sum += yv_[order[pos]];
                    ++n_left;
                }
                const std::size_t n_right = count - n_left;
                if (n_left < min_leaf || n_right < min_leaf) continue;
                const double right_sum = total - left_sum;
                const double score = left_sum * left_sum / static_cast<double>(n_left) +
                                     right_sum * right_sum / static_cast<double>(n_right);
                if (!best.found || score > best.score) best = {true, f, threshold, score};
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const TreeParams& params_;
    SeededRng& rng_;
    std::vector<std::size_t> rows_;
    std::size_t d_;
    std::size_t m_ = 0;
    std::vector<double> yv_;
    std::vector<std::uint32_t> sorted_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> scratch_;
    std::vector<std::size_t> features_;
};

}  // namespace

RegressionTree fit_cart(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TreeParams& params,
                        SeededRng& rng, const std::vector<std::size_t>& samples) {
    if (x.rows() != y.size()) throw ValidationError("tree: target length does not match rows");
    if (x.rows() == 0) throw ValidationError("tree: no training rows");
    if (params.max_depth < 1) throw ValidationError("max_depth must be >= 1");
    if (params.min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
    if (params.max_features < 0) throw ValidationError("max_features must be >= 0");
    for (const auto r : samples) {
        if (r >= static_cast<std::size_t>(x.rows())) throw ValidationError("tree: sample index out of range");
    }
    return TreeGrower(x, y, params, rng, samples).grow();
}

RowSampler bootstrap_sampler() {
    return [](std::size_t n_rows, SeededRng& rng) {
        std::vector<std::size_t> rows(n_rows);
        for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n_rows));
        return rows;
    };
}

RowSampler all_rows_sampler() {
    return [](std::size_t n_rows, SeededRng&) {
        std::vector<std::size_t> rows(n_rows);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        return rows;
    };
}

std::vector<RegressionTree> fit_tree_ensemble(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                              const TreeParams& params, int n_trees, const RowSampler& sampler,
                                              const SeededRng& rng) {
    if (n_trees < 1) throw ValidationError("n_estimators must be >= 1");
    std::vector<RegressionTree> trees(static_cast<std::size_t>(n_trees));
    parallel_for(trees.size(), [&](std::size_t t) {
        SeededRng tree_rng = rng.child(t);
        const auto rows = sampler(static_cast<std::size_t>(x.rows()), tree_rng);
        trees[t] = fit_cart(x, y, params, tree_rng, rows);
    });
    return trees;
}

}  // namespace gfstack
