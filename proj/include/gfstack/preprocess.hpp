#pragma once

#include "gfstack/table.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace gfstack {

/// Per-column z-scoring. Population statistics (divisor n).
struct StandardizerState {
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;  // 0 marks a degenerate (constant) column

    std::vector<std::size_t> degenerate_columns() const;
};

/// Principal axes of the standardized data (covariance divisor n - 1).
struct PcaState {
    Eigen::VectorXd center;       // p
    Eigen::MatrixXd components;   // p x r, orthonormal columns
    Eigen::VectorXd eigenvalues;  // r, descending
    bool rank_fallback = false;   // Minka selection found no admissible rank

    Eigen::Index input_dim() const { return center.size(); }
    Eigen::Index rank() const { return components.cols(); }
};

struct SelectorState {
    std::vector<bool> variance_mask;     // per PCA component
    Eigen::VectorXd f_values;            // per PCA component
    std::vector<std::size_t> selected;   // ascending component indices
};

struct FittedPipeline {
    StandardizerState standardizer;
    PcaState pca;
    SelectorState selector;
    std::size_t k = 24;
    double variance_threshold = 1e-8;

    /// Dimensionality chain p -> r -> surviving -> k.
    struct Chain {
        std::size_t features, components, surviving, selected;
    };
    Chain chain() const;
};

struct RankSelection {
    std::size_t rank = 1;
    bool fallback = false;  // every candidate was skipped
    std::vector<double> log_evidence;  // per candidate k = 1..q-1; -inf when skipped
};

StandardizerState fit_standardizer(const Eigen::MatrixXd& values);
Eigen::MatrixXd apply_standardizer(const StandardizerState& state, const Eigen::MatrixXd& values);

/// Laplace-approximate log evidence of a probabilistic PCA model of each rank
/// k in [1, q-1]; returns the arg max. Candidates with a non-positive retained
/// eigenvalue, a non-positive residual noise variance, or a non-finite evidence
/// are skipped.
RankSelection minka_rank(const Eigen::VectorXd& spectrum, std::size_t n_samples);

/// Log evidence for a single rank; -inf when the candidate is inadmissible.
double minka_log_evidence(const Eigen::VectorXd& spectrum, std::size_t rank, std::size_t n_samples);

/// Full eigen-spectrum and axes of the sample covariance (via SVD of the
/// centred data), without truncation. Sign convention: the largest-magnitude
/// entry of every axis is positive.
struct Spectrum {
    Eigen::VectorXd center;
    Eigen::MatrixXd axes;         // p x q
    Eigen::VectorXd eigenvalues;  // q = min(n, p)
};
Spectrum covariance_spectrum(const Eigen::MatrixXd& values);

PcaState fit_pca(const Eigen::MatrixXd& values);
Eigen::MatrixXd apply_pca(const PcaState& state, const Eigen::MatrixXd& values);

/// mask[j] = population variance of column j > threshold.
std::vector<bool> fit_variance_mask(const Eigen::MatrixXd& scores, double threshold = 1e-8);

/// Univariate regression F statistic per column:
/// F = r^2 / (1 - r^2) * (n - 2), r the Pearson correlation with `targets`.
/// Constant columns score 0; |r| = 1 maps to the largest finite double.
Eigen::VectorXd f_regression(const Eigen::MatrixXd& scores, const Eigen::VectorXd& targets);

/// The k masked-in components with the largest F (ties to the lower index),
/// returned in ascending index order.
SelectorState select_top_k(const Eigen::VectorXd& f_values, const std::vector<bool>& mask, std::size_t k);

FittedPipeline fit_pipeline(const FeatureTable& table, std::size_t k = 24, double variance_threshold = 1e-8);
FittedPipeline fit_pipeline(const Eigen::MatrixXd& values, const Eigen::VectorXd& targets, std::size_t k = 24,
                            double variance_threshold = 1e-8);

/// Replays the frozen pipeline: standardize, project, keep selected columns.
Eigen::MatrixXd transform(const FittedPipeline& pipeline, const Eigen::MatrixXd& values);

}  // namespace gfstack
