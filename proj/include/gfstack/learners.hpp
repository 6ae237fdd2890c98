#pragma once

#include "gfstack/rng.hpp"
#include "gfstack/tree.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace gfstack {

enum class EstimatorKind { ridge, bayesian_ridge, kernel_ridge, random_forest, extra_trees, gradient_boosting };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(const std::string& name);

struct Hyperparams {
    double alpha = 1.0;            // ridge, kernel ridge
    int n_estimators = 100;        // ensembles
    int max_depth = 3;             // ensembles
    double learning_rate = 0.1;    // gradient boosting
    int min_samples_leaf = 1;      // ensembles
    int max_features = 0;          // ensembles; 0 = all features per split
    int max_iter = 300;            // bayesian ridge
    double tol = 1e-3;             // bayesian ridge
    std::string kernel = "linear"; // kernel ridge: linear | rbf
    double gamma = 0.0;            // rbf width; 0 = 1 / n_features
};

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::ridge;
    Hyperparams hp;
    std::uint64_t seed_stream = 0;

    /// Throws ValidationError on out-of-range hyperparameters.
    void validate() const;
    /// Display name in the style "RandomForestRegressor(n_estimators=1000, max_depth=7)".
    std::string label() const;
};

struct LinearParams {
    Eigen::VectorXd weights;
    double intercept = 0.0;
    // Evidence-maximisation state; zero for plain ridge.
    double noise_precision = 0.0;
    double weight_precision = 0.0;
    int iterations = 0;
};

struct KernelParams {
    Eigen::VectorXd dual;     // (K + alpha I)^-1 y
    Eigen::MatrixXd support;  // training inputs
    std::string kernel = "linear";
    double gamma = 0.0;
};

struct ForestParams {
    std::vector<RegressionTree> trees;
};

struct BoostingParams {
    double initial = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> stages;
};

struct FittedEstimator {
    EstimatorSpec spec;
    std::variant<LinearParams, KernelParams, ForestParams, BoostingParams> params;
    Eigen::Index train_rows = 0;
    Eigen::Index train_cols = 0;
};

/// Ridge with an unpenalised intercept: solves (Xc'Xc + alpha I) w = Xc'yc on
/// column-centred data.
FittedEstimator fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha);

/// Evidence-maximising Bayesian ridge (noise precision a, weight precision b,
/// Gamma(1e-6, 1e-6) hyperpriors). Centres like ridge.
FittedEstimator fit_bayesian_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_iter = 300,
                                   double tol = 1e-3);

/// Kernel ridge in dual form, no intercept: c = (K + alpha I)^-1 y.
FittedEstimator fit_kernel_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                                 const std::string& kernel = "linear", double gamma = 0.0);

/// Bootstrap-aggregated best-split trees; tree t uses rng.child(t).
FittedEstimator fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                  int max_depth, const SeededRng& rng, int min_samples_leaf = 1,
                                  int max_features = 0);

/// Extremely randomised trees: full sample per tree, random thresholds.
FittedEstimator fit_extra_trees(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                int max_depth, const SeededRng& rng, int min_samples_leaf = 1,
                                int max_features = 0);

/// Least-squares gradient boosting from the mean with shrinkage.
FittedEstimator fit_gradient_boosting(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                      int max_depth, double learning_rate = 0.1, int min_samples_leaf = 1);

/// Dispatches on spec.kind. Stochastic learners draw from `rng`.
FittedEstimator fit_estimator(const EstimatorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const SeededRng& rng);

Eigen::VectorXd predict(const FittedEstimator& est, const Eigen::MatrixXd& x);

/// Boosting prediction using only the first `stages` trees.
Eigen::VectorXd predict_staged(const FittedEstimator& est, const Eigen::MatrixXd& x, std::size_t stages);

/// Kernel matrix k(a_i, b_j) for the supported kernels.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const std::string& kernel,
                              double gamma);

}  // namespace gfstack
