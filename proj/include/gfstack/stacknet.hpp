#pragma once

#include "gfstack/folds.hpp"
#include "gfstack/learners.hpp"
#include "gfstack/report.hpp"
#include "gfstack/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace gfstack {

struct StackNetConfig {
    std::vector<std::vector<EstimatorSpec>> layers;
    bool restack = true;         // layer input = original features + all earlier predictions
    std::size_t oof_folds = 5;   // folds used to build out-of-fold meta-features
    std::uint64_t seed = 0;

    void validate() const;
    /// Non-fatal remarks, e.g. a final layer with several models (its outputs get averaged).
    std::vector<std::string> warnings() const;
    std::size_t model_count() const;
};

/// Three layers, eleven models:
///   1: BayesianRidge, RF(1000,7), RF(1000,9), RF(800,11), ET(1800,9), ET(2200,11), GB(40,3)
///   2: KernelRidge(alpha=512), RF(800,13), ET(3200,15)
///   3: Ridge(alpha=512)
StackNetConfig default_config();

/// Multiplies the tree count of every averaging ensemble (random forest,
/// extra trees) by `factor`, rounded, at least 1. Boosting stage counts are
/// left alone: they set the model's capacity rather than its Monte Carlo noise.
StackNetConfig scale_estimators(StackNetConfig config, double factor);

struct TrainedStackNet {
    StackNetConfig config;
    std::vector<std::vector<FittedEstimator>> fitted_layers;  // refit on the full accumulated input
    Eigen::Index input_width = 0;
};

/// One out-of-fold fit: the model saw `train_rows` and produced the meta-feature
/// for `predicted_rows`.
struct OofRecord {
    std::size_t layer = 0;
    std::size_t model = 0;
    std::size_t fold = 0;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> predicted_rows;
};

/// Optional bookkeeping filled by fit_stacknet for leakage audits.
struct StackAudit {
    std::vector<FoldPlan> layer_plans;
    std::vector<OofRecord> records;
    std::vector<Eigen::MatrixXd> meta_features;  // per layer, n x |layer|
};

/// Width of the input seen by layer `layer` (0-based).
Eigen::Index layer_input_width(const StackNetConfig& config, Eigen::Index input_width, std::size_t layer);

/// Layer-wise stacked generalisation. Every model targets y. For layer l the
/// fold plan comes from rng.child(l).child(0); model m fitted on OOF fold f
/// uses rng.child(l).child(1 + seed_stream).child(f), and its full-data refit
/// uses fold slot oof_folds.
TrainedStackNet fit_stacknet(const StackNetConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const SeededRng& rng, StackAudit* audit = nullptr);

Eigen::VectorXd predict_stacknet(const TrainedStackNet& model, const Eigen::MatrixXd& x);

/// k-fold CV of the whole StackNet on already-preprocessed features. Fold plan
/// from rng.child(0); fold f trains with rng.child(1 + f).
CvReport stacknet_cv(const StackNetConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::size_t k_folds, const SeededRng& rng);

/// Scores every member of `config` as a stand-alone model on the same folds
/// stacknet_cv would use (rng.child(0)); member i of fold f trains with
/// rng.child(1 + f).child(kConstituentStream).child(i).
std::vector<ModelScore> constituent_cv(const StackNetConfig& config, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y, std::size_t k_folds, const SeededRng& rng);

inline constexpr std::uint64_t kConstituentStream = 0xC0FFEE;

/// Rows of `m` in the given order.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows);
Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows);

}  // namespace gfstack
