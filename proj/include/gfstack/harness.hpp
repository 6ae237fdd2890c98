#pragma once

#include "gfstack/folds.hpp"
#include "gfstack/report.hpp"
#include "gfstack/stacknet.hpp"
#include "gfstack/table.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace gfstack {

double mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths);

/// MSE of always predicting mean(targets), i.e. the population variance.
double baseline_mse(const Eigen::VectorXd& targets);

struct DatasetStats {
    double mean = 0.0;
    double std = 0.0;  // population
};
DatasetStats dataset_stats(const Eigen::VectorXd& targets);

/// Builds per-fold MSEs, pooled MSE, fold target statistics and the baseline
/// from held-out predictions (fold_predictions[f] aligns with splits[f].test).
CvReport assemble_cv_report(const Eigen::VectorXd& targets, const FoldPlan& plan,
                            const std::vector<SplitIndices>& splits,
                            const std::vector<Eigen::VectorXd>& fold_predictions);

struct CvExperimentOptions {
    std::size_t k_folds = 10;
    std::size_t select_k = 24;
    double variance_threshold = 1e-8;
    std::uint64_t seed = 0;
    /// Fit preprocessing once on all rows before splitting (leaks selection
    /// statistics into the held-out folds). Off by default.
    bool paper_protocol = false;
    /// Also score every StackNet member as a stand-alone model on the same folds.
    bool evaluate_constituents = false;
};

/// Full protocol: balanced folds on the target; inside each fold the feature
/// pipeline is fitted on the training rows only, both splits are transformed,
/// the StackNet is trained and the held-out rows are scored.
///
/// Streams: fold plan SeededRng(seed).child(0); fold f uses child(1 + f) for the
/// StackNet and child(1 + f).child(kConstituentStream).child(i) for the i-th
/// stand-alone model.
CvReport run_cv_experiment(const FeatureTable& table, const StackNetConfig& config,
                           const CvExperimentOptions& options);

/// Plain-text table in the layout "Model | MSE": baseline, stand-alone
/// models (when present), StackNet.
std::string format_cv_table(const CvReport& report);

/// Per-fold listing: size, target mean/std, MSE.
std::string format_fold_table(const CvReport& report);

}  // namespace gfstack
