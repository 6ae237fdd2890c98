#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gfstack {

struct FoldStat {
    double target_mean = 0.0;  // held-out targets, population statistics
    double target_std = 0.0;
    std::size_t test_size = 0;
};

struct ModelScore {
    std::string label;
    std::vector<double> per_fold_mse;
    double pooled_mse = 0.0;
};

/// Result of a k-fold cross-validation run.
struct CvReport {
    std::vector<double> per_fold_mse;
    double pooled_mse = 0.0;                  // mean squared error over all held-out samples
    std::vector<FoldStat> fold_stats;
    double baseline_mse = 0.0;                // constant-mean predictor on all targets
    std::string config_digest;
    std::vector<std::string> fold_pipeline_digests;  // one per fold when preprocessing is fitted
    std::vector<ModelScore> constituents;     // optional single-model scores on the same folds
    std::vector<double> predictions;          // held-out prediction for every sample
    std::vector<std::size_t> fold_assignments;
    bool paper_protocol = false;
};

}  // namespace gfstack
