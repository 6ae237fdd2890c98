#include "gfstack/harness.hpp"

#include "gfstack/errors.hpp"
#include "gfstack/preprocess.hpp"
#include "gfstack/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace gfstack {

namespace {

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

double mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truths) {
    if (predictions.size() != truths.size()) {
        throw ValidationError("mse: length mismatch (" + std::to_string(predictions.size()) + " vs " +
                              std::to_string(truths.size()) + ")");
    }
    if (truths.size() == 0) throw ValidationError("mse: empty input");
    return (predictions - truths).squaredNorm() / static_cast<double>(truths.size());
}

double baseline_mse(const Eigen::VectorXd& targets) {
    if (targets.size() == 0) throw ValidationError("baseline: empty targets");
    return mse(Eigen::VectorXd::Constant(targets.size(), targets.mean()), targets);
}

DatasetStats dataset_stats(const Eigen::VectorXd& targets) {
    if (targets.size() < 2) throw ValidationError("dataset statistics need at least 2 values");
    const double mean = targets.mean();
    const double var = (targets.array() - mean).square().sum() / static_cast<double>(targets.size());
    return {mean, std::sqrt(var)};
}

CvReport assemble_cv_report(const Eigen::VectorXd& targets, const FoldPlan& plan,
                            const std::vector<SplitIndices>& splits,
                            const std::vector<Eigen::VectorXd>& fold_predictions) {
    CvReport report;
    report.baseline_mse = baseline_mse(targets);
    report.fold_assignments = plan.assignments;
    report.predictions.assign(static_cast<std::size_t>(targets.size()), 0.0);
    double total_sq = 0.0;
    for (std::size_t f = 0; f < splits.size(); ++f) {
        const auto& test = splits[f].test;
        const Eigen::VectorXd truth = take_rows(targets, test);
        const double fold_mse = mse(fold_predictions[f], truth);
        report.per_fold_mse.push_back(fold_mse);
        total_sq += fold_mse * static_cast<double>(test.size());
        const DatasetStats stats = test.size() >= 2 ? dataset_stats(truth) : DatasetStats{truth.mean(), 0.0};
        report.fold_stats.push_back({stats.mean, stats.std, test.size()});
        for (std::size_t i = 0; i < test.size(); ++i) {
            report.predictions[test[i]] = fold_predictions[f][static_cast<Eigen::Index>(i)];
        }
    }
    report.pooled_mse = total_sq / static_cast<double>(targets.size());
    return report;
}

CvReport run_cv_experiment(const FeatureTable& table, const StackNetConfig& config,
                           const CvExperimentOptions& options) {
    config.validate();
    const Eigen::VectorXd& y = table.require_target();
    const auto n = static_cast<std::size_t>(y.size());
    if (options.k_folds < 2 || n < 2 * options.k_folds) {
        throw ValidationError("cross-validation with " + std::to_string(options.k_folds) +
                              " folds needs at least " + std::to_string(2 * options.k_folds) + " rows, got " +
                              std::to_string(n));
    }

    const SeededRng rng(options.seed);
    const FoldPlan plan = make_balanced_folds(y, options.k_folds, rng.child(0));

    std::optional<FittedPipeline> shared;
    std::optional<Eigen::MatrixXd> shared_features;
    if (options.paper_protocol) {
        shared = fit_pipeline(table.values, y, options.select_k, options.variance_threshold);
        shared_features = transform(*shared, table.values);
    }

    std::vector<const EstimatorSpec*> members;
    for (const auto& layer : config.layers) {
        for (const auto& spec : layer) members.push_back(&spec);
    }
    std::vector<std::vector<Eigen::VectorXd>> member_predictions(members.size());

    std::vector<SplitIndices> splits;
    std::vector<Eigen::VectorXd> fold_predictions;
    std::vector<std::string> pipeline_digests;
    for (std::size_t f = 0; f < options.k_folds; ++f) {
        auto split = split_indices(plan, f);
        const Eigen::VectorXd y_train = take_rows(y, split.train);
        Eigen::MatrixXd x_train;
        Eigen::MatrixXd x_test;
        if (shared) {
            x_train = take_rows(*shared_features, split.train);
            x_test = take_rows(*shared_features, split.test);
            pipeline_digests.push_back(digest(to_json(*shared).dump()));
        } else {
            const Eigen::MatrixXd raw_train = take_rows(table.values, split.train);
            const FittedPipeline pipeline =
                fit_pipeline(raw_train, y_train, options.select_k, options.variance_threshold);
            x_train = transform(pipeline, raw_train);
            x_test = transform(pipeline, take_rows(table.values, split.test));
            pipeline_digests.push_back(digest(to_json(pipeline).dump()));
        }

        const SeededRng fold_rng = rng.child(1 + f);
        const TrainedStackNet net = fit_stacknet(config, x_train, y_train, fold_rng);
        fold_predictions.push_back(predict_stacknet(net, x_test));

        if (options.evaluate_constituents) {
            const SeededRng member_rng = fold_rng.child(kConstituentStream);
            for (std::size_t i = 0; i < members.size(); ++i) {
                const auto est = fit_estimator(*members[i], x_train, y_train, member_rng.child(i));
                member_predictions[i].push_back(predict(est, x_test));
            }
        }
        splits.push_back(std::move(split));
    }

    CvReport report = assemble_cv_report(y, plan, splits, fold_predictions);
    report.fold_pipeline_digests = std::move(pipeline_digests);
    report.paper_protocol = options.paper_protocol;
    for (std::size_t i = 0; i < member_predictions.size() && options.evaluate_constituents; ++i) {
        const CvReport single = assemble_cv_report(y, plan, splits, member_predictions[i]);
        report.constituents.push_back({members[i]->label(), single.per_fold_mse, single.pooled_mse});
    }

    std::ostringstream key;
    key << to_json(config).dump() << "|folds=" << options.k_folds << "|select_k=" << options.select_k
        << "|variance_threshold=" << format_double(options.variance_threshold) << "|seed=" << options.seed
        << "|paper_protocol=" << options.paper_protocol;
    report.config_digest = digest(key.str());
    return report;
}

std::string format_cv_table(const CvReport& report) {
    std::vector<std::pair<std::string, double>> rows;
    rows.emplace_back("Baseline", report.baseline_mse);
    for (const auto& c : report.constituents) rows.emplace_back(c.label, c.pooled_mse);
    rows.emplace_back("StackNet", report.pooled_mse);

    std::size_t width = 5;
    for (const auto& [label, _] : rows) width = std::max(width, label.size());
    std::ostringstream out;
    const std::string rule(width + 11, '-');
    out << rule << '\n' << pad_right("Model", width) << "   " << "MSE" << '\n' << rule << '\n';
    for (const auto& [label, value] : rows) out << pad_right(label, width) << "   " << fixed2(value) << '\n';
    out << rule << '\n';
    return out.str();
}

std::string format_fold_table(const CvReport& report) {
    std::ostringstream out;
    out << "fold   n     mean      std       MSE\n";
    for (std::size_t f = 0; f < report.per_fold_mse.size(); ++f) {
        char line[128];
        std::snprintf(line, sizeof line, "%4zu %5zu %8.3f %8.3f %9.3f\n", f, report.fold_stats[f].test_size,
                      report.fold_stats[f].target_mean, report.fold_stats[f].target_std, report.per_fold_mse[f]);
        out << line;
    }
    return out.str();
}

}  // namespace gfstack
