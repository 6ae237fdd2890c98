#include "gfstack/errors.hpp"
#include "gfstack/harness.hpp"
#include "gfstack/stacknet.hpp"
#include "support/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace gfstack;

namespace {

StackNetConfig linear_config() {
    EstimatorSpec bayes;
    bayes.kind = EstimatorKind::bayesian_ridge;
    EstimatorSpec rf;
    rf.kind = EstimatorKind::random_forest;
    rf.hp.n_estimators = 10;
    rf.hp.max_depth = 3;
    rf.seed_stream = 2;
    EstimatorSpec ridge;
    ridge.kind = EstimatorKind::ridge;
    ridge.hp.alpha = 10.0;
    StackNetConfig c;
    c.layers = {{bayes, rf}, {ridge}};
    c.oof_folds = 3;
    return c;
}

}  // namespace

TEST_CASE("mse examples") {
    CHECK(mse(Eigen::Vector2d(1, 2), Eigen::Vector2d(1, 2)) == 0.0);
    CHECK(mse(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, -3)) == 9.0);
    CHECK_THROWS_AS(mse(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0)), ValidationError);

    SeededRng rng(1);
    const Eigen::VectorXd y = testing::normal_vector(37, rng, 9.19);
    CHECK(baseline_mse(y) == mse(Eigen::VectorXd::Constant(37, y.mean()), y));
    CHECK(baseline_mse(Eigen::VectorXd::Constant(5, 2.0)) == 0.0);
    CHECK(baseline_mse(Eigen::Vector2d(-1, 1)) == 1.0);
}

TEST_CASE("dataset_stats examples") {
    const DatasetStats a = dataset_stats(Eigen::Vector2d(-1, 1));
    CHECK(a.mean == 0.0);
    CHECK(a.std == 1.0);
    const DatasetStats b = dataset_stats(Eigen::Vector4d(0, 0, 0, 4));
    CHECK(b.mean == 1.0);
    CHECK(b.std == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));

    SeededRng rng(4154);
    const Eigen::VectorXd y = testing::normal_vector(4154, rng, 9.19);
    const DatasetStats c = dataset_stats(y);
    CHECK(std::abs(c.mean) <= 0.3);
    CHECK(std::abs(c.std - 9.19) <= 0.3);
    CHECK(baseline_mse(y) == doctest::Approx(c.std * c.std).epsilon(1e-12));
}

TEST_CASE("cv experiment on signal data") {
    const FeatureTable table = testing::brain_like_table(240, 20, 4, 0.5, 3);
    CvExperimentOptions opt;
    opt.k_folds = 4;
    opt.select_k = 4;
    opt.seed = 3;
    opt.evaluate_constituents = true;
    const CvReport r = run_cv_experiment(table, linear_config(), opt);
    CHECK(r.pooled_mse < r.baseline_mse);
    CHECK(r.per_fold_mse.size() == 4);
    CHECK(r.predictions.size() == 240);
    CHECK(r.constituents.size() == 3);

    // Pooled MSE is the size-weighted mean of fold MSEs.
    double weighted = 0.0;
    for (std::size_t f = 0; f < 4; ++f) weighted += r.per_fold_mse[f] * static_cast<double>(r.fold_stats[f].test_size);
    CHECK(std::abs(weighted / 240.0 - r.pooled_mse) < 1e-10);

    // Balanced folds keep each fold's spread near the global one.
    const double global = dataset_stats(*table.target).std;
    for (const auto& s : r.fold_stats) CHECK(std::abs(s.target_std - global) <= 0.2 * global);

    // Preprocessing is refitted in each fold.
    const std::set<std::string> digests(r.fold_pipeline_digests.begin(), r.fold_pipeline_digests.end());
    CHECK(digests.size() == 4);

    const CvReport again = run_cv_experiment(table, linear_config(), opt);
    CHECK(again.predictions == r.predictions);
    CHECK(again.per_fold_mse == r.per_fold_mse);
    CHECK(again.config_digest == r.config_digest);

    const std::string text = format_cv_table(r);
    CHECK(text.find("Baseline") != std::string::npos);
    CHECK(text.find("StackNet") != std::string::npos);
    CHECK(text.find("BayesianRidge") != std::string::npos);

    opt.paper_protocol = true;
    const CvReport fit_once = run_cv_experiment(table, linear_config(), opt);
    CHECK(fit_once.paper_protocol);
    const std::set<std::string> shared(fit_once.fold_pipeline_digests.begin(), fit_once.fold_pipeline_digests.end());
    CHECK(shared.size() == 1);
}

TEST_CASE("cv experiment with shuffled targets stays near the baseline") {
    FeatureTable table = testing::brain_like_table(240, 20, 4, 0.5, 7);
    Eigen::VectorXd y = *table.target;
    SeededRng rng(7);
    rng.shuffle(std::span<double>(y.data(), static_cast<std::size_t>(y.size())));
    table.target = y;
    CvExperimentOptions opt;
    opt.k_folds = 4;
    opt.select_k = 4;
    opt.seed = 7;
    const CvReport r = run_cv_experiment(table, linear_config(), opt);
    CHECK(std::abs(r.pooled_mse - r.baseline_mse) <= 0.1 * r.baseline_mse);
}
