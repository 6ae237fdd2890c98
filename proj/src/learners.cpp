#include "gfstack/learners.hpp"

#include "gfstack/errors.hpp"
#include "gfstack/table.hpp"

#include <cmath>

namespace gfstack {

namespace {

constexpr double kHyperpriorEps = 1e-6;

void check_training_data(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::Index min_rows) {
    if (x.rows() != y.size()) throw ValidationError("target length does not match the number of rows");
    if (x.rows() < min_rows) {
        throw ValidationError("need at least " + std::to_string(min_rows) + " training rows, got " +
                              std::to_string(x.rows()));
    }
    if (!x.allFinite() || !y.allFinite()) throw ValidationError("training data must be finite");
}

FittedEstimator make_fitted(EstimatorSpec spec, const Eigen::MatrixXd& x) {
    FittedEstimator est;
    est.spec = std::move(spec);
    est.train_rows = x.rows();
    est.train_cols = x.cols();
    return est;
}

TreeParams tree_params(const Hyperparams& hp, ThresholdMode mode) {
    return TreeParams{hp.max_depth, hp.min_samples_leaf, hp.max_features, mode};
}

Eigen::VectorXd average_trees(const std::vector<RegressionTree>& trees, const Eigen::MatrixXd& x) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double sum = 0.0;
        for (const auto& tree : trees) sum += tree.predict_row(x, i);
        out[i] = sum / static_cast<double>(trees.size());
    }
    return out;
}

}  // namespace

std::string to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::ridge: return "ridge";
        case EstimatorKind::bayesian_ridge: return "bayesian_ridge";
        case EstimatorKind::kernel_ridge: return "kernel_ridge";
        case EstimatorKind::random_forest: return "random_forest";
        case EstimatorKind::extra_trees: return "extra_trees";
        case EstimatorKind::gradient_boosting: return "gradient_boosting";
    }
    return "unknown";
}

EstimatorKind parse_estimator_kind(const std::string& name) {
    for (auto kind : {EstimatorKind::ridge, EstimatorKind::bayesian_ridge, EstimatorKind::kernel_ridge,
                      EstimatorKind::random_forest, EstimatorKind::extra_trees, EstimatorKind::gradient_boosting}) {
        if (to_string(kind) == name) return kind;
    }
    throw ValidationError("unknown estimator kind '" + name + "'");
}

void EstimatorSpec::validate() const {
    switch (kind) {
        case EstimatorKind::ridge:
        case EstimatorKind::kernel_ridge:
            if (!(hp.alpha > 0.0) || !std::isfinite(hp.alpha)) throw ValidationError(label() + ": alpha must be > 0");
            if (kind == EstimatorKind::kernel_ridge) {
                if (hp.kernel != "linear" && hp.kernel != "rbf") {
                    throw ValidationError("unsupported kernel '" + hp.kernel + "'");
                }
                if (!(hp.gamma >= 0.0)) throw ValidationError(label() + ": gamma must be >= 0");
            }
            break;
        case EstimatorKind::bayesian_ridge:
            if (hp.max_iter < 1) throw ValidationError(label() + ": max_iter must be >= 1");
            if (!(hp.tol > 0.0)) throw ValidationError(label() + ": tol must be > 0");
            break;
        case EstimatorKind::gradient_boosting:
            if (!(hp.learning_rate > 0.0)) throw ValidationError(label() + ": learning_rate must be > 0");
            [[fallthrough]];
        case EstimatorKind::random_forest:
        case EstimatorKind::extra_trees:
            if (hp.n_estimators < 1) throw ValidationError(label() + ": n_estimators must be >= 1");
            if (hp.max_depth < 1) throw ValidationError(label() + ": max_depth must be >= 1");
            if (hp.min_samples_leaf < 1) throw ValidationError(label() + ": min_samples_leaf must be >= 1");
            if (hp.max_features < 0) throw ValidationError(label() + ": max_features must be >= 0");
            break;
    }
}

std::string EstimatorSpec::label() const {
    auto ensemble = [&](const char* name) {
        return std::string(name) + "(n_estimators=" + std::to_string(hp.n_estimators) +
               ", max_depth=" + std::to_string(hp.max_depth) + ")";
    };
    switch (kind) {
        case EstimatorKind::ridge: return "Ridge(alpha=" + format_double(hp.alpha) + ")";
        case EstimatorKind::bayesian_ridge: return "BayesianRidge";
        case EstimatorKind::kernel_ridge:
            return "KernelRidge(alpha=" + format_double(hp.alpha) +
                   (hp.kernel == "linear" ? std::string() : ", kernel=" + hp.kernel) + ")";
        case EstimatorKind::random_forest: return ensemble("RandomForestRegressor");
        case EstimatorKind::extra_trees: return ensemble("ExtraTreesRegressor");
        case EstimatorKind::gradient_boosting: return ensemble("GradientBoostingRegressor");
    }
    return "Unknown";
}

FittedEstimator fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha) {
    EstimatorSpec spec{EstimatorKind::ridge, {}, 0};
    spec.hp.alpha = alpha;
    spec.validate();
    check_training_data(x, y, 1);

    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += alpha;
    LinearParams params;
    params.weights = gram.ldlt().solve(xc.transpose() * yc);
    params.intercept = y_mean - x_mean.dot(params.weights);

    auto est = make_fitted(spec, x);
    est.params = std::move(params);
    return est;
}

FittedEstimator fit_bayesian_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int max_iter, double tol) {
    EstimatorSpec spec{EstimatorKind::bayesian_ridge, {}, 0};
    spec.hp.max_iter = max_iter;
    spec.hp.tol = tol;
    spec.validate();
    check_training_data(x, y, 2);

    const auto n = static_cast<double>(x.rows());
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;
    const double y_var = yc.squaredNorm() / n;

    LinearParams params;
    params.weights = Eigen::VectorXd::Zero(x.cols());
    params.intercept = y_mean;
    auto est = make_fitted(spec, x);
    if ((y.array() == y[0]).all()) {
        params.intercept = y[0];
        est.params = std::move(params);
        return est;
    }

    // X'X = V diag(s) V' makes every posterior solve diagonal.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xc.transpose() * xc);
    const Eigen::VectorXd s = eig.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd& v = eig.eigenvectors();
    const Eigen::VectorXd vt_xty = v.transpose() * (xc.transpose() * yc);

    double noise = 1.0 / y_var;
    double weight = 1.0;
    auto posterior_mean = [&](double a, double b) -> Eigen::VectorXd {
        return v * (a * vt_xty.array() / (b + a * s.array())).matrix();
    };

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.cols());
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        const Eigen::VectorXd next = posterior_mean(noise, weight);
        const double gamma = (noise * s.array() / (weight + noise * s.array())).sum();
        const double rss = (yc - xc * next).squaredNorm();
        weight = (gamma + 2.0 * kHyperpriorEps) / (next.squaredNorm() + 2.0 * kHyperpriorEps);
        noise = (n - gamma + 2.0 * kHyperpriorEps) / (rss + 2.0 * kHyperpriorEps);
        const bool converged = iter > 0 && (next - mean).cwiseAbs().maxCoeff() < tol;
        mean = next;
        if (converged) {
            ++iter;
            break;
        }
    }

    params.weights = posterior_mean(noise, weight);
    params.intercept = y_mean - x_mean.dot(params.weights);
    params.noise_precision = noise;
    params.weight_precision = weight;
    params.iterations = iter;
    est.params = std::move(params);
    return est;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const std::string& kernel,
                              double gamma) {
    if (kernel == "linear") return a * b.transpose();
    if (kernel == "rbf") {
        const double g = gamma > 0.0 ? gamma : 1.0 / static_cast<double>(std::max<Eigen::Index>(1, a.cols()));
        Eigen::MatrixXd k = -2.0 * (a * b.transpose());
        k.colwise() += a.rowwise().squaredNorm();
        k.rowwise() += b.rowwise().squaredNorm().transpose();
        return (-g * k.array().max(0.0)).exp().matrix();
    }
    throw ValidationError("unsupported kernel '" + kernel + "'");
}

FittedEstimator fit_kernel_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                                 const std::string& kernel, double gamma) {
    EstimatorSpec spec{EstimatorKind::kernel_ridge, {}, 0};
    spec.hp.alpha = alpha;
    spec.hp.kernel = kernel;
    spec.hp.gamma = gamma;
    spec.validate();
    check_training_data(x, y, 1);

    Eigen::MatrixXd k = kernel_matrix(x, x, kernel, gamma);
    k.diagonal().array() += alpha;
    KernelParams params;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    params.dual = llt.info() == Eigen::Success ? Eigen::VectorXd(llt.solve(y)) : Eigen::VectorXd(k.ldlt().solve(y));
    params.support = x;
    params.kernel = kernel;
    params.gamma = gamma;

    auto est = make_fitted(spec, x);
    est.params = std::move(params);
    return est;
}

FittedEstimator fit_random_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                  int max_depth, const SeededRng& rng, int min_samples_leaf, int max_features) {
    EstimatorSpec spec{EstimatorKind::random_forest, {}, 0};
    spec.hp.n_estimators = n_estimators;
    spec.hp.max_depth = max_depth;
    spec.hp.min_samples_leaf = min_samples_leaf;
    spec.hp.max_features = max_features;
    spec.validate();
    check_training_data(x, y, 2);

    ForestParams params;
    params.trees = fit_tree_ensemble(x, y, tree_params(spec.hp, ThresholdMode::best), n_estimators,
                                     bootstrap_sampler(), rng);
    auto est = make_fitted(spec, x);
    est.params = std::move(params);
    return est;
}

FittedEstimator fit_extra_trees(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                int max_depth, const SeededRng& rng, int min_samples_leaf, int max_features) {
    EstimatorSpec spec{EstimatorKind::extra_trees, {}, 0};
    spec.hp.n_estimators = n_estimators;
    spec.hp.max_depth = max_depth;
    spec.hp.min_samples_leaf = min_samples_leaf;
    spec.hp.max_features = max_features;
    spec.validate();
    check_training_data(x, y, 2);

    ForestParams params;
    params.trees = fit_tree_ensemble(x, y, tree_params(spec.hp, ThresholdMode::random), n_estimators,
                                     all_rows_sampler(), rng);
    auto est = make_fitted(spec, x);
    est.params = std::move(params);
    return est;
}

FittedEstimator fit_gradient_boosting(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_estimators,
                                      int max_depth, double learning_rate, int min_samples_leaf) {
    EstimatorSpec spec{EstimatorKind::gradient_boosting, {}, 0};
    spec.hp.n_estimators = n_estimators;
    spec.hp.max_depth = max_depth;
    spec.hp.learning_rate = learning_rate;
    spec.hp.min_samples_leaf = min_samples_leaf;
    spec.validate();
    check_training_data(x, y, 2);

    BoostingParams params;
    params.initial = y.mean();
    params.learning_rate = learning_rate;
    params.stages.reserve(static_cast<std::size_t>(n_estimators));

    // Best-threshold splits over all features never draw from the rng.
    const TreeParams tp{max_depth, min_samples_leaf, 0, ThresholdMode::best};
    SeededRng unused(0);
    Eigen::VectorXd current = Eigen::VectorXd::Constant(x.rows(), params.initial);
    for (int m = 0; m < n_estimators; ++m) {
        const Eigen::VectorXd residual = y - current;
        RegressionTree tree = fit_cart(x, residual, tp, unused);
        current += learning_rate * tree.predict(x);
        params.stages.push_back(std::move(tree));
    }

    auto est = make_fitted(spec, x);
    est.params = std::move(params);
    return est;
}

FittedEstimator fit_estimator(const EstimatorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const SeededRng& rng) {
    spec.validate();
    const Hyperparams& hp = spec.hp;
    FittedEstimator est;
    switch (spec.kind) {
        case EstimatorKind::ridge: est = fit_ridge(x, y, hp.alpha); break;
        case EstimatorKind::bayesian_ridge: est = fit_bayesian_ridge(x, y, hp.max_iter, hp.tol); break;
        case EstimatorKind::kernel_ridge: est = fit_kernel_ridge(x, y, hp.alpha, hp.kernel, hp.gamma); break;
        case EstimatorKind::random_forest:
            est = fit_random_forest(x, y, hp.n_estimators, hp.max_depth, rng, hp.min_samples_leaf, hp.max_features);
            break;
        case EstimatorKind::extra_trees:
            est = fit_extra_trees(x, y, hp.n_estimators, hp.max_depth, rng, hp.min_samples_leaf, hp.max_features);
            break;
        case EstimatorKind::gradient_boosting:
            est = fit_gradient_boosting(x, y, hp.n_estimators, hp.max_depth, hp.learning_rate, hp.min_samples_leaf);
            break;
    }
    est.spec = spec;
    return est;
}

Eigen::VectorXd predict(const FittedEstimator& est, const Eigen::MatrixXd& x) {
    if (x.cols() != est.train_cols) {
        throw ValidationError(est.spec.label() + ": expected " + std::to_string(est.train_cols) +
                              " input columns, got " + std::to_string(x.cols()));
    }
    if (x.rows() == 0) return Eigen::VectorXd(0);
    return std::visit(
        [&](const auto& p) -> Eigen::VectorXd {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, LinearParams>) {
                return (x * p.weights).array() + p.intercept;
            } else if constexpr (std::is_same_v<P, KernelParams>) {
                return kernel_matrix(x, p.support, p.kernel, p.gamma) * p.dual;
            } else if constexpr (std::is_same_v<P, ForestParams>) {
                return average_trees(p.trees, x);
            } else {
                return predict_staged(est, x, p.stages.size());
            }
        },
        est.params);
}

Eigen::VectorXd predict_staged(const FittedEstimator& est, const Eigen::MatrixXd& x, std::size_t stages) {
    const auto* p = std::get_if<BoostingParams>(&est.params);
    if (p == nullptr) throw ValidationError("staged prediction requires a boosting model");
    if (x.cols() != est.train_cols) throw ValidationError("staged prediction: column count mismatch");
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), p->initial);
    const std::size_t count = std::min(stages, p->stages.size());
    for (std::size_t m = 0; m < count; ++m) out += p->learning_rate * p->stages[m].predict(x);
    return out;
}

}  // namespace gfstack
