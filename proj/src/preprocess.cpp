#include "gfstack/preprocess.hpp"

#include "gfstack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace gfstack {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_cols(const Eigen::MatrixXd& m, Eigen::Index expected, const char* what) {
    if (m.cols() != expected) {
        throw ValidationError(std::string(what) + ": expected " + std::to_string(expected) + " columns, got " +
                              std::to_string(m.cols()));
    }
}

}  // namespace

std::vector<std::size_t> StandardizerState::degenerate_columns() const {
    std::vector<std::size_t> out;
    for (Eigen::Index j = 0; j < sigma.size(); ++j) {
        if (sigma[j] == 0.0) out.push_back(static_cast<std::size_t>(j));
    }
    return out;
}

FittedPipeline::Chain FittedPipeline::chain() const {
    return {static_cast<std::size_t>(pca.input_dim()), static_cast<std::size_t>(pca.rank()),
            static_cast<std::size_t>(std::count(selector.variance_mask.begin(), selector.variance_mask.end(), true)),
            selector.selected.size()};
}

StandardizerState fit_standardizer(const Eigen::MatrixXd& values) {
    if (values.rows() < 2) throw ValidationError("standardizer needs at least 2 rows");
    const auto n = static_cast<double>(values.rows());
    StandardizerState state;
    state.mu = values.colwise().mean().transpose();
    state.sigma.resize(values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const double ss = (values.col(j).array() - state.mu[j]).square().sum();
        state.sigma[j] = std::sqrt(ss / n);
    }
    return state;
}

Eigen::MatrixXd apply_standardizer(const StandardizerState& state, const Eigen::MatrixXd& values) {
    require_cols(values, state.mu.size(), "standardizer");
    Eigen::MatrixXd out(values.rows(), values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        if (state.sigma[j] == 0.0) {
            out.col(j).setZero();
        } else {
            out.col(j) = (values.col(j).array() - state.mu[j]) / state.sigma[j];
        }
    }
    return out;
}

double minka_log_evidence(const Eigen::VectorXd& spectrum, std::size_t rank, std::size_t n_samples) {
    const auto q = static_cast<std::size_t>(spectrum.size());
    if (rank < 1 || rank >= q) throw ValidationError("candidate rank must lie in [1, q-1]");
    const double n = static_cast<double>(n_samples);
    const double k = static_cast<double>(rank);
    const double qd = static_cast<double>(q);

    for (std::size_t i = 0; i < rank; ++i) {
        if (!(spectrum[static_cast<Eigen::Index>(i)] > 0.0)) return kNegInf;
    }
    const double noise = spectrum.tail(static_cast<Eigen::Index>(q - rank)).sum() / (qd - k);
    if (!(noise > 0.0)) return kNegInf;

    // Uniform prior over the Stiefel manifold of retained directions.
    double log_prior_u = -k * std::log(2.0);
    for (std::size_t i = 1; i <= rank; ++i) {
        const double half = (qd - static_cast<double>(i) + 1.0) / 2.0;
        log_prior_u += std::lgamma(half) - half * std::log(std::numbers::pi);
    }
    double log_retained = 0.0;
    for (std::size_t i = 0; i < rank; ++i) log_retained += std::log(spectrum[static_cast<Eigen::Index>(i)]);
    const double log_lik = -(n / 2.0) * log_retained - (n * (qd - k) / 2.0) * std::log(noise);

    const double m = qd * k - k * (k + 1.0) / 2.0;
    const double log_volume = ((m + k + 1.0) / 2.0) * std::log(2.0 * std::numbers::pi);

    // log |A_Z| of the Laplace Hessian.
    auto tilde = [&](std::size_t j) { return j < rank ? spectrum[static_cast<Eigen::Index>(j)] : noise; };
    double log_hessian = 0.0;
    for (std::size_t i = 0; i < rank; ++i) {
        const double li = spectrum[static_cast<Eigen::Index>(i)];
        for (std::size_t j = i + 1; j < q; ++j) {
            const double lj = spectrum[static_cast<Eigen::Index>(j)];
            const double term = (1.0 / tilde(j) - 1.0 / tilde(i)) * (li - lj);
            if (!(term > 0.0)) return kNegInf;
            log_hessian += std::log(term) + std::log(n);
        }
    }

    const double ll = log_prior_u + log_lik + log_volume - (k / 2.0) * std::log(n) - 0.5 * log_hessian;
    return std::isfinite(ll) ? ll : kNegInf;
}

RankSelection minka_rank(const Eigen::VectorXd& spectrum, std::size_t n_samples) {
    const auto q = static_cast<std::size_t>(spectrum.size());
    if (q < 2) throw ValidationError("rank selection needs a spectrum of length >= 2");
    if (n_samples < 1) throw ValidationError("rank selection needs n >= 1");
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
        if (!(spectrum[i] >= 0.0)) throw ValidationError("spectrum must be non-negative");
        if (i > 0 && spectrum[i] > spectrum[i - 1]) throw ValidationError("spectrum must be non-increasing");
    }

    RankSelection out;
    out.log_evidence.reserve(q - 1);
    double best = kNegInf;
    for (std::size_t k = 1; k < q; ++k) {
        const double ll = minka_log_evidence(spectrum, k, n_samples);
        out.log_evidence.push_back(ll);
        if (ll > best) {
            best = ll;
            out.rank = k;
        }
    }
    out.fallback = (best == kNegInf);
    if (out.fallback) out.rank = 1;
    return out;
}

Spectrum covariance_spectrum(const Eigen::MatrixXd& values) {
    const Eigen::Index n = values.rows();
    const Eigen::Index p = values.cols();
    if (n < 3) throw ValidationError("PCA needs at least 3 rows");
    if (p < 2) throw ValidationError("PCA needs at least 2 columns");

    Spectrum out;
    out.center = values.colwise().mean().transpose();
    const Eigen::MatrixXd centred = values.rowwise() - out.center.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) throw ValidationError("PCA input is degenerate (all rows identical)");

    // Singular values at rounding level are exact zeros of the true spectrum.
    const double cutoff = s[0] * static_cast<double>(std::max(n, p)) * std::numeric_limits<double>::epsilon();
    out.eigenvalues.resize(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        out.eigenvalues[i] = s[i] <= cutoff ? 0.0 : s[i] * s[i] / static_cast<double>(n - 1);
    }
    out.axes = svd.matrixV();
    for (Eigen::Index c = 0; c < out.axes.cols(); ++c) {
        Eigen::Index arg = 0;
        out.axes.col(c).cwiseAbs().maxCoeff(&arg);
        if (out.axes(arg, c) < 0.0) out.axes.col(c) *= -1.0;
    }
    return out;
}

PcaState fit_pca(const Eigen::MatrixXd& values) {
    const Spectrum spectrum = covariance_spectrum(values);
    const RankSelection selection = minka_rank(spectrum.eigenvalues, static_cast<std::size_t>(values.rows()));
    const auto r = static_cast<Eigen::Index>(selection.rank);

    PcaState state;
    state.center = spectrum.center;
    state.components = spectrum.axes.leftCols(r);
    state.eigenvalues = spectrum.eigenvalues.head(r);
    state.rank_fallback = selection.fallback;
    return state;
}

Eigen::MatrixXd apply_pca(const PcaState& state, const Eigen::MatrixXd& values) {
    require_cols(values, state.center.size(), "PCA projection");
    return (values.rowwise() - state.center.transpose()) * state.components;
}

std::vector<bool> fit_variance_mask(const Eigen::MatrixXd& scores, double threshold) {
    if (!(threshold >= 0.0)) throw ValidationError("variance threshold must be >= 0");
    std::vector<bool> mask(static_cast<std::size_t>(scores.cols()), false);
    if (scores.rows() == 0) return mask;
    const auto n = static_cast<double>(scores.rows());
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        const double mean = scores.col(j).mean();
        const double var = (scores.col(j).array() - mean).square().sum() / n;
        mask[static_cast<std::size_t>(j)] = var > threshold;
    }
    return mask;
}

Eigen::VectorXd f_regression(const Eigen::MatrixXd& scores, const Eigen::VectorXd& targets) {
    const Eigen::Index n = scores.rows();
    if (targets.size() != n) throw ValidationError("f_regression: target length does not match rows");
    if (n < 3) throw ValidationError("f_regression needs at least 3 rows");
    const Eigen::VectorXd yc = targets.array() - targets.mean();
    const double syy = yc.squaredNorm();
    if (syy == 0.0) throw ValidationError("f_regression: target is constant");

    const double dof = static_cast<double>(n - 2);
    Eigen::VectorXd f(scores.cols());
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        const Eigen::VectorXd xc = scores.col(j).array() - scores.col(j).mean();
        const double sxx = xc.squaredNorm();
        if (sxx == 0.0) {
            f[j] = 0.0;
            continue;
        }
        const double sxy = xc.dot(yc);
        const double explained = sxy * sxy;
        const double total = sxx * syy;
        const double unexplained = total - explained;
        if (!(unexplained > 0.0)) {
            f[j] = std::numeric_limits<double>::max();
            continue;
        }
        const double value = explained / unexplained * dof;
        f[j] = std::isfinite(value) ? value : std::numeric_limits<double>::max();
    }
    return f;
}

SelectorState select_top_k(const Eigen::VectorXd& f_values, const std::vector<bool>& mask, std::size_t k) {
    if (static_cast<std::size_t>(f_values.size()) != mask.size()) {
        throw ValidationError("select_top_k: F values and mask differ in length");
    }
    std::vector<std::size_t> surviving;
    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (mask[j]) surviving.push_back(j);
    }
    if (k > surviving.size()) {
        throw ValidationError("cannot select " + std::to_string(k) + " components; only " +
                              std::to_string(surviving.size()) + " survive the variance filter");
    }
    std::stable_sort(surviving.begin(), surviving.end(), [&](std::size_t a, std::size_t b) {
        return f_values[static_cast<Eigen::Index>(a)] > f_values[static_cast<Eigen::Index>(b)];
    });
    surviving.resize(k);
    std::sort(surviving.begin(), surviving.end());

    SelectorState state;
    state.variance_mask = mask;
    state.f_values = f_values;
    state.selected = std::move(surviving);
    return state;
}

FittedPipeline fit_pipeline(const Eigen::MatrixXd& values, const Eigen::VectorXd& targets, std::size_t k,
                            double variance_threshold) {
    if (values.rows() < 3) throw ValidationError("pipeline needs at least 3 rows");
    if (targets.size() != values.rows()) throw ValidationError("target length does not match rows");
    if (k == 0) throw ValidationError("selection size must be at least 1");

    FittedPipeline pipeline;
    pipeline.k = k;
    pipeline.variance_threshold = variance_threshold;
    pipeline.standardizer = fit_standardizer(values);
    const Eigen::MatrixXd standardized = apply_standardizer(pipeline.standardizer, values);
    pipeline.pca = fit_pca(standardized);
    const Eigen::MatrixXd scores = apply_pca(pipeline.pca, standardized);
    const auto mask = fit_variance_mask(scores, variance_threshold);
    pipeline.selector = select_top_k(f_regression(scores, targets), mask, k);
    return pipeline;
}

FittedPipeline fit_pipeline(const FeatureTable& table, std::size_t k, double variance_threshold) {
    return fit_pipeline(table.values, table.require_target(), k, variance_threshold);
}

Eigen::MatrixXd transform(const FittedPipeline& pipeline, const Eigen::MatrixXd& values) {
    const Eigen::MatrixXd scores = apply_pca(pipeline.pca, apply_standardizer(pipeline.standardizer, values));
    Eigen::MatrixXd out(scores.rows(), static_cast<Eigen::Index>(pipeline.selector.selected.size()));
    for (std::size_t c = 0; c < pipeline.selector.selected.size(); ++c) {
        out.col(static_cast<Eigen::Index>(c)) = scores.col(static_cast<Eigen::Index>(pipeline.selector.selected[c]));
    }
    return out;
}

}  // namespace gfstack
