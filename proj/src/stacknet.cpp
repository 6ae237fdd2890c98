#include "gfstack/stacknet.hpp"

#include "gfstack/errors.hpp"
#include "gfstack/harness.hpp"
#include "gfstack/serialize.hpp"

#include <cmath>

namespace gfstack {

namespace {

EstimatorSpec ensemble(EstimatorKind kind, int n_estimators, int max_depth, std::uint64_t stream) {
    EstimatorSpec spec{kind, {}, stream};
    spec.hp.n_estimators = n_estimators;
    spec.hp.max_depth = max_depth;
    return spec;
}

EstimatorSpec penalised(EstimatorKind kind, double alpha, std::uint64_t stream) {
    EstimatorSpec spec{kind, {}, stream};
    spec.hp.alpha = alpha;
    return spec;
}

bool is_averaging_ensemble(EstimatorKind kind) {
    return kind == EstimatorKind::random_forest || kind == EstimatorKind::extra_trees;
}

}  // namespace

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
    return out;
}

void StackNetConfig::validate() const {
    if (layers.empty()) throw ValidationError("StackNet config needs at least one layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].empty()) throw ValidationError("StackNet layer " + std::to_string(l + 1) + " is empty");
        for (const auto& spec : layers[l]) spec.validate();
    }
    if (oof_folds < 2) throw ValidationError("oof_folds must be at least 2");
}

std::vector<std::string> StackNetConfig::warnings() const {
    std::vector<std::string> out;
    if (!layers.empty() && layers.back().size() != 1) {
        out.push_back("final layer has " + std::to_string(layers.back().size()) +
                      " models; their predictions will be averaged");
    }
    return out;
}

std::size_t StackNetConfig::model_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers) total += layer.size();
    return total;
}

StackNetConfig default_config() {
    using K = EstimatorKind;
    StackNetConfig config;
    config.layers = {
        {
            EstimatorSpec{K::bayesian_ridge, {}, 101},
            ensemble(K::random_forest, 1000, 7, 102),
            ensemble(K::random_forest, 1000, 9, 103),
            ensemble(K::random_forest, 800, 11, 104),
            ensemble(K::extra_trees, 1800, 9, 105),
            ensemble(K::extra_trees, 2200, 11, 106),
            ensemble(K::gradient_boosting, 40, 3, 107),
        },
        {
            penalised(K::kernel_ridge, 512.0, 201),
            ensemble(K::random_forest, 800, 13, 202),
            ensemble(K::extra_trees, 3200, 15, 203),
        },
        {
            penalised(K::ridge, 512.0, 301),
        },
    };
    config.restack = true;
    config.oof_folds = 5;
    return config;
}

StackNetConfig scale_estimators(StackNetConfig config, double factor) {
    if (!(factor > 0.0)) throw ValidationError("estimator scale must be > 0");
    for (auto& layer : config.layers) {
        for (auto& spec : layer) {
            if (!is_averaging_ensemble(spec.kind)) continue;
            spec.hp.n_estimators = std::max(1, static_cast<int>(std::lround(spec.hp.n_estimators * factor)));
        }
    }
    return config;
}

Eigen::Index layer_input_width(const StackNetConfig& config, Eigen::Index input_width, std::size_t layer) {
    if (layer == 0) return input_width;
    const auto previous = static_cast<Eigen::Index>(config.layers.at(layer - 1).size());
    return config.restack ? layer_input_width(config, input_width, layer - 1) + previous : previous;
}

TrainedStackNet fit_stacknet(const StackNetConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const SeededRng& rng, StackAudit* audit) {
    config.validate();
    const Eigen::Index n = x.rows();
    if (y.size() != n) throw ValidationError("StackNet: target length does not match rows");
    if (static_cast<std::size_t>(n) < 2 * config.oof_folds) {
        throw ValidationError("StackNet needs at least " + std::to_string(2 * config.oof_folds) + " rows for " +
                              std::to_string(config.oof_folds) + " out-of-fold splits, got " + std::to_string(n));
    }

    TrainedStackNet net;
    net.config = config;
    net.input_width = x.cols();
    if (audit != nullptr) *audit = StackAudit{};

    Eigen::MatrixXd accumulated = x;
    for (std::size_t l = 0; l < config.layers.size(); ++l) {
        const auto& layer = config.layers[l];
        const SeededRng layer_rng = rng.child(l);
        const FoldPlan plan = make_balanced_folds(y, config.oof_folds, layer_rng.child(0));
        std::vector<SplitIndices> splits;
        for (std::size_t f = 0; f < plan.k; ++f) splits.push_back(split_indices(plan, f));

        Eigen::MatrixXd meta(n, static_cast<Eigen::Index>(layer.size()));
        std::vector<FittedEstimator> fitted;
        fitted.reserve(layer.size());
        for (std::size_t m = 0; m < layer.size(); ++m) {
            const SeededRng model_rng = layer_rng.child(1 + layer[m].seed_stream);
            for (std::size_t f = 0; f < plan.k; ++f) {
                const auto& split = splits[f];
                const FittedEstimator fold_model = fit_estimator(layer[m], take_rows(accumulated, split.train),
                                                                 take_rows(y, split.train), model_rng.child(f));
                const Eigen::VectorXd held_out = predict(fold_model, take_rows(accumulated, split.test));
                for (std::size_t i = 0; i < split.test.size(); ++i) {
                    meta(static_cast<Eigen::Index>(split.test[i]), static_cast<Eigen::Index>(m)) =
                        held_out[static_cast<Eigen::Index>(i)];
                }
                if (audit != nullptr) audit->records.push_back({l, m, f, split.train, split.test});
            }
            fitted.push_back(fit_estimator(layer[m], accumulated, y, model_rng.child(plan.k)));
        }
        net.fitted_layers.push_back(std::move(fitted));
        if (audit != nullptr) {
            audit->layer_plans.push_back(plan);
            audit->meta_features.push_back(meta);
        }

        if (config.restack) {
            Eigen::MatrixXd next(n, accumulated.cols() + meta.cols());
            next << accumulated, meta;
            accumulated = std::move(next);
        } else {
            accumulated = std::move(meta);
        }
    }
    return net;
}

Eigen::VectorXd predict_stacknet(const TrainedStackNet& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.input_width) {
        throw ValidationError("StackNet expects " + std::to_string(model.input_width) + " input columns, got " +
                              std::to_string(x.cols()));
    }
    if (model.fitted_layers.empty()) throw ValidationError("StackNet has no fitted layers");
    Eigen::MatrixXd accumulated = x;
    Eigen::MatrixXd outputs;
    for (const auto& layer : model.fitted_layers) {
        outputs.resize(x.rows(), static_cast<Eigen::Index>(layer.size()));
        for (std::size_t m = 0; m < layer.size(); ++m) outputs.col(static_cast<Eigen::Index>(m)) = predict(layer[m], accumulated);
        if (model.config.restack) {
            Eigen::MatrixXd next(x.rows(), accumulated.cols() + outputs.cols());
            next << accumulated, outputs;
            accumulated = std::move(next);
        } else {
            accumulated = outputs;
        }
    }
    if (x.rows() == 0) return Eigen::VectorXd(0);
    return outputs.rowwise().mean();
}

CvReport stacknet_cv(const StackNetConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::size_t k_folds, const SeededRng& rng) {
    config.validate();
    if (y.size() != x.rows()) throw ValidationError("cross-validation: target length does not match rows");
    if (k_folds < 2 || static_cast<std::size_t>(x.rows()) < 2 * k_folds) {
        throw ValidationError("cross-validation with " + std::to_string(k_folds) + " folds needs at least " +
                              std::to_string(2 * k_folds) + " rows, got " + std::to_string(x.rows()));
    }

    const FoldPlan plan = make_balanced_folds(y, k_folds, rng.child(0));
    std::vector<Eigen::VectorXd> fold_predictions;
    std::vector<SplitIndices> splits;
    for (std::size_t f = 0; f < k_folds; ++f) {
        auto split = split_indices(plan, f);
        const TrainedStackNet net =
            fit_stacknet(config, take_rows(x, split.train), take_rows(y, split.train), rng.child(1 + f));
        fold_predictions.push_back(predict_stacknet(net, take_rows(x, split.test)));
        splits.push_back(std::move(split));
    }

    CvReport report = assemble_cv_report(y, plan, splits, fold_predictions);
    report.config_digest = digest(to_json(config).dump() + "|folds=" + std::to_string(k_folds));
    return report;
}

std::vector<ModelScore> constituent_cv(const StackNetConfig& config, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y, std::size_t k_folds, const SeededRng& rng) {
    config.validate();
    if (y.size() != x.rows()) throw ValidationError("cross-validation: target length does not match rows");
    if (k_folds < 2 || static_cast<std::size_t>(x.rows()) < 2 * k_folds) {
        throw ValidationError("cross-validation with " + std::to_string(k_folds) + " folds needs at least " +
                              std::to_string(2 * k_folds) + " rows, got " + std::to_string(x.rows()));
    }
    std::vector<const EstimatorSpec*> members;
    for (const auto& layer : config.layers) {
        for (const auto& spec : layer) members.push_back(&spec);
    }

    const FoldPlan plan = make_balanced_folds(y, k_folds, rng.child(0));
    std::vector<SplitIndices> splits;
    std::vector<std::vector<Eigen::VectorXd>> predictions(members.size());
    for (std::size_t f = 0; f < k_folds; ++f) {
        auto split = split_indices(plan, f);
        const Eigen::MatrixXd x_train = take_rows(x, split.train);
        const Eigen::VectorXd y_train = take_rows(y, split.train);
        const Eigen::MatrixXd x_test = take_rows(x, split.test);
        const SeededRng member_rng = rng.child(1 + f).child(kConstituentStream);
        for (std::size_t i = 0; i < members.size(); ++i) {
            predictions[i].push_back(predict(fit_estimator(*members[i], x_train, y_train, member_rng.child(i)), x_test));
        }
        splits.push_back(std::move(split));
    }

    std::vector<ModelScore> scores;
    for (std::size_t i = 0; i < members.size(); ++i) {
        const CvReport single = assemble_cv_report(y, plan, splits, predictions[i]);
        scores.push_back({members[i]->label(), single.per_fold_mse, single.pooled_mse});
    }
    return scores;
}

}  // namespace gfstack
