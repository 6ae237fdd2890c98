#include "gfstack/serialize.hpp"

#include "gfstack/errors.hpp"

#include <cstdio>
#include <fstream>

namespace gfstack {

namespace {

Json vec_to_json(const Eigen::VectorXd& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vec_from_json(const Json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json column_major(const Eigen::MatrixXd& m) {
    Json out = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(m(r, c));
    }
    return out;
}

Eigen::MatrixXd matrix_from_column_major(const Json& j, Eigen::Index rows, Eigen::Index cols) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != rows * cols) {
        throw ValidationError("matrix payload has " + std::to_string(values.size()) + " entries, expected " +
                              std::to_string(rows * cols));
    }
    return Eigen::Map<const Eigen::MatrixXd>(values.data(), rows, cols);
}

Json hyperparams_to_json(const Hyperparams& hp) {
    return Json{{"alpha", hp.alpha},
                {"n_estimators", hp.n_estimators},
                {"max_depth", hp.max_depth},
                {"learning_rate", hp.learning_rate},
                {"min_samples_leaf", hp.min_samples_leaf},
                {"max_features", hp.max_features},
                {"max_iter", hp.max_iter},
                {"tol", hp.tol},
                {"kernel", hp.kernel},
                {"gamma", hp.gamma}};
}

// Missing keys keep their defaults so hand-written configs stay short.
void read_hyperparams(const Json& j, Hyperparams& hp) {
    auto take = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("alpha", hp.alpha);
    take("n_estimators", hp.n_estimators);
    take("max_depth", hp.max_depth);
    take("learning_rate", hp.learning_rate);
    take("min_samples_leaf", hp.min_samples_leaf);
    take("max_features", hp.max_features);
    take("max_iter", hp.max_iter);
    take("tol", hp.tol);
    take("kernel", hp.kernel);
    take("gamma", hp.gamma);
}

std::int32_t rebuild_preorder(std::vector<TreeNode>& nodes, std::size_t& cursor, int depth) {
    if (cursor >= nodes.size() || depth > 4096) throw ValidationError("truncated tree node list");
    const auto index = static_cast<std::int32_t>(cursor++);
    if (!nodes[static_cast<std::size_t>(index)].is_leaf()) {
        const std::int32_t left = rebuild_preorder(nodes, cursor, depth + 1);
        const std::int32_t right = rebuild_preorder(nodes, cursor, depth + 1);
        nodes[static_cast<std::size_t>(index)].left = left;
        nodes[static_cast<std::size_t>(index)].right = right;
    }
    return index;
}

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

std::string digest(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Json to_json(const FittedPipeline& pipeline) {
    Json mask = Json::array();
    for (bool b : pipeline.selector.variance_mask) mask.push_back(b);
    return Json{{"format_version", kPipelineFormatVersion},
                {"mu", vec_to_json(pipeline.standardizer.mu)},
                {"sigma", vec_to_json(pipeline.standardizer.sigma)},
                {"center", vec_to_json(pipeline.pca.center)},
                {"components", column_major(pipeline.pca.components)},
                {"eigenvalues", vec_to_json(pipeline.pca.eigenvalues)},
                {"rank_fallback", pipeline.pca.rank_fallback},
                {"variance_mask", mask},
                {"variance_threshold", pipeline.variance_threshold},
                {"f_values", vec_to_json(pipeline.selector.f_values)},
                {"selected", pipeline.selector.selected},
                {"k", pipeline.k}};
}

FittedPipeline pipeline_from_json(const Json& j) {
    return guarded("pipeline", [&] {
        if (j.at("format_version").get<int>() != kPipelineFormatVersion) {
            throw ValidationError("unsupported pipeline version");
        }
        FittedPipeline p;
        p.standardizer.mu = vec_from_json(j.at("mu"));
        p.standardizer.sigma = vec_from_json(j.at("sigma"));
        p.pca.center = vec_from_json(j.at("center"));
        p.pca.eigenvalues = vec_from_json(j.at("eigenvalues"));
        p.pca.components = matrix_from_column_major(j.at("components"), p.pca.center.size(), p.pca.eigenvalues.size());
        p.pca.rank_fallback = j.value("rank_fallback", false);
        p.selector.variance_mask = j.at("variance_mask").get<std::vector<bool>>();
        p.variance_threshold = j.value("variance_threshold", 1e-8);
        p.selector.f_values = vec_from_json(j.at("f_values"));
        p.selector.selected = j.at("selected").get<std::vector<std::size_t>>();
        p.k = j.at("k").get<std::size_t>();

        const auto r = static_cast<std::size_t>(p.pca.eigenvalues.size());
        if (p.standardizer.mu.size() != p.pca.center.size() || p.standardizer.sigma.size() != p.pca.center.size() ||
            p.selector.variance_mask.size() != r || static_cast<std::size_t>(p.selector.f_values.size()) != r ||
            p.selector.selected.size() != p.k) {
            throw ValidationError("pipeline arrays have inconsistent lengths");
        }
        for (const auto s : p.selector.selected) {
            if (s >= r) throw ValidationError("pipeline selects a component out of range");
        }
        return p;
    });
}

Json to_json(const EstimatorSpec& spec) {
    return Json{{"kind", to_string(spec.kind)}, {"hyperparams", hyperparams_to_json(spec.hp)},
                {"seed_stream", spec.seed_stream}};
}

EstimatorSpec estimator_spec_from_json(const Json& j) {
    return guarded("estimator spec", [&] {
        EstimatorSpec spec;
        spec.kind = parse_estimator_kind(j.at("kind").get<std::string>());
        read_hyperparams(j, spec.hp);
        if (j.contains("hyperparams")) read_hyperparams(j.at("hyperparams"), spec.hp);
        spec.seed_stream = j.value("seed_stream", std::uint64_t{0});
        spec.validate();
        return spec;
    });
}

Json to_json(const StackNetConfig& config) {
    Json layers = Json::array();
    for (const auto& layer : config.layers) {
        Json specs = Json::array();
        for (const auto& spec : layer) specs.push_back(to_json(spec));
        layers.push_back(specs);
    }
    return Json{{"layers", layers}, {"restack", config.restack}, {"oof_folds", config.oof_folds},
                {"seed", config.seed}};
}

StackNetConfig stacknet_config_from_json(const Json& j) {
    return guarded("StackNet config", [&] {
        StackNetConfig config;
        std::uint64_t stream = 0;
        for (const auto& layer : j.at("layers")) {
            std::vector<EstimatorSpec> specs;
            ++stream;
            std::uint64_t slot = 0;
            for (const auto& spec_json : layer) {
                EstimatorSpec spec = estimator_spec_from_json(spec_json);
                ++slot;
                if (!spec_json.contains("seed_stream")) spec.seed_stream = stream * 100 + slot;
                specs.push_back(spec);
            }
            config.layers.push_back(std::move(specs));
        }
        config.restack = j.value("restack", true);
        config.oof_folds = j.value("oof_folds", std::size_t{5});
        config.seed = j.value("seed", std::uint64_t{0});
        config.validate();
        return config;
    });
}

StackNetConfig load_stacknet_config(const std::filesystem::path& path) {
    return stacknet_config_from_json(read_json_file(path));
}

Json to_json(const RegressionTree& tree) {
    Json feature = Json::array();
    Json threshold = Json::array();
    Json value = Json::array();
    for (const auto& node : tree.nodes) {
        feature.push_back(node.feature);
        threshold.push_back(node.threshold);
        value.push_back(node.value);
    }
    return Json{{"feature", feature}, {"threshold", threshold}, {"value", value}};
}

RegressionTree tree_from_json(const Json& j) {
    const auto feature = j.at("feature").get<std::vector<std::int32_t>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto value = j.at("value").get<std::vector<double>>();
    if (feature.empty() || feature.size() != threshold.size() || feature.size() != value.size()) {
        throw ValidationError("tree arrays are empty or differ in length");
    }
    RegressionTree tree;
    tree.nodes.resize(feature.size());
    for (std::size_t i = 0; i < feature.size(); ++i) {
        tree.nodes[i].feature = feature[i];
        tree.nodes[i].threshold = threshold[i];
        tree.nodes[i].value = value[i];
    }
    std::size_t cursor = 0;
    rebuild_preorder(tree.nodes, cursor, 0);
    if (cursor != tree.nodes.size()) throw ValidationError("tree node list has trailing nodes");
    return tree;
}

Json to_json(const FittedEstimator& est) {
    Json params = std::visit(
        [](const auto& p) -> Json {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, LinearParams>) {
                return Json{{"weights", vec_to_json(p.weights)},
                            {"intercept", p.intercept},
                            {"noise_precision", p.noise_precision},
                            {"weight_precision", p.weight_precision},
                            {"iterations", p.iterations}};
            } else if constexpr (std::is_same_v<P, KernelParams>) {
                return Json{{"dual", vec_to_json(p.dual)},
                            {"support", column_major(p.support)},
                            {"kernel", p.kernel},
                            {"gamma", p.gamma}};
            } else if constexpr (std::is_same_v<P, ForestParams>) {
                Json trees = Json::array();
                for (const auto& t : p.trees) trees.push_back(to_json(t));
                return Json{{"trees", trees}};
            } else {
                Json stages = Json::array();
                for (const auto& t : p.stages) stages.push_back(to_json(t));
                return Json{{"initial", p.initial}, {"learning_rate", p.learning_rate}, {"stages", stages}};
            }
        },
        est.params);
    Json j = to_json(est.spec);
    j["train_shape"] = {est.train_rows, est.train_cols};
    j["parameters"] = std::move(params);
    return j;
}

FittedEstimator estimator_from_json(const Json& j) {
    return guarded("estimator", [&] {
        FittedEstimator est;
        est.spec = estimator_spec_from_json(j);
        est.train_rows = j.at("train_shape").at(0).get<Eigen::Index>();
        est.train_cols = j.at("train_shape").at(1).get<Eigen::Index>();
        const Json& p = j.at("parameters");
        switch (est.spec.kind) {
            case EstimatorKind::ridge:
            case EstimatorKind::bayesian_ridge: {
                LinearParams lp;
                lp.weights = vec_from_json(p.at("weights"));
                lp.intercept = p.at("intercept").get<double>();
                lp.noise_precision = p.value("noise_precision", 0.0);
                lp.weight_precision = p.value("weight_precision", 0.0);
                lp.iterations = p.value("iterations", 0);
                if (lp.weights.size() != est.train_cols) throw ValidationError("linear weights do not match width");
                est.params = std::move(lp);
                break;
            }
            case EstimatorKind::kernel_ridge: {
                KernelParams kp;
                kp.dual = vec_from_json(p.at("dual"));
                kp.support = matrix_from_column_major(p.at("support"), kp.dual.size(), est.train_cols);
                kp.kernel = p.at("kernel").get<std::string>();
                kp.gamma = p.value("gamma", 0.0);
                est.params = std::move(kp);
                break;
            }
            case EstimatorKind::random_forest:
            case EstimatorKind::extra_trees: {
                ForestParams fp;
                for (const auto& t : p.at("trees")) fp.trees.push_back(tree_from_json(t));
                if (fp.trees.empty()) throw ValidationError("forest has no trees");
                est.params = std::move(fp);
                break;
            }
            case EstimatorKind::gradient_boosting: {
                BoostingParams bp;
                bp.initial = p.at("initial").get<double>();
                bp.learning_rate = p.at("learning_rate").get<double>();
                for (const auto& t : p.at("stages")) bp.stages.push_back(tree_from_json(t));
                est.params = std::move(bp);
                break;
            }
        }
        return est;
    });
}

Json to_json(const TrainedStackNet& net) {
    Json layers = Json::array();
    for (const auto& layer : net.fitted_layers) {
        Json models = Json::array();
        for (const auto& est : layer) models.push_back(to_json(est));
        layers.push_back(models);
    }
    return Json{{"config", to_json(net.config)}, {"input_width", net.input_width}, {"fitted_layers", layers}};
}

TrainedStackNet stacknet_from_json(const Json& j) {
    return guarded("StackNet", [&] {
        TrainedStackNet net;
        net.config = stacknet_config_from_json(j.at("config"));
        net.input_width = j.at("input_width").get<Eigen::Index>();
        for (const auto& layer : j.at("fitted_layers")) {
            std::vector<FittedEstimator> models;
            for (const auto& m : layer) models.push_back(estimator_from_json(m));
            net.fitted_layers.push_back(std::move(models));
        }
        if (net.fitted_layers.size() != net.config.layers.size()) {
            throw ValidationError("StackNet layer count does not match its config");
        }
        for (std::size_t l = 0; l < net.fitted_layers.size(); ++l) {
            const Eigen::Index width = layer_input_width(net.config, net.input_width, l);
            if (net.fitted_layers[l].size() != net.config.layers[l].size()) {
                throw ValidationError("StackNet layer " + std::to_string(l + 1) + " has the wrong model count");
            }
            for (const auto& est : net.fitted_layers[l]) {
                if (est.train_cols != width) throw ValidationError("StackNet model width does not match wiring");
            }
        }
        return net;
    });
}

Json to_json(const CvReport& report) {
    Json stats = Json::array();
    for (const auto& s : report.fold_stats) {
        stats.push_back(Json{{"target_mean", s.target_mean}, {"target_std", s.target_std}, {"test_size", s.test_size}});
    }
    Json constituents = Json::array();
    for (const auto& c : report.constituents) {
        constituents.push_back(Json{{"label", c.label}, {"per_fold_mse", c.per_fold_mse}, {"pooled_mse", c.pooled_mse}});
    }
    return Json{{"format_version", kReportFormatVersion},
                {"per_fold_mse", report.per_fold_mse},
                {"pooled_mse", report.pooled_mse},
                {"baseline_mse", report.baseline_mse},
                {"fold_stats", stats},
                {"config_digest", report.config_digest},
                {"fold_pipeline_digests", report.fold_pipeline_digests},
                {"constituents", constituents},
                {"paper_protocol", report.paper_protocol},
                {"fold_assignments", report.fold_assignments},
                {"predictions", report.predictions}};
}

Json to_json(const ModelBundle& bundle) {
    return Json{{"format_version", bundle.format_version},
                {"pipeline", to_json(bundle.pipeline)},
                {"stacknet", to_json(bundle.stacknet)},
                {"provenance",
                 {{"seed", bundle.provenance.seed},
                  {"config_digest", bundle.provenance.config_digest},
                  {"created", bundle.provenance.created},
                  {"feature_names", bundle.provenance.feature_names},
                  {"target_name", bundle.provenance.target_name}}}};
}

ModelBundle bundle_from_json(const Json& j) {
    return guarded("bundle", [&] {
        ModelBundle b;
        if (!j.is_object() || !j.contains("format_version") || !j.at("format_version").is_number_integer() ||
            j.at("format_version").get<int>() != kBundleFormatVersion) {
            throw ValidationError("unsupported bundle version");
        }
        b.format_version = kBundleFormatVersion;
        b.pipeline = pipeline_from_json(j.at("pipeline"));
        b.stacknet = stacknet_from_json(j.at("stacknet"));
        const Json& prov = j.at("provenance");
        b.provenance.seed = prov.at("seed").get<std::uint64_t>();
        b.provenance.config_digest = prov.at("config_digest").get<std::string>();
        b.provenance.created = prov.value("created", std::string());
        b.provenance.feature_names = prov.at("feature_names").get<std::vector<std::string>>();
        b.provenance.target_name = prov.value("target_name", std::string());
        if (static_cast<Eigen::Index>(b.provenance.feature_names.size()) != b.pipeline.pca.input_dim()) {
            throw ValidationError("bundle feature names do not match the pipeline width");
        }
        if (b.stacknet.input_width != static_cast<Eigen::Index>(b.pipeline.selector.selected.size())) {
            throw ValidationError("bundle StackNet width does not match the pipeline output");
        }
        return b;
    });
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write error on '" + path.string() + "'");
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << to_json(bundle).dump() << '\n';
    if (!out) throw IoError("write error on '" + path.string() + "'");
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    return bundle_from_json(read_json_file(path));
}

}  // namespace gfstack
