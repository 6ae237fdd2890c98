#include "gfstack/cli.hpp"

#include "gfstack/errors.hpp"
#include "gfstack/harness.hpp"
#include "gfstack/importance.hpp"
#include "gfstack/preprocess.hpp"
#include "gfstack/serialize.hpp"
#include "gfstack/stacknet.hpp"
#include "gfstack/table.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <ostream>

namespace gfstack::cli {

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}

StackNetConfig resolve_config(const std::optional<std::filesystem::path>& path,
                              const std::optional<std::uint64_t>& seed, std::ostream& err) {
    StackNetConfig config = path ? load_stacknet_config(*path) : default_config();
    if (seed) config.seed = *seed;
    for (const auto& w : config.warnings()) err << "warning: " << w << '\n';
    return config;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Eigen::MatrixXd align_columns(const FeatureTable& table, const std::vector<std::string>& names, bool positional) {
    const auto p = static_cast<Eigen::Index>(names.size());
    if (positional) {
        if (table.values.cols() < p) {
            throw ValidationError("input has " + std::to_string(table.values.cols()) + " feature columns, bundle expects " +
                                  std::to_string(p));
        }
        return table.values.leftCols(p);
    }
    Eigen::MatrixXd out(table.values.rows(), p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& name = names[static_cast<std::size_t>(j)];
        const auto it = std::find(table.columns.begin(), table.columns.end(), name);
        if (it == table.columns.end()) throw ValidationError("input is missing column '" + name + "'");
        out.col(j) = table.values.col(std::distance(table.columns.begin(), it));
    }
    return out;
}

}  // namespace

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const FeatureTable table = load_csv(options.data, options.target);
        const StackNetConfig config = resolve_config(options.config, options.seed, err);
        const Eigen::VectorXd& y = table.require_target();

        ModelBundle bundle;
        bundle.pipeline = fit_pipeline(table, options.select_k, options.variance_threshold);
        const Eigen::MatrixXd features = transform(bundle.pipeline, table.values);
        bundle.stacknet = fit_stacknet(config, features, y, SeededRng(config.seed));
        bundle.provenance.seed = config.seed;
        bundle.provenance.config_digest = digest(to_json(config).dump());
        bundle.provenance.created = utc_timestamp();
        bundle.provenance.feature_names = table.columns;
        bundle.provenance.target_name = table.target_name;
        save_bundle(bundle, options.out);

        const auto stats = dataset_stats(y);
        const auto chain = bundle.pipeline.chain();
        const double train_mse = mse(predict_stacknet(bundle.stacknet, features), y);
        out << "rows: " << table.rows() << '\n'
            << "target mean: " << stats.mean << '\n'
            << "target std: " << stats.std << '\n'
            << "feature chain: " << chain.features << " -> " << chain.components << " -> " << chain.surviving
            << " -> " << chain.selected << '\n'
            << "models: " << config.model_count() << " in " << config.layers.size() << " layers\n"
            << "training MSE: " << train_mse << '\n'
            << "bundle: " << options.out.string() << '\n';
        if (bundle.pipeline.pca.rank_fallback) err << "warning: PCA rank selection fell back to rank 1\n";
        return kExitOk;
    });
}

int cmd_predict(const PredictOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ModelBundle bundle = load_bundle(options.bundle);
        const FeatureTable table = load_csv(options.data);
        const Eigen::MatrixXd raw = align_columns(table, bundle.provenance.feature_names, options.positional);
        const Eigen::VectorXd predictions = predict_stacknet(bundle.stacknet, transform(bundle.pipeline, raw));

        std::ofstream file(options.out);
        if (!file) throw IoError("cannot write '" + options.out.string() + "'");
        file << "subject_id,prediction\n";
        for (std::size_t i = 0; i < table.rows(); ++i) {
            file << table.subject_ids[i] << ',' << format_double(predictions[static_cast<Eigen::Index>(i)]) << '\n';
        }
        if (!file) throw IoError("write error on '" + options.out.string() + "'");
        out << "predicted " << table.rows() << " rows -> " << options.out.string() << '\n';
        return kExitOk;
    });
}

int cmd_cv(const CvOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const FeatureTable table = load_csv(options.data, options.target);
        const StackNetConfig config = resolve_config(options.config, options.seed, err);

        CvExperimentOptions cv;
        cv.k_folds = options.folds;
        cv.select_k = options.select_k;
        cv.variance_threshold = options.variance_threshold;
        cv.seed = config.seed;
        cv.paper_protocol = options.paper_protocol;
        cv.evaluate_constituents = options.per_model;
        const CvReport report = run_cv_experiment(table, config, cv);

        out << options.folds << "-fold cross-validation"
            << (options.paper_protocol ? " (preprocessing fitted once on all rows)" : "") << '\n'
            << format_fold_table(report) << format_cv_table(report) << "pooled MSE: " << report.pooled_mse << '\n'
            << "baseline MSE: " << report.baseline_mse << '\n';
        if (options.out) write_json_file(to_json(report), *options.out);
        return kExitOk;
    });
}

int cmd_importance(const ImportanceOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ModelBundle bundle = load_bundle(options.bundle);
        const ImportanceVector iv = compute_importance(bundle.pipeline, bundle.provenance.feature_names);
        if (iv.uniform_fallback) err << "warning: all selected F values are zero; importance is uniform\n";
        const RankReport report = rank_report(iv, options.top, options.bottom);
        out << format_rank_table(report.top, "Top " + std::to_string(options.top) + " most important variables")
            << '\n'
            << format_rank_table(report.bottom,
                                 "Top " + std::to_string(options.bottom) + " least important variables");
        if (options.out) write_importance_csv(iv, *options.out);
        return kExitOk;
    });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Feature pipeline + restacking StackNet regression"};
    app.require_subcommand(1);

    TrainOptions train;
    std::uint64_t train_seed = 0;
    std::string train_config;
    auto* train_cmd = app.add_subcommand("train", "Fit preprocessing and StackNet on all rows, write a model bundle");
    train_cmd->add_option("--data", train.data, "Training CSV")->required();
    train_cmd->add_option("--target", train.target, "Target column name")->required();
    train_cmd->add_option("--config", train_config, "StackNet config JSON (default: built-in 11-model net)");
    train_cmd->add_option("--select-k", train.select_k, "Number of selected components")->capture_default_str();
    train_cmd->add_option("--variance-threshold", train.variance_threshold, "Minimum component variance")
        ->capture_default_str();
    auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "Random seed");
    train_cmd->add_option("--out", train.out, "Bundle path")->required();

    PredictOptions predict_opts;
    auto* predict_cmd = app.add_subcommand("predict", "Predict with a trained bundle");
    predict_cmd->add_option("--bundle", predict_opts.bundle, "Model bundle")->required();
    predict_cmd->add_option("--data", predict_opts.data, "Input CSV")->required();
    predict_cmd->add_option("--out", predict_opts.out, "Output CSV")->required();
    predict_cmd->add_flag("--positional", predict_opts.positional, "Match feature columns by position, not name");

    CvOptions cv;
    std::uint64_t cv_seed = 0;
    std::string cv_config;
    std::string cv_out;
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validate the full pipeline");
    cv_cmd->add_option("--data", cv.data, "Training CSV")->required();
    cv_cmd->add_option("--target", cv.target, "Target column name")->required();
    cv_cmd->add_option("--folds", cv.folds, "Fold count")->capture_default_str();
    cv_cmd->add_option("--select-k", cv.select_k, "Number of selected components")->capture_default_str();
    cv_cmd->add_option("--variance-threshold", cv.variance_threshold, "Minimum component variance")
        ->capture_default_str();
    auto* cv_seed_opt = cv_cmd->add_option("--seed", cv_seed, "Random seed");
    cv_cmd->add_option("--config", cv_config, "StackNet config JSON");
    cv_cmd->add_flag("--paper-protocol", cv.paper_protocol, "Fit preprocessing once on all rows before splitting");
    cv_cmd->add_flag("--per-model", cv.per_model, "Also score every member model on its own");
    cv_cmd->add_option("--out", cv_out, "Write the report as JSON");

    ImportanceOptions imp;
    std::string imp_out;
    auto* imp_cmd = app.add_subcommand("importance", "Per-feature importance from a bundle");
    imp_cmd->add_option("--bundle", imp.bundle, "Model bundle")->required();
    imp_cmd->add_option("--top", imp.top, "Rows in the most-important table")->capture_default_str();
    imp_cmd->add_option("--bottom", imp.bottom, "Rows in the least-important table")->capture_default_str();
    imp_cmd->add_option("--out", imp_out, "Write all importances as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (train_cmd->parsed()) {
        if (*train_seed_opt) train.seed = train_seed;
        if (!train_config.empty()) train.config = train_config;
        return cmd_train(train, out, err);
    }
    if (predict_cmd->parsed()) return cmd_predict(predict_opts, out, err);
    if (cv_cmd->parsed()) {
        if (*cv_seed_opt) cv.seed = cv_seed;
        if (!cv_config.empty()) cv.config = cv_config;
        if (!cv_out.empty()) cv.out = cv_out;
        return cmd_cv(cv, out, err);
    }
    if (!imp_out.empty()) imp.out = imp_out;
    return cmd_importance(imp, out, err);
}

}  // namespace gfstack::cli
