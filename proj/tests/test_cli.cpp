#include "gfstack/cli.hpp"
#include "gfstack/serialize.hpp"
#include "gfstack/table.hpp"
#include "support/synthetic.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gfstack;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "gfstack");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "gfstack_cli_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path small_config_file() {
    const fs::path path = scratch("small_config.json");
    std::ofstream(path) << R"({"layers": [[{"kind": "bayesian_ridge"},
                                          {"kind": "random_forest", "n_estimators": 10, "max_depth": 4},
                                          {"kind": "extra_trees", "n_estimators": 10, "max_depth": 4}],
                                         [{"kind": "ridge", "alpha": 10}]],
                              "oof_folds": 2, "seed": 5})";
    return path;
}

fs::path training_csv() {
    const fs::path path = scratch("train.csv");
    if (!fs::exists(path)) write_csv(testing::brain_like_table(200, 12, 4, 0.5, 77), path);
    return path;
}

}  // namespace

TEST_CASE("train is deterministic and predict round-trips") {
    const auto data = training_csv();
    const auto config = small_config_file();
    const auto b1 = scratch("b1.json"), b2 = scratch("b2.json");
    const auto first = run_cli({"train", "--data", data.string(), "--target", "gf", "--config", config.string(),
                                "--select-k", "4", "--seed", "9", "--out", b1.string()});
    REQUIRE(first.code == cli::kExitOk);
    CHECK(first.out.find("rows: 200") != std::string::npos);
    CHECK(first.out.find("-> 4") != std::string::npos);
    REQUIRE(run_cli({"train", "--data", data.string(), "--target", "gf", "--config", config.string(), "--select-k",
                     "4", "--seed", "9", "--out", b2.string()})
                .code == cli::kExitOk);
    Json j1 = read_json_file(b1), j2 = read_json_file(b2);
    CHECK(j1["provenance"]["seed"] == 9);
    j1["provenance"].erase("created");
    j2["provenance"].erase("created");
    CHECK(j1.dump() == j2.dump());

    const auto p1 = scratch("p1.csv");
    REQUIRE(run_cli({"predict", "--bundle", b1.string(), "--data", data.string(), "--out", p1.string()}).code == 0);
    const FeatureTable preds = load_csv(p1);
    CHECK(preds.rows() == 200);
    CHECK(preds.columns == std::vector<std::string>{"prediction"});
    CHECK(slurp(p1).rfind("subject_id,prediction\n", 0) == 0);

    // Same rows, columns reversed.
    const FeatureTable original = load_csv(data, std::string("gf"));
    FeatureTable reordered = original;
    std::reverse(reordered.columns.begin(), reordered.columns.end());
    reordered.values = original.values.rowwise().reverse();
    const auto shuffled_csv = scratch("reordered.csv");
    write_csv(reordered, shuffled_csv);
    const auto p2 = scratch("p2.csv");
    REQUIRE(run_cli({"predict", "--bundle", b1.string(), "--data", shuffled_csv.string(), "--out", p2.string()}).code ==
            0);
    CHECK(slurp(p1) == slurp(p2));

    // The bundle reproduces in-memory predictions bit for bit.
    const ModelBundle bundle = load_bundle(b1);
    const Eigen::VectorXd direct = predict_stacknet(bundle.stacknet, transform(bundle.pipeline, original.values));
    CHECK((preds.values.col(0).array() == direct.array()).all());

    FeatureTable missing = original;
    missing.columns[3] = "renamed";
    const auto missing_csv = scratch("missing.csv");
    write_csv(missing, missing_csv);
    const auto bad = run_cli({"predict", "--bundle", b1.string(), "--data", missing_csv.string(), "--out",
                              scratch("p3.csv").string()});
    CHECK(bad.code == cli::kExitUsage);
    CHECK(bad.err.find(original.columns[3]) != std::string::npos);

    Json tampered = read_json_file(b1);
    tampered["format_version"] = 7;
    const auto tampered_path = scratch("tampered.json");
    write_json_file(tampered, tampered_path);
    const auto t = run_cli({"predict", "--bundle", tampered_path.string(), "--data", data.string(), "--out",
                            scratch("p4.csv").string()});
    CHECK(t.code == cli::kExitUsage);
    CHECK(t.err.find("unsupported bundle version") != std::string::npos);

    const auto imp_csv = scratch("importance.csv");
    const auto imp = run_cli({"importance", "--bundle", b1.string(), "--top", "3", "--bottom", "3", "--out",
                              imp_csv.string()});
    CHECK(imp.code == 0);
    const FeatureTable imp_table = load_csv(imp_csv);
    CHECK(imp_table.rows() == 12);
    CHECK(std::abs(imp_table.values.col(0).sum() - 100.0) < 1e-6);
    CHECK(run_cli({"importance", "--bundle", b1.string(), "--top", "200"}).code == cli::kExitUsage);
}

TEST_CASE("train error paths") {
    const auto data = training_csv();
    const auto missing = run_cli({"train", "--data", data.string(), "--target", "nope", "--out",
                                  scratch("never.json").string()});
    CHECK(missing.code == cli::kExitUsage);
    CHECK(missing.err.find("nope") != std::string::npos);
    CHECK(run_cli({"train", "--data", scratch("absent.csv").string(), "--target", "gf", "--out",
                   scratch("never.json").string()})
              .code == cli::kExitIo);
    CHECK(run_cli({"train", "--target", "gf"}).code == cli::kExitUsage);
    CHECK(run_cli({"bogus"}).code == cli::kExitUsage);
}

TEST_CASE("train without a config uses the eleven-model net") {
    const auto csv = scratch("tiny.csv");
    write_csv(testing::brain_like_table(20, 3, 2, 0.5, 3), csv);
    const auto r = run_cli({"train", "--data", csv.string(), "--target", "gf", "--select-k", "1", "--out",
                            scratch("tiny.json").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("models: 11 in 3 layers") != std::string::npos);
}

TEST_CASE("cv command") {
    const auto ten = scratch("ten.csv");
    write_csv(testing::brain_like_table(10, 4, 2, 0.5, 4), ten);
    const auto config = small_config_file();
    const auto ok = run_cli({"cv", "--data", ten.string(), "--target", "gf", "--folds", "3", "--select-k", "1",
                             "--config", config.string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("3-fold") != std::string::npos);
    CHECK(run_cli({"cv", "--data", ten.string(), "--target", "gf", "--folds", "20"}).code == cli::kExitUsage);

    const auto report = scratch("report.json");
    const auto signal = run_cli({"cv", "--data", training_csv().string(), "--target", "gf", "--folds", "5",
                                 "--select-k", "4", "--config", config.string(), "--per-model", "--out",
                                 report.string()});
    REQUIRE(signal.code == 0);
    const Json j = read_json_file(report);
    CHECK(j["pooled_mse"].get<double>() < j["baseline_mse"].get<double>());
    CHECK(j["constituents"].size() == 4);
    CHECK(signal.out.find("Baseline") != std::string::npos);
}
