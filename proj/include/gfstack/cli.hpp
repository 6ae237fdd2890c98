#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace gfstack::cli {

// Exit codes: 0 success, 1 user or validation error, 2 I/O error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitIo = 2;

struct TrainOptions {
    std::filesystem::path data;
    std::string target;
    std::optional<std::filesystem::path> config;
    std::size_t select_k = 24;
    double variance_threshold = 1e-8;
    std::optional<std::uint64_t> seed;  // falls back to the config's seed
    std::filesystem::path out;
};

struct PredictOptions {
    std::filesystem::path bundle;
    std::filesystem::path data;
    std::filesystem::path out;
    bool positional = false;  // take the first p feature columns in file order
};

struct CvOptions {
    std::filesystem::path data;
    std::string target;
    std::size_t folds = 10;
    std::size_t select_k = 24;
    double variance_threshold = 1e-8;
    std::optional<std::uint64_t> seed;  // falls back to the config's seed
    std::optional<std::filesystem::path> config;
    bool paper_protocol = false;
    bool per_model = false;
    std::optional<std::filesystem::path> out;
};

struct ImportanceOptions {
    std::filesystem::path bundle;
    std::size_t top = 10;
    std::size_t bottom = 10;
    std::optional<std::filesystem::path> out;
};

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_predict(const PredictOptions& options, std::ostream& out, std::ostream& err);
int cmd_cv(const CvOptions& options, std::ostream& out, std::ostream& err);
int cmd_importance(const ImportanceOptions& options, std::ostream& out, std::ostream& err);

/// Full command line (argv[0] is the program name).
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace gfstack::cli
