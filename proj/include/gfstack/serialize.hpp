#pragma once

#include "gfstack/learners.hpp"
#include "gfstack/preprocess.hpp"
#include "gfstack/report.hpp"
#include "gfstack/stacknet.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gfstack {

using Json = nlohmann::json;

inline constexpr int kPipelineFormatVersion = 1;
inline constexpr int kBundleFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string digest(const std::string& text);

// Doubles are written with shortest round-trip formatting, so every
// from_json(to_json(x)) below restores the numbers bit for bit.

Json to_json(const FittedPipeline& pipeline);
FittedPipeline pipeline_from_json(const Json& j);

Json to_json(const EstimatorSpec& spec);
EstimatorSpec estimator_spec_from_json(const Json& j);

Json to_json(const StackNetConfig& config);
StackNetConfig stacknet_config_from_json(const Json& j);
StackNetConfig load_stacknet_config(const std::filesystem::path& path);

/// Trees are stored as preorder node lists (parallel arrays feature,
/// threshold, value; feature -1 marks a leaf).
Json to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const Json& j);

Json to_json(const FittedEstimator& est);
FittedEstimator estimator_from_json(const Json& j);

Json to_json(const TrainedStackNet& net);
TrainedStackNet stacknet_from_json(const Json& j);

Json to_json(const CvReport& report);

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string created;  // ISO-8601 UTC; excluded from determinism checks
    std::vector<std::string> feature_names;
    std::string target_name;
};

struct ModelBundle {
    int format_version = kBundleFormatVersion;
    FittedPipeline pipeline;
    TrainedStackNet stacknet;
    Provenance provenance;
};

Json to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const Json& j);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace gfstack
