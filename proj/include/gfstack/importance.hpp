#pragma once

#include "gfstack/preprocess.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace gfstack {

/// Per-original-feature importance, non-negative, summing to 100.
struct ImportanceVector {
    std::vector<std::string> names;
    std::vector<double> values;
    bool uniform_fallback = false;  // every selected F value was zero
};

/// Back-projects the selected components' F values into feature space.
///
/// With F_k and lambda_k normalised to sum to one over the K selected
/// components and u_k their eigenvectors, feature j receives
/// sum_k |F_k * lambda_k * u_k[j]|; the result is rescaled to sum to 100.
ImportanceVector compute_importance(const FittedPipeline& pipeline, const std::vector<std::string>& names);

struct RankReport {
    std::vector<std::pair<std::string, double>> top;     // descending
    std::vector<std::pair<std::string, double>> bottom;   // ascending
};

/// Ties are broken alphabetically by name in both lists.
RankReport rank_report(const ImportanceVector& iv, std::size_t top, std::size_t bottom);

/// Two-decimal rendering; exact binary ties round half to even.
std::string format_importance(double value);

/// Aligned two-column table ("Variable description | Importance").
std::string format_rank_table(const std::vector<std::pair<std::string, double>>& rows, const std::string& title);

/// CSV with header `name,importance`, full precision, in feature order.
void write_importance_csv(const ImportanceVector& iv, const std::filesystem::path& path);

}  // namespace gfstack
