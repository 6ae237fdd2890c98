#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gfstack {

/// Subjects x named feature columns, with an optional regression target.
///
/// Invariants (checked by validate()): all values finite, subject ids unique,
/// column names unique, target length equals the row count.
struct FeatureTable {
    std::vector<std::string> subject_ids;
    std::vector<std::string> columns;
    Eigen::MatrixXd values;  // n x p
    std::optional<Eigen::VectorXd> target;
    std::string target_name;  // empty when no target

    std::size_t rows() const { return subject_ids.size(); }
    std::size_t cols() const { return columns.size(); }

    /// Throws ValidationError if any invariant is broken.
    void validate() const;
    /// Copy holding only the given rows, in the given order.
    FeatureTable subset(const std::vector<std::size_t>& rows) const;
    const Eigen::VectorXd& require_target() const;
};

/// Reads a comma-separated file whose first row is a header and whose first
/// column holds subject ids. When `target_column` is set that column becomes
/// the target; every other column is a feature.
FeatureTable load_csv(const std::filesystem::path& path,
                      const std::optional<std::string>& target_column = std::nullopt);

/// Writes the table with the target (if any) as the last column. Numbers use
/// shortest round-trip formatting, so load_csv(write_csv(t)) reproduces t.
void write_csv(const FeatureTable& table, const std::filesystem::path& path,
               const std::string& id_header = "subject_id");

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace gfstack
