#include "gfstack/table.hpp"

#include "gfstack/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

namespace gfstack {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    const char* begin = text.data();
    const char* end = begin + text.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::string quote_if_needed(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            fields.push_back(was_quoted ? current : trim(current));
            current.clear();
            was_quoted = false;
        } else {
            current += c;
        }
    }
    fields.push_back(was_quoted ? current : trim(current));
    return fields;
}

std::string format_double(double value) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) throw ValidationError("cannot format number");
    return std::string(buf.data(), ptr);
}

void FeatureTable::validate() const {
    const auto n = subject_ids.size();
    if (static_cast<std::size_t>(values.rows()) != n) throw ValidationError("row count does not match subject ids");
    if (static_cast<std::size_t>(values.cols()) != columns.size()) {
        throw ValidationError("column count does not match column names");
    }
    if (!values.allFinite()) throw ValidationError("feature values must be finite");
    std::unordered_set<std::string> seen;
    for (const auto& id : subject_ids) {
        if (!seen.insert(id).second) throw ValidationError("duplicate subject id '" + id + "'");
    }
    seen.clear();
    for (const auto& c : columns) {
        if (!seen.insert(c).second) throw ValidationError("duplicate column name '" + c + "'");
    }
    if (target) {
        if (static_cast<std::size_t>(target->size()) != n) throw ValidationError("target length does not match rows");
        if (!target->allFinite()) throw ValidationError("target values must be finite");
    }
}

FeatureTable FeatureTable::subset(const std::vector<std::size_t>& rows) const {
    FeatureTable out;
    out.columns = columns;
    out.target_name = target_name;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
    if (target) out.target = Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()));
    out.subject_ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        out.subject_ids.push_back(subject_ids.at(rows[i]));
        out.values.row(static_cast<Eigen::Index>(i)) = values.row(r);
        if (target) (*out.target)[static_cast<Eigen::Index>(i)] = (*target)[r];
    }
    return out;
}

const Eigen::VectorXd& FeatureTable::require_target() const {
    if (!target) throw ValidationError("table has no target column");
    return *target;
}

FeatureTable load_csv(const std::filesystem::path& path, const std::optional<std::string>& target_column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("'" + path.string() + "' is empty; expected a header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);
    if (header.size() < 2) throw ValidationError("header needs a subject id column and at least one more column");

    std::optional<std::size_t> target_pos;
    if (target_column) {
        for (std::size_t c = 1; c < header.size(); ++c) {
            if (header[c] == *target_column) target_pos = c;
        }
        if (!target_pos) throw ValidationError("target column '" + *target_column + "' not found");
    }

    FeatureTable table;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (target_pos && c == *target_pos) continue;
        table.columns.push_back(header[c]);
    }
    if (target_pos) table.target_name = header[*target_pos];
    {
        std::unordered_set<std::string> names;
        for (std::size_t c = 1; c < header.size(); ++c) {
            if (!names.insert(header[c]).second) throw ValidationError("duplicate column name '" + header[c] + "'");
        }
    }

    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw ValidationError("row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                  " fields, expected " + std::to_string(header.size()));
        }
        table.subject_ids.push_back(fields[0]);
        std::vector<double> row;
        row.reserve(table.columns.size());
        for (std::size_t c = 1; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v)) {
                throw ValidationError("non-numeric cell at row " + std::to_string(line_no) + ", column " + header[c]);
            }
            if (!std::isfinite(v)) {
                throw ValidationError("non-finite cell at row " + std::to_string(line_no) + ", column " + header[c]);
            }
            if (target_pos && c == *target_pos) {
                targets.push_back(v);
            } else {
                row.push_back(v);
            }
        }
        rows.push_back(std::move(row));
    }
    if (in.bad()) throw IoError("read error on '" + path.string() + "'");

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(table.columns.size());
    table.values.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) table.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    if (target_pos) table.target = Eigen::Map<const Eigen::VectorXd>(targets.data(), n);
    table.validate();
    return table;
}

void write_csv(const FeatureTable& table, const std::filesystem::path& path, const std::string& id_header) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << quote_if_needed(id_header);
    for (const auto& c : table.columns) out << ',' << quote_if_needed(c);
    if (table.target) out << ',' << quote_if_needed(table.target_name.empty() ? "target" : table.target_name);
    out << '\n';
    for (std::size_t i = 0; i < table.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << quote_if_needed(table.subject_ids[i]);
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) out << ',' << format_double(table.values(r, j));
        if (table.target) out << ',' << format_double((*table.target)[r]);
        out << '\n';
    }
    if (!out) throw IoError("write error on '" + path.string() + "'");
}

}  // namespace gfstack
