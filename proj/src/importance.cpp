#include "gfstack/importance.hpp"

#include "gfstack/errors.hpp"
#include "gfstack/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace gfstack {

ImportanceVector compute_importance(const FittedPipeline& pipeline, const std::vector<std::string>& names) {
    const auto& selected = pipeline.selector.selected;
    const Eigen::Index p = pipeline.pca.components.rows();
    if (selected.empty()) throw ValidationError("importance needs at least one selected component");
    if (static_cast<Eigen::Index>(names.size()) != p) {
        throw ValidationError("importance: " + std::to_string(names.size()) + " names for " + std::to_string(p) +
                              " features");
    }

    ImportanceVector iv;
    iv.names = names;
    double f_total = 0.0;
    double lambda_total = 0.0;
    for (const auto k : selected) {
        f_total += pipeline.selector.f_values[static_cast<Eigen::Index>(k)];
        lambda_total += pipeline.pca.eigenvalues[static_cast<Eigen::Index>(k)];
    }
    if (!(f_total > 0.0) || !std::isfinite(f_total)) {
        iv.values.assign(static_cast<std::size_t>(p), 100.0 / static_cast<double>(p));
        iv.uniform_fallback = true;
        return iv;
    }

    Eigen::VectorXd raw = Eigen::VectorXd::Zero(p);
    for (const auto k : selected) {
        const auto c = static_cast<Eigen::Index>(k);
        const double weight = (pipeline.selector.f_values[c] / f_total) * (pipeline.pca.eigenvalues[c] / lambda_total);
        raw += (weight * pipeline.pca.components.col(c)).cwiseAbs();
    }
    const double total = raw.sum();
    iv.values.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) iv.values[static_cast<std::size_t>(j)] = 100.0 * raw[j] / total;
    return iv;
}

RankReport rank_report(const ImportanceVector& iv, std::size_t top, std::size_t bottom) {
    const std::size_t p = iv.values.size();
    if (top + bottom > p) {
        throw ValidationError("requested " + std::to_string(top) + " top and " + std::to_string(bottom) +
                              " bottom entries but only " + std::to_string(p) + " features exist");
    }
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});

    RankReport report;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (iv.values[a] != iv.values[b]) return iv.values[a] > iv.values[b];
        return iv.names[a] < iv.names[b];
    });
    for (std::size_t i = 0; i < top; ++i) report.top.emplace_back(iv.names[order[i]], iv.values[order[i]]);

    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (iv.values[a] != iv.values[b]) return iv.values[a] < iv.values[b];
        return iv.names[a] < iv.names[b];
    });
    for (std::size_t i = 0; i < bottom; ++i) report.bottom.emplace_back(iv.names[order[i]], iv.values[order[i]]);
    return report;
}

std::string format_importance(double value) {
    // printf rounds the exact binary value; exact ties go to even under the
    // default rounding mode.
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

std::string format_rank_table(const std::vector<std::pair<std::string, double>>& rows, const std::string& title) {
    const std::string header_name = "Variable description";
    const std::string header_value = "Importance";
    std::size_t width = header_name.size();
    for (const auto& [name, _] : rows) width = std::max(width, name.size());

    std::ostringstream out;
    const std::string rule(width + 3 + header_value.size(), '-');
    out << title << '\n' << rule << '\n';
    out << header_name << std::string(width - header_name.size() + 3, ' ') << header_value << '\n' << rule << '\n';
    for (const auto& [name, value] : rows) {
        const std::string v = format_importance(value);
        out << name << std::string(width - name.size() + 3, ' ')
            << std::string(header_value.size() > v.size() ? header_value.size() - v.size() : 0, ' ') << v << '\n';
    }
    out << rule << '\n';
    return out.str();
}

void write_importance_csv(const ImportanceVector& iv, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "name,importance\n";
    for (std::size_t j = 0; j < iv.values.size(); ++j) {
        const auto& name = iv.names[j];
        if (name.find_first_of(",\"") != std::string::npos) {
            std::string quoted = "\"";
            for (char c : name) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            out << quoted << '"';
        } else {
            out << name;
        }
        out << ',' << format_double(iv.values[j]) << '\n';
    }
    if (!out) throw IoError("write error on '" + path.string() + "'");
}

}  // namespace gfstack
