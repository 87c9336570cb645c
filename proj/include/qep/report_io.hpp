#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "qep/diagnostics.hpp"
#include "qep/format.hpp"

namespace qep {

// CSV layout: '#'-prefixed config echo, one row per block m, then a
// key,value trailer with the scalar bounds.
inline void write_report_csv(const DiagnosticsReport& report, std::ostream& out) {
    for (const auto& [key, value] : report.config) {
        out << "# " << key << " = " << value << '\n';
    }
    out << "m,delta_m,residual_fro\n";
    for (std::size_t m = 0; m < report.delta_series.size(); ++m) {
        out << (m + 1) << ',' << fmt_double(report.delta_series[m]) << ','
            << fmt_double(report.residual_fro[m]) << '\n';
    }
    out << '\n';
    out << "bound_u," << fmt_double(report.bound_u) << '\n';
    out << "uniform_bound," << fmt_double(report.uniform_bound) << '\n';
    out << "first_order_bound," << fmt_double(report.first_order_bound) << '\n';
    out << "gain_G," << fmt_double(report.gain_G) << '\n';
    out << "ratio_r," << fmt_double(report.ratio_r) << '\n';
}

inline void write_report_json(const DiagnosticsReport& report, std::ostream& out) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [key, value] : report.config) config[key] = value;
    j["config"] = std::move(config);
    auto series = nlohmann::ordered_json::array();
    for (std::size_t m = 0; m < report.delta_series.size(); ++m) {
        series.push_back({{"m", m + 1}, {"delta_m", report.delta_series[m]}});
    }
    j["delta_series"] = std::move(series);
    j["residual_fro"] = report.residual_fro;
    j["bound_u"] = report.bound_u;
    j["uniform_bound"] = report.uniform_bound;
    j["first_order_bound"] = report.first_order_bound;
    j["gain_G"] = report.gain_G;
    j["ratio_r"] = report.ratio_r;
    out << j.dump(2) << '\n';
}

}  // namespace qep
