#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "lbsimex/errors.hpp"

namespace lbsimex {

enum class ReportFormat { csv, json, markdown };

inline ReportFormat parse_report_format(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    if (s == "md" || s == "markdown") return ReportFormat::markdown;
    throw std::invalid_argument("unknown report format: " + s);
}

// One simulation-study summary line: a (model, censoring, error size,
// method) cell with per-coordinate Bias / Var / MSE / CP.
struct SummaryRow {
    std::string model;
    double censoring_rate = 0.0;
    double sigma_eta = 0.0;
    std::string method;
    Eigen::VectorXd bias, variance, mse, cp;  // cp in percent, NaN when no intervals

    bool operator==(const SummaryRow& o) const {
        auto eq = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
            if (a.size() != b.size()) return false;
            for (Eigen::Index i = 0; i < a.size(); ++i)
                if (a[i] != b[i] && !(std::isnan(a[i]) && std::isnan(b[i]))) return false;
            return true;
        };
        return model == o.model && censoring_rate == o.censoring_rate &&
               sigma_eta == o.sigma_eta && method == o.method && eq(bias, o.bias) &&
               eq(variance, o.variance) && eq(mse, o.mse) && eq(cp, o.cp);
    }
};

// One sensitivity-analysis line: assumed error size sigma_e (NaN for the
// naive row) with per-coordinate estimate, SE and two-sided p-value.
struct SensitivityRow {
    std::string model;
    double sigma_e = 0.0;
    std::string method;
    Eigen::VectorXd estimate, se, p_value;
};

namespace detail {

inline std::string num(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string num_fixed(double v, int digits) {
    if (std::isnan(v)) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        arr.push_back(std::isnan(v[i]) ? nlohmann::json() : nlohmann::json(v[i]));
    return arr;
}

inline Eigen::VectorXd vec_from_json(const nlohmann::json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i)
        v[static_cast<Eigen::Index>(i)] =
            arr[i].is_null() ? std::numeric_limits<double>::quiet_NaN()
                             : arr[i].get<double>();
    return v;
}

}  // namespace detail

inline void emit_report(const std::vector<SummaryRow>& rows, ReportFormat format,
                        std::ostream& out) {
    if (rows.empty()) throw std::invalid_argument("emit_report: no rows");
    const Eigen::Index p = rows.front().bias.size();
    switch (format) {
        case ReportFormat::csv: {
            out << "model,censoring_rate,sigma_eta,method";
            for (Eigen::Index j = 1; j <= p; ++j)
                out << ",bias" << j << ",var" << j << ",mse" << j << ",cp" << j;
            out << "\n";
            for (const auto& r : rows) {
                out << r.model << ',' << detail::num(r.censoring_rate) << ','
                    << detail::num(r.sigma_eta) << ',' << r.method;
                for (Eigen::Index j = 0; j < p; ++j)
                    out << ',' << detail::num(r.bias[j]) << ',' << detail::num(r.variance[j])
                        << ',' << detail::num(r.mse[j]) << ',' << detail::num(r.cp[j]);
                out << "\n";
            }
            break;
        }
        case ReportFormat::json: {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : rows) {
                arr.push_back({{"model", r.model},
                               {"censoring_rate", r.censoring_rate},
                               {"sigma_eta", r.sigma_eta},
                               {"method", r.method},
                               {"bias", detail::vec_to_json(r.bias)},
                               {"var", detail::vec_to_json(r.variance)},
                               {"mse", detail::vec_to_json(r.mse)},
                               {"cp", detail::vec_to_json(r.cp)}});
            }
            out << arr.dump(2) << "\n";
            break;
        }
        case ReportFormat::markdown: {
            out << "| model | cr | sigma_eta | method |";
            for (Eigen::Index j = 1; j <= p; ++j)
                out << " Bias" << j << " | Var" << j << " | MSE" << j << " | CP" << j << " |";
            out << "\n|---|---|---|---|";
            for (Eigen::Index j = 0; j < p; ++j) out << "---|---|---|---|";
            out << "\n";
            for (const auto& r : rows) {
                out << "| " << r.model << " | " << detail::num_fixed(r.censoring_rate, 2)
                    << " | " << detail::num_fixed(r.sigma_eta, 3) << " | " << r.method
                    << " |";
                for (Eigen::Index j = 0; j < p; ++j)
                    out << ' ' << detail::num_fixed(r.bias[j], 3) << " | "
                        << detail::num_fixed(r.variance[j], 3) << " | "
                        << detail::num_fixed(r.mse[j], 3) << " | "
                        << detail::num_fixed(r.cp[j], 1) << " |";
                out << "\n";
            }
            break;
        }
    }
}

inline std::vector<SummaryRow> parse_summary_json(std::istream& in) {
    nlohmann::json arr = nlohmann::json::parse(in);
    std::vector<SummaryRow> rows;
    for (const auto& item : arr) {
        SummaryRow r;
        r.model = item.at("model").get<std::string>();
        r.censoring_rate = item.at("censoring_rate").get<double>();
        r.sigma_eta = item.at("sigma_eta").get<double>();
        r.method = item.at("method").get<std::string>();
        r.bias = detail::vec_from_json(item.at("bias"));
        r.variance = detail::vec_from_json(item.at("var"));
        r.mse = detail::vec_from_json(item.at("mse"));
        r.cp = detail::vec_from_json(item.at("cp"));
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void emit_sensitivity(const std::vector<SensitivityRow>& rows, ReportFormat format,
                             std::ostream& out) {
    if (rows.empty()) throw std::invalid_argument("emit_sensitivity: no rows");
    const Eigen::Index p = rows.front().estimate.size();
    switch (format) {
        case ReportFormat::csv: {
            out << "model,sigma_e,method";
            for (Eigen::Index j = 1; j <= p; ++j)
                out << ",est" << j << ",se" << j << ",p" << j;
            out << "\n";
            for (const auto& r : rows) {
                out << r.model << ',' << detail::num(r.sigma_e) << ',' << r.method;
                for (Eigen::Index j = 0; j < p; ++j)
                    out << ',' << detail::num(r.estimate[j]) << ',' << detail::num(r.se[j])
                        << ',' << detail::num(r.p_value[j]);
                out << "\n";
            }
            break;
        }
        case ReportFormat::json: {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : rows)
                arr.push_back({{"model", r.model},
                               {"sigma_e", std::isnan(r.sigma_e) ? nlohmann::json()
                                                                 : nlohmann::json(r.sigma_e)},
                               {"method", r.method},
                               {"est", detail::vec_to_json(r.estimate)},
                               {"se", detail::vec_to_json(r.se)},
                               {"p", detail::vec_to_json(r.p_value)}});
            out << arr.dump(2) << "\n";
            break;
        }
        case ReportFormat::markdown: {
            out << "| model | sigma_e | method |";
            for (Eigen::Index j = 1; j <= p; ++j)
                out << " EST" << j << " | SE" << j << " | p" << j << " |";
            out << "\n|---|---|---|";
            for (Eigen::Index j = 0; j < p; ++j) out << "---|---|---|";
            out << "\n";
            for (const auto& r : rows) {
                out << "| " << r.model << " | " << detail::num_fixed(r.sigma_e, 2) << " | "
                    << r.method << " |";
                for (Eigen::Index j = 0; j < p; ++j)
                    out << ' ' << detail::num_fixed(r.estimate[j], 3) << " | "
                        << detail::num_fixed(r.se[j], 3) << " | "
                        << (std::isnan(r.p_value[j]) ? std::string("-")
                                                     : detail::num(r.p_value[j]))
                        << " |";
                out << "\n";
            }
            break;
        }
    }
}

inline void write_report_file(const std::string& path, ReportFormat format,
                              const std::vector<SummaryRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    emit_report(rows, format, out);
    if (!out) throw IoError("write failed: " + path);
}

inline void write_sensitivity_file(const std::string& path, ReportFormat format,
                                   const std::vector<SensitivityRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    emit_sensitivity(rows, format, out);
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace lbsimex
