#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lbsimex/cohort.hpp"
#include "lbsimex/errors.hpp"

namespace lbsimex {

// Column names for cohort CSV files. Defaults match the emitted schema
// `id, trunc_time, obs_time, status, w1..wp[, x1..xp]`; set the fields to
// ingest files with study-specific headers (los, lenfol, fstat, ...).
struct ColumnMap {
    std::string trunc = "trunc_time";
    std::string obs = "obs_time";
    std::string status = "status";
    std::vector<std::string> covariates;  // empty: take w1..wp from the header
    std::vector<std::string> truth;       // empty: take x1..xp if present
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

}  // namespace detail

inline Cohort load_cohort_csv(const std::string& path, const ColumnMap& columns = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) throw IoError(path + ": empty file");
    const auto header = detail::split_csv_line(header_line);
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < header.size(); ++j) index[header[j]] = j;

    auto require = [&](const std::string& name) {
        const auto it = index.find(name);
        if (it == index.end())
            throw ValidationError(path + ": missing column '" + name + "'");
        return it->second;
    };
    const std::size_t c_trunc = require(columns.trunc);
    const std::size_t c_obs = require(columns.obs);
    const std::size_t c_status = require(columns.status);

    std::vector<std::string> cov_names = columns.covariates;
    if (cov_names.empty())
        for (int j = 1; index.count("w" + std::to_string(j)); ++j)
            cov_names.push_back("w" + std::to_string(j));
    if (cov_names.empty())
        throw ValidationError(path + ": no covariate columns (w1..wp or an explicit list)");
    std::vector<std::size_t> c_cov;
    for (const auto& name : cov_names) c_cov.push_back(require(name));

    std::vector<std::string> truth_names = columns.truth;
    if (truth_names.empty())
        for (int j = 1; index.count("x" + std::to_string(j)); ++j)
            truth_names.push_back("x" + std::to_string(j));
    std::vector<std::size_t> c_truth;
    for (const auto& name : truth_names) c_truth.push_back(require(name));
    if (!c_truth.empty() && c_truth.size() != c_cov.size())
        throw ValidationError(path + ": truth columns do not match covariate count");

    std::vector<SubjectRecord> subjects;
    std::vector<Violation> problems;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        auto cell = [&](std::size_t j, const std::string& what, double& out) {
            if (j >= fields.size()) {
                problems.push_back({line_no, "missing cell", what + " column absent"});
                return false;
            }
            if (!detail::parse_double(fields[j], out)) {
                problems.push_back(
                    {line_no, "non-numeric cell", what + " = '" + fields[j] + "'"});
                return false;
            }
            return true;
        };
        SubjectRecord rec;
        double status_value = 0.0;
        bool ok = cell(c_trunc, columns.trunc, rec.trunc_time) &&
                  cell(c_obs, columns.obs, rec.obs_time) &&
                  cell(c_status, columns.status, status_value);
        rec.surrogate.resize(static_cast<Eigen::Index>(c_cov.size()));
        for (std::size_t j = 0; j < c_cov.size(); ++j) {
            double v = 0.0;
            ok = cell(c_cov[j], cov_names[j], v) && ok;
            rec.surrogate[static_cast<Eigen::Index>(j)] = v;
        }
        if (!c_truth.empty()) {
            Eigen::VectorXd x(static_cast<Eigen::Index>(c_truth.size()));
            for (std::size_t j = 0; j < c_truth.size(); ++j) {
                double v = 0.0;
                ok = cell(c_truth[j], truth_names[j], v) && ok;
                x[static_cast<Eigen::Index>(j)] = v;
            }
            rec.truth = std::move(x);
        }
        if (!ok) continue;
        if (status_value != 0.0 && status_value != 1.0) {
            problems.push_back({line_no, "status", "status must be 0 or 1"});
            continue;
        }
        rec.status = static_cast<int>(status_value);
        subjects.push_back(std::move(rec));
    }
    if (!problems.empty())
        throw ValidationError(path + ": malformed rows", problems);
    if (subjects.empty()) throw ValidationError(path + ": no data rows");

    // Re-map validation failures from subject index to file line number.
    auto violations = Cohort::check(subjects);
    if (!violations.empty()) {
        for (auto& v : violations) v.row += 2;  // header + 1-based lines
        std::string msg = path + ": invalid cohort";
        for (const auto& v : violations)
            msg += "\n  line " + std::to_string(v.row) + ": " + v.rule;
        throw ValidationError(msg, violations);
    }
    return Cohort::validate(subjects);
}

inline void write_cohort_csv(const std::string& path, const Cohort& cohort,
                             bool with_truth) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "id,trunc_time,obs_time,status";
    for (Eigen::Index j = 0; j < cohort.dim(); ++j) out << ",w" << (j + 1);
    if (with_truth)
        for (Eigen::Index j = 0; j < cohort.dim(); ++j) out << ",x" << (j + 1);
    out << "\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < cohort.n(); ++i) {
        out << (i + 1) << ',' << cohort.trunc_time(i) << ',' << cohort.obs_time(i) << ','
            << cohort.status(i);
        for (Eigen::Index j = 0; j < cohort.dim(); ++j) out << ',' << cohort.surrogate()(i, j);
        if (with_truth)
            for (Eigen::Index j = 0; j < cohort.dim(); ++j) out << ',' << cohort.truth()(i, j);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

// Flat `key = value` configuration files; '#' starts a comment.
inline std::map<std::string, std::string> parse_key_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected key = value");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw IoError(path + ":" + std::to_string(line_no) + ": empty key");
        out[key] = value;
    }
    return out;
}

}  // namespace lbsimex
