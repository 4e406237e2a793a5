#pragma once

// Cohort CSV ingestion (complete-case), CSV writing, and predictor
// standardization.
//
// Layout: the first column is a subject id; every outcome contributes a
// `time_<name>` and an `event_<name>` column; all remaining columns are
// predictors.

#include "corecox/survival.hpp"
#include "corecox/util.hpp"

#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace corecox {

struct ColumnMissingness {
    std::string column;
    int missing = 0;
    double fraction = 0.0;
};

struct MissingnessReport {
    std::string path;
    int rows_read = 0;
    int rows_kept = 0;
    std::vector<ColumnMissingness> columns;  // file order, id column excluded

    std::string to_text() const {
        std::ostringstream os;
        os << path << ": " << rows_read << " rows read, " << rows_kept << " complete cases kept\n";
        for (const auto& c : columns) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * c.fraction);
            os << "  " << c.column << ": " << c.missing << " missing (" << buf << ")\n";
        }
        return os.str();
    }
};

/// Raised for schema and content problems; the message carries the
/// missingness report when one was produced.
class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Cohort {
    SurvivalDataset data;
    std::vector<std::string> ids;
    MissingnessReport report;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Splits one CSV record. Double quotes group fields and "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool is_missing_token(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "null" || s == "NULL" || s == ".";
}

// Parses a finite double; returns false for missing or unparsable cells.
inline bool parse_cell(const std::string& s, double& v) {
    if (is_missing_token(s)) return false;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    return ec == std::errc() && ptr == e && std::isfinite(v);
}

}  // namespace detail

/// Reads a cohort file, dropping every row with a missing or unparsable cell.
/// Throws IngestError for missing outcome columns, event values outside
/// {0, 1}, negative times, or no complete rows.
inline Cohort ingest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IngestError(path + ": empty file");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
    const std::vector<std::string> header = detail::split_csv_line(line);
    if (header.size() < 2) throw IngestError(path + ": need an id column and at least one more column");

    std::vector<int> predictor_cols;
    std::vector<std::string> predictor_names, outcome_names;
    std::map<std::string, int> time_col, event_col;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h.rfind("time_", 0) == 0 && h.size() > 5) {
            if (!time_col.emplace(h.substr(5), static_cast<int>(c)).second) throw IngestError(path + ": duplicate column " + h);
            outcome_names.push_back(h.substr(5));
        } else if (h.rfind("event_", 0) == 0 && h.size() > 6) {
            if (!event_col.emplace(h.substr(6), static_cast<int>(c)).second) throw IngestError(path + ": duplicate column " + h);
        } else {
            predictor_cols.push_back(static_cast<int>(c));
            predictor_names.push_back(h);
        }
    }
    std::vector<std::string> missing_cols;
    for (const auto& [name, c] : time_col)
        if (!event_col.count(name)) missing_cols.push_back("event_" + name);
    for (const auto& [name, c] : event_col)
        if (!time_col.count(name)) missing_cols.push_back("time_" + name);
    if (!missing_cols.empty()) {
        std::string msg = path + ": missing required columns:";
        for (const auto& m : missing_cols) msg += " " + m;
        throw IngestError(msg);
    }
    if (outcome_names.empty()) throw IngestError(path + ": no time_<name>/event_<name> outcome columns");
    if (predictor_cols.empty()) throw IngestError(path + ": no predictor columns");

    MissingnessReport report;
    report.path = path;
    std::vector<int> missing(header.size(), 0);
    std::vector<std::vector<double>> kept_rows;
    std::vector<std::string> ids;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw IngestError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                              " fields, found " + std::to_string(cells.size()));
        ++report.rows_read;
        std::vector<double> values(header.size(), 0.0);
        bool complete = true;
        for (std::size_t c = 1; c < header.size(); ++c) {
            if (!detail::parse_cell(cells[c], values[c])) {
                ++missing[c];
                complete = false;
            }
        }
        for (const auto& [name, c] : event_col) {
            double v = 0.0;
            if (detail::parse_cell(cells[static_cast<std::size_t>(c)], v) && v != 0.0 && v != 1.0)
                throw IngestError(path + ":" + std::to_string(line_no) + ": event_" + name + " must be 0 or 1, got " +
                                  cells[static_cast<std::size_t>(c)]);
        }
        for (const auto& [name, c] : time_col) {
            double v = 0.0;
            if (detail::parse_cell(cells[static_cast<std::size_t>(c)], v) && v < 0.0)
                throw IngestError(path + ":" + std::to_string(line_no) + ": negative time in time_" + name);
        }
        if (!complete) continue;
        kept_rows.push_back(std::move(values));
        ids.push_back(cells[0]);
    }
    report.rows_kept = static_cast<int>(kept_rows.size());
    for (std::size_t c = 1; c < header.size(); ++c)
        report.columns.push_back({header[c], missing[c],
                                  report.rows_read ? static_cast<double>(missing[c]) / report.rows_read : 0.0});
    if (kept_rows.empty()) throw IngestError(path + ": empty dataset after complete-case filtering\n" + report.to_text());
    if (kept_rows.size() < 2) throw IngestError(path + ": fewer than 2 complete rows\n" + report.to_text());

    const auto n = static_cast<Eigen::Index>(kept_rows.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(predictor_cols.size()));
    std::vector<OutcomeColumn> outs(outcome_names.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = kept_rows[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < predictor_cols.size(); ++j)
            x(i, static_cast<Eigen::Index>(j)) = row[static_cast<std::size_t>(predictor_cols[j])];
    }
    for (std::size_t k = 0; k < outcome_names.size(); ++k) {
        outs[k].time.resize(n);
        outs[k].event.resize(static_cast<std::size_t>(n));
        const auto tc = static_cast<std::size_t>(time_col[outcome_names[k]]);
        const auto ec = static_cast<std::size_t>(event_col[outcome_names[k]]);
        for (Eigen::Index i = 0; i < n; ++i) {
            outs[k].time(i) = kept_rows[static_cast<std::size_t>(i)][tc];
            outs[k].event[static_cast<std::size_t>(i)] = kept_rows[static_cast<std::size_t>(i)][ec] == 1.0;
        }
    }
    return {SurvivalDataset(std::move(x), std::move(outs), std::move(predictor_names), std::move(outcome_names)),
            std::move(ids), std::move(report)};
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes a dataset in the ingest layout. Values are printed with 17
/// significant digits so reading back reproduces them exactly.
inline void write_csv(const std::string& path, const SurvivalDataset& data, const std::vector<std::string>& ids = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "id";
    for (const auto& p : data.predictor_names()) out << ',' << p;
    for (const auto& k : data.outcome_names()) out << ",time_" << k << ",event_" << k;
    out << '\n';
    for (int i = 0; i < data.n(); ++i) {
        out << (ids.empty() ? std::to_string(i + 1) : ids[static_cast<std::size_t>(i)]);
        for (int j = 0; j < data.p(); ++j) out << ',' << format_double(data.covariates()(i, j));
        for (int k = 0; k < data.k(); ++k)
            out << ',' << format_double(data.outcome(k).time(i)) << ','
                << (data.outcome(k).event[static_cast<std::size_t>(i)] ? 1 : 0);
        out << '\n';
    }
}

/// Per-predictor centering and scaling (population standard deviation). A
/// constant predictor keeps scale 1 so it maps to zeros.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x) {
        Standardizer s;
        s.mean = x.colwise().mean().transpose();
        s.scale.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (x.col(j).array() - s.mean(j)).square().mean();
            s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
        }
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        if (x.cols() != mean.size()) throw std::invalid_argument("Standardizer: column count mismatch");
        Eigen::MatrixXd out = x;
        for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = (x.col(j).array() - mean(j)) / scale(j);
        return out;
    }

    SurvivalDataset apply(const SurvivalDataset& d) const {
        return d.with_covariates(apply(d.covariates()), d.predictor_names());
    }
};

enum class StandardizationPolicy { source, per_cohort };

inline std::string to_string(StandardizationPolicy p) { return p == StandardizationPolicy::source ? "source" : "per_cohort"; }

inline StandardizationPolicy standardization_from_string(const std::string& s) {
    if (s == "source") return StandardizationPolicy::source;
    if (s == "per_cohort") return StandardizationPolicy::per_cohort;
    throw std::invalid_argument("unknown standardization policy: " + s);
}

struct LoadedCohorts {
    std::optional<Cohort> source;
    Cohort target;
    StandardizationPolicy policy = StandardizationPolicy::source;
    Standardizer source_transform;  // unset without a source
    Standardizer target_transform;
};

/// Ingests the cohorts and standardizes predictors. Under the default
/// policy both cohorts use source statistics so coefficients share a scale;
/// without a source cohort the target uses its own statistics.
inline LoadedCohorts load_cohorts(const std::string& source_path, const std::string& target_path,
                                  StandardizationPolicy policy) {
    LoadedCohorts out;
    out.policy = policy;
    out.target = ingest_csv(target_path);
    if (!source_path.empty()) {
        out.source = ingest_csv(source_path);
        if (out.source->data.predictor_names() != out.target.data.predictor_names() ||
            out.source->data.outcome_names() != out.target.data.outcome_names())
            throw IngestError("source and target files have different predictor or outcome columns");
        out.source_transform = Standardizer::fit(out.source->data.covariates());
        out.target_transform = policy == StandardizationPolicy::source
                                   ? out.source_transform
                                   : Standardizer::fit(out.target.data.covariates());
        out.source->data = out.source_transform.apply(out.source->data);
    } else {
        out.target_transform = Standardizer::fit(out.target.data.covariates());
    }
    out.target.data = out.target_transform.apply(out.target.data);
    return out;
}

}  // namespace corecox
