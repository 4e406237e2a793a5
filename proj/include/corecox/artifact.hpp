#pragma once

// Fitted-model files. Doubles are written in shortest round-trip form, so a
// write/read cycle reproduces every matrix entry bit for bit.

#include "corecox/config.hpp"
#include "corecox/methods.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace corecox {

struct ModelArtifact {
    int format_version = kFormatVersion;
    std::string method;
    std::string fingerprint;
    std::vector<std::string> predictor_names;
    std::vector<std::string> outcome_names;
    Eigen::MatrixXd coefficients;
    std::optional<Eigen::MatrixXd> source_matrix;  // transfer fits only
    std::optional<Eigen::MatrixXd> residual;       // transfer fits only
    std::map<std::string, double> hyperparameters;
    std::vector<FitReport> reports;
    std::string standardization;
    Eigen::VectorXd standardization_mean;
    Eigen::VectorXd standardization_scale;
};

namespace detail {

inline Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json r = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
        throw std::invalid_argument(std::string("model file: ") + what + " has the wrong number of rows");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& r = j[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
            throw std::invalid_argument(std::string("model file: ") + what + " has the wrong number of columns");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

// NaN is not representable in JSON; it travels as null.
inline Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline double number_from(const Json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline Json report_to_json(const FitReport& r) {
    return {{"converged", r.converged},
            {"diverged", r.diverged},
            {"iterations", r.iterations},
            {"final_objective", number_or_null(r.final_objective)},
            {"grad_norm_at_exit", number_or_null(r.grad_norm_at_exit)},
            {"message", r.message}};
}

inline FitReport report_from_json(const Json& j) {
    FitReport r;
    r.converged = j.at("converged").get<bool>();
    r.diverged = j.at("diverged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.final_objective = number_from(j.at("final_objective"));
    r.grad_norm_at_exit = number_from(j.at("grad_norm_at_exit"));
    r.message = j.at("message").get<std::string>();
    return r;
}

inline Json vector_to_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Eigen::VectorXd vector_from_json(const Json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

}  // namespace detail

inline Json to_json(const ModelArtifact& a) {
    Json j;
    j["format_version"] = a.format_version;
    j["method"] = a.method;
    j["config_fingerprint"] = a.fingerprint;
    j["predictor_names"] = a.predictor_names;
    j["outcome_names"] = a.outcome_names;
    j["coefficients"] = detail::matrix_to_json(a.coefficients);
    if (a.source_matrix) j["source_matrix"] = detail::matrix_to_json(*a.source_matrix);
    if (a.residual) j["residual"] = detail::matrix_to_json(*a.residual);
    j["hyperparameters"] = a.hyperparameters;
    Json reports = Json::array();
    for (const auto& r : a.reports) reports.push_back(detail::report_to_json(r));
    j["reports"] = reports;
    j["standardization"] = {{"policy", a.standardization},
                            {"mean", detail::vector_to_json(a.standardization_mean)},
                            {"scale", detail::vector_to_json(a.standardization_scale)}};
    return j;
}

inline ModelArtifact artifact_from_json(const Json& j) {
    ModelArtifact a;
    a.format_version = j.at("format_version").get<int>();
    if (a.format_version != kFormatVersion) throw std::invalid_argument("model file: unsupported format_version");
    a.method = j.at("method").get<std::string>();
    a.fingerprint = j.at("config_fingerprint").get<std::string>();
    a.predictor_names = j.at("predictor_names").get<std::vector<std::string>>();
    a.outcome_names = j.at("outcome_names").get<std::vector<std::string>>();
    const auto p = static_cast<Eigen::Index>(a.predictor_names.size());
    const auto k = static_cast<Eigen::Index>(a.outcome_names.size());
    a.coefficients = detail::matrix_from_json(j.at("coefficients"), p, k, "coefficients");
    if (j.contains("source_matrix")) a.source_matrix = detail::matrix_from_json(j.at("source_matrix"), p, k, "source_matrix");
    if (j.contains("residual")) a.residual = detail::matrix_from_json(j.at("residual"), p, k, "residual");
    a.hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
    for (const auto& r : j.at("reports")) a.reports.push_back(detail::report_from_json(r));
    const Json& s = j.at("standardization");
    a.standardization = s.at("policy").get<std::string>();
    a.standardization_mean = detail::vector_from_json(s.at("mean"));
    a.standardization_scale = detail::vector_from_json(s.at("scale"));
    return a;
}

inline void write_artifact(const std::string& path, const ModelArtifact& a) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(a).dump(2) << '\n';
}

inline ModelArtifact read_artifact(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    return artifact_from_json(Json::parse(in));
}

}  // namespace corecox
