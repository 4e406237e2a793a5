#pragma once

// Experiment configuration: a JSON document with every default filled in
// on load. The fingerprint hashes the canonical (key-sorted) dump, so key
// order and omitted-vs-default fields do not change it.

#include "corecox/csv.hpp"
#include "corecox/cv.hpp"
#include "corecox/simulation.hpp"
#include "corecox/util.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace corecox {

inline constexpr int kFormatVersion = 1;

using Json = nlohmann::json;

struct DataPaths {
    std::string source;  // may be empty: target-only methods
    std::string target;
};

struct StudySettings {
    std::vector<Method> methods{Method::cox, Method::core_cox, Method::lr_mtl_source};
    int recovery_replicates = 50;
    int coverage_experiments = 200;
    TuningCriterion criterion = TuningCriterion::partial_likelihood;
    int inner_folds = 5;
};

struct ExperimentConfig {
    std::optional<DataPaths> data;
    std::optional<SimConfig> simulation;
    StandardizationPolicy standardization = StandardizationPolicy::source;
    std::vector<Method> methods;
    // Empty vectors mean "use the default grid for the data's p and K".
    HyperGrid grid;
    CVPlan cv;
    TuningCriterion criterion = TuningCriterion::c_index;
    std::vector<std::uint64_t> seeds;
    std::string output_dir;
    double lift_fraction = 0.15;
    int bootstrap_replicates = 200;
    double bootstrap_level = 0.95;
    std::optional<Json> fit_hyperparameters;  // fixed point for `fit`; tuned when absent
    bool fit_hazard_ratios = false;
    StudySettings study;

    HyperGrid resolved_grid(int p, int k) const {
        HyperGrid g = HyperGrid::defaults(p, k);
        if (!grid.ranks.empty()) g.ranks = grid.ranks;
        if (!grid.lambdas.empty()) g.lambdas = grid.lambdas;
        if (!grid.factor_lambdas.empty()) g.factor_lambdas = grid.factor_lambdas;
        if (!grid.residual_lambdas.empty()) g.residual_lambdas = grid.residual_lambdas;
        g.residual_kind = grid.residual_kind;
        g.per_outcome_residual_lambda = grid.per_outcome_residual_lambda;
        return g;
    }
};

namespace detail {

inline std::string criterion_name(TuningCriterion c) {
    return c == TuningCriterion::c_index ? "c_index" : "partial_likelihood";
}

inline TuningCriterion criterion_from_name(const std::string& s) {
    if (s == "c_index") return TuningCriterion::c_index;
    if (s == "partial_likelihood") return TuningCriterion::partial_likelihood;
    throw std::invalid_argument("unknown tuning criterion: " + s);
}

inline Json sim_to_json(const SimConfig& s) {
    return Json{{"n_source", s.n_source},
                {"n_target", s.n_target},
                {"p", s.p},
                {"k", s.k},
                {"true_rank", s.true_rank},
                {"shift_sparsity", s.shift_sparsity},
                {"shift_magnitude", s.shift_magnitude},
                {"baseline", s.baseline == BaselineKind::exponential ? "exponential" : "weibull"},
                {"baseline_rate", s.baseline_rate},
                {"weibull_shape", s.weibull_shape},
                {"weibull_scale", s.weibull_scale},
                {"censoring_rate_target", s.censoring_rate_target},
                {"covariate_correlation", s.covariate_correlation},
                {"rng_seed", s.rng_seed}};
}

// Reads `key` into `out` when present; unknown keys are rejected by the caller.
template <class T>
void read_opt(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void reject_unknown(const Json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
}

inline SimConfig sim_from_json(const Json& j) {
    reject_unknown(j,
                   {"n_source", "n_target", "p", "k", "true_rank", "shift_sparsity", "shift_magnitude", "baseline",
                    "baseline_rate", "weibull_shape", "weibull_scale", "censoring_rate_target",
                    "covariate_correlation", "rng_seed"},
                   "simulation");
    SimConfig s;
    read_opt(j, "n_source", s.n_source);
    read_opt(j, "n_target", s.n_target);
    read_opt(j, "p", s.p);
    read_opt(j, "k", s.k);
    read_opt(j, "true_rank", s.true_rank);
    read_opt(j, "shift_sparsity", s.shift_sparsity);
    read_opt(j, "shift_magnitude", s.shift_magnitude);
    if (j.contains("baseline")) {
        const std::string b = j.at("baseline").get<std::string>();
        if (b == "exponential")
            s.baseline = BaselineKind::exponential;
        else if (b == "weibull")
            s.baseline = BaselineKind::weibull;
        else
            throw std::invalid_argument("unknown baseline: " + b);
    }
    read_opt(j, "baseline_rate", s.baseline_rate);
    read_opt(j, "weibull_shape", s.weibull_shape);
    read_opt(j, "weibull_scale", s.weibull_scale);
    read_opt(j, "censoring_rate_target", s.censoring_rate_target);
    read_opt(j, "covariate_correlation", s.covariate_correlation);
    read_opt(j, "rng_seed", s.rng_seed);
    s.validate();
    return s;
}

inline Json method_list(const std::vector<Method>& ms) {
    Json a = Json::array();
    for (Method m : ms) a.push_back(method_name(m));
    return a;
}

inline std::vector<Method> methods_from(const Json& j) {
    std::vector<Method> out;
    for (const auto& v : j) out.push_back(method_from_name(v.get<std::string>()));
    return out;
}

}  // namespace detail

/// Canonical JSON form with all defaults present.
inline Json to_json(const ExperimentConfig& c) {
    Json j;
    j["format_version"] = kFormatVersion;
    if (c.data) j["data"] = {{"source", c.data->source}, {"target", c.data->target}};
    if (c.simulation) j["simulation"] = detail::sim_to_json(*c.simulation);
    j["standardization"] = to_string(c.standardization);
    j["methods"] = detail::method_list(c.methods);
    j["grids"] = {{"ranks", c.grid.ranks},
                  {"lambdas", c.grid.lambdas},
                  {"factor_lambdas", c.grid.factor_lambdas},
                  {"residual_lambdas", c.grid.residual_lambdas},
                  {"residual_penalty", to_string(c.grid.residual_kind)},
                  {"per_outcome_residual_lambda", c.grid.per_outcome_residual_lambda}};
    j["cv"] = {{"outer_folds", c.cv.outer_folds},
               {"inner_folds", c.cv.inner_folds},
               {"stratify_by_event", c.cv.stratify_by_event},
               {"tuning_criterion", detail::criterion_name(c.criterion)}};
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    j["metrics"] = {{"lift_fraction", c.lift_fraction},
                    {"bootstrap_replicates", c.bootstrap_replicates},
                    {"bootstrap_level", c.bootstrap_level}};
    Json fit = {{"hazard_ratios", c.fit_hazard_ratios}};
    if (c.fit_hyperparameters) fit["hyperparameters"] = *c.fit_hyperparameters;
    j["fit"] = fit;
    j["study"] = {{"methods", detail::method_list(c.study.methods)},
                  {"recovery_replicates", c.study.recovery_replicates},
                  {"coverage_experiments", c.study.coverage_experiments},
                  {"tuning_criterion", detail::criterion_name(c.study.criterion)},
                  {"inner_folds", c.study.inner_folds}};
    return j;
}

inline ExperimentConfig config_from_json(const Json& j) {
    detail::reject_unknown(j,
                           {"format_version", "data", "simulation", "standardization", "methods", "grids", "cv",
                            "seeds", "output_dir", "metrics", "fit", "study"},
                           "config");
    ExperimentConfig c;
    if (j.contains("format_version") && j.at("format_version").get<int>() != kFormatVersion)
        throw std::invalid_argument("unsupported config format_version");
    if (j.contains("data")) {
        const Json& d = j.at("data");
        detail::reject_unknown(d, {"source", "target"}, "data");
        DataPaths paths;
        detail::read_opt(d, "source", paths.source);
        detail::read_opt(d, "target", paths.target);
        if (paths.target.empty()) throw std::invalid_argument("config: data.target is required");
        c.data = paths;
    }
    if (j.contains("simulation")) c.simulation = detail::sim_from_json(j.at("simulation"));
    if (c.data.has_value() == c.simulation.has_value())
        throw std::invalid_argument("config: exactly one of 'data' and 'simulation' must be given");
    if (j.contains("standardization")) c.standardization = standardization_from_string(j.at("standardization"));
    c.methods = j.contains("methods") ? detail::methods_from(j.at("methods"))
                                      : std::vector<Method>(all_methods.begin(), all_methods.end());
    if (c.methods.empty()) throw std::invalid_argument("config: methods must be non-empty");
    if (j.contains("grids")) {
        const Json& g = j.at("grids");
        detail::reject_unknown(g,
                               {"ranks", "lambdas", "factor_lambdas", "residual_lambdas", "residual_penalty",
                                "per_outcome_residual_lambda"},
                               "grids");
        detail::read_opt(g, "ranks", c.grid.ranks);
        detail::read_opt(g, "lambdas", c.grid.lambdas);
        detail::read_opt(g, "factor_lambdas", c.grid.factor_lambdas);
        detail::read_opt(g, "residual_lambdas", c.grid.residual_lambdas);
        if (g.contains("residual_penalty")) c.grid.residual_kind = penalty_kind_from_string(g.at("residual_penalty"));
        detail::read_opt(g, "per_outcome_residual_lambda", c.grid.per_outcome_residual_lambda);
        if (c.grid.residual_kind == PenaltyKind::none)
            throw std::invalid_argument("config: residual_penalty must be l1 or l2");
        for (double l : c.grid.lambdas)
            if (!(l >= 0.0)) throw std::invalid_argument("config: lambdas must be >= 0");
        for (double l : c.grid.factor_lambdas)
            if (!(l >= 0.0)) throw std::invalid_argument("config: factor_lambdas must be >= 0");
        for (double l : c.grid.residual_lambdas)
            if (!(l >= 0.0)) throw std::invalid_argument("config: residual_lambdas must be >= 0");
        for (int r : c.grid.ranks)
            if (r < 1) throw std::invalid_argument("config: ranks must be >= 1");
    }
    if (j.contains("cv")) {
        const Json& v = j.at("cv");
        detail::reject_unknown(v, {"outer_folds", "inner_folds", "stratify_by_event", "tuning_criterion"}, "cv");
        detail::read_opt(v, "outer_folds", c.cv.outer_folds);
        detail::read_opt(v, "inner_folds", c.cv.inner_folds);
        detail::read_opt(v, "stratify_by_event", c.cv.stratify_by_event);
        if (v.contains("tuning_criterion")) c.criterion = detail::criterion_from_name(v.at("tuning_criterion"));
        c.cv.validate();
    }
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (c.seeds.empty()) c.seeds = {1};
    detail::read_opt(j, "output_dir", c.output_dir);
    if (j.contains("metrics")) {
        const Json& m = j.at("metrics");
        detail::reject_unknown(m, {"lift_fraction", "bootstrap_replicates", "bootstrap_level"}, "metrics");
        detail::read_opt(m, "lift_fraction", c.lift_fraction);
        detail::read_opt(m, "bootstrap_replicates", c.bootstrap_replicates);
        detail::read_opt(m, "bootstrap_level", c.bootstrap_level);
        if (!(c.lift_fraction > 0.0 && c.lift_fraction < 1.0))
            throw std::invalid_argument("config: lift_fraction must be in (0, 1)");
        if (c.bootstrap_replicates < 100) throw std::invalid_argument("config: bootstrap_replicates must be >= 100");
        if (!(c.bootstrap_level > 0.0 && c.bootstrap_level < 1.0))
            throw std::invalid_argument("config: bootstrap_level must be in (0, 1)");
    }
    if (j.contains("fit")) {
        const Json& f = j.at("fit");
        detail::reject_unknown(f, {"hyperparameters", "hazard_ratios"}, "fit");
        if (f.contains("hyperparameters")) c.fit_hyperparameters = f.at("hyperparameters");
        detail::read_opt(f, "hazard_ratios", c.fit_hazard_ratios);
    }
    if (j.contains("study")) {
        const Json& s = j.at("study");
        detail::reject_unknown(
            s, {"methods", "recovery_replicates", "coverage_experiments", "tuning_criterion", "inner_folds"}, "study");
        if (s.contains("methods")) c.study.methods = detail::methods_from(s.at("methods"));
        detail::read_opt(s, "recovery_replicates", c.study.recovery_replicates);
        detail::read_opt(s, "coverage_experiments", c.study.coverage_experiments);
        if (s.contains("tuning_criterion")) c.study.criterion = detail::criterion_from_name(s.at("tuning_criterion"));
        detail::read_opt(s, "inner_folds", c.study.inner_folds);
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a over the canonical dump, excluding the output directory (where
/// results go does not change what they are).
inline std::string config_fingerprint(const ExperimentConfig& c) {
    Json j = to_json(c);
    j.erase("output_dir");
    Fnv1a h;
    h.update(j.dump());
    return hex64(h.digest());
}

/// Fixed hyperparameters from a JSON object such as
/// {"rank": 2, "factor_lambda": 0.001, "residual_lambda": 0.1}.
inline HyperPoint hyperpoint_from_json(const Json& j) {
    detail::reject_unknown(j, {"rank", "lambda", "factor_lambda", "residual_lambda", "per_outcome_residual"},
                           "fit.hyperparameters");
    HyperPoint hp;
    detail::read_opt(j, "rank", hp.rank);
    detail::read_opt(j, "lambda", hp.lambda);
    detail::read_opt(j, "factor_lambda", hp.factor_lambda);
    detail::read_opt(j, "residual_lambda", hp.residual_lambda);
    detail::read_opt(j, "per_outcome_residual", hp.per_outcome_residual);
    return hp;
}

}  // namespace corecox
