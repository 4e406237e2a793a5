#pragma once

// The command-line workflows. Each command reads an ExperimentConfig,
// writes its outputs under one directory, and returns a process exit code.
// Every output file carries the format version and config fingerprint.

#include "corecox/artifact.hpp"
#include "corecox/bootstrap.hpp"
#include "corecox/config.hpp"
#include "corecox/csv.hpp"
#include "corecox/cv.hpp"
#include "corecox/studies.hpp"

#include <filesystem>
#include <fstream>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace corecox {

/// Modeling choices echoed into reports so readers know which settings are
/// substitutes rather than measured facts.
inline std::vector<std::string> modeling_choices() {
    return {
        "Tied event times: Breslow approximation.",
        "Partial likelihood scaled by 1/(number of events) per outcome.",
        "Harrell C-index: tied event times are not comparable; tied scores earn half credit.",
        "Lift: observed-event indicator without a time horizon; top group is ceil(fraction * n), ties by row index.",
        "Outer and inner folds stratified on the event pattern of the three most prevalent outcomes.",
        "Low-rank factors penalized by lambda/2 (||U||_F^2 + ||V||_F^2); initialized from the SVD of per-outcome "
        "ridge (lambda = 1) fits.",
        "Residual correction penalty: elementwise l1 by default; one shared lambda unless per-outcome tuning is on.",
        "Cox-Transfer source fits use a ridge penalty of 1e-4.",
        "Bootstrap intervals: subject-level resampling of the target, percentile method, source fit held fixed; an "
        "interval that misses its point estimate is stretched to include it.",
        "Simulated covariates: equicorrelated standard normal.",
        "Simulated source coefficients: product of uniform[-1, 1] factors, each column scaled to unit norm.",
        "Simulated shift: round(sparsity * p * K) cells set to +/- magnitude with random signs.",
        "Simulated censoring: exponential, rate bisected per outcome to hit the target censoring fraction on the "
        "target cohort; the source reuses those rates.",
        "RRMSE: ||estimate - truth||_F / ||truth||_F over the whole target matrix.",
        "Coverage study: CORE-Cox hyperparameters tuned once on a separate pilot replicate; widths reported on "
        "both the log-HR and HR scales.",
        "Predictors standardized with source-cohort statistics unless the per-cohort policy is selected.",
    };
}

namespace detail {

inline std::string fmt(double v) {
    if (std::isnan(v)) return "";
    return format_double(v);
}

inline std::string hyper_string(const std::map<std::string, double>& hp) {
    std::string s;
    for (const auto& [k, v] : hp) {
        if (!s.empty()) s += ';';
        s += k + "=" + format_double(v);
    }
    return s;
}

// CSV-quotes a field when needed.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline void write_header(std::ostream& os, const std::string& fingerprint, const std::string& kind) {
    os << "# format_version=" << kFormatVersion << '\n'
       << "# config_fingerprint=" << fingerprint << '\n'
       << "# kind=" << kind << '\n';
}

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

}  // namespace detail

/// Data resolved from a config: ingested CSV cohorts or a simulated pair.
struct PreparedData {
    std::optional<SurvivalDataset> source;
    SurvivalDataset target;
    std::string standardization;  // policy applied, for report headers
    Standardizer target_transform;
    std::optional<SimTruth> truth;

    const SurvivalDataset* source_ptr() const { return source ? &*source : nullptr; }
};

inline PreparedData prepare_data(const ExperimentConfig& c, std::ostream& log) {
    PreparedData out;
    if (c.simulation) {
        SimData sim = generate(*c.simulation);
        out.source = std::move(sim.source);
        out.target = std::move(sim.target);
        out.truth = std::move(sim.truth);
        out.standardization = "none (simulated covariates are already standard normal)";
        out.target_transform.mean = Eigen::VectorXd::Zero(out.target.p());
        out.target_transform.scale = Eigen::VectorXd::Ones(out.target.p());
        return out;
    }
    LoadedCohorts loaded = load_cohorts(c.data->source, c.data->target, c.standardization);
    if (loaded.source) {
        log << loaded.source->report.to_text();
        out.source = std::move(loaded.source->data);
    }
    log << loaded.target.report.to_text();
    out.target = std::move(loaded.target.data);
    out.target_transform = loaded.target_transform;
    out.standardization = out.source ? to_string(c.standardization) : "target (no source cohort)";
    return out;
}

// -------------------------------------------------------------------------
// benchmark

struct CellSummary {
    std::vector<double> c, lift;
    int units = 0;
};

inline int cmd_benchmark(const ExperimentConfig& config, const std::string& out_dir, int jobs, std::ostream& log) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string fp = config_fingerprint(config);
    const PreparedData data = prepare_data(config, log);
    const HyperGrid grid = config.resolved_grid(data.target.p(), data.target.k());
    for (Method m : config.methods)
        if (uses_source(m) && !data.source)
            throw std::invalid_argument(method_name(m) + " needs a source cohort (data.source)");

    NestedCVOptions opt;
    opt.lift_fraction = config.lift_fraction;
    opt.criterion = config.criterion;
    opt.jobs = jobs;
    SourceModels src(data.source_ptr());

    const fs::path metrics_path = fs::path(out_dir) / "metrics.csv";
    const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
    std::ofstream metrics = detail::open_out(metrics_path);
    detail::write_header(metrics, fp, "benchmark-metrics");
    metrics << "# standardization=" << data.standardization << '\n';
    metrics << "seed,fold,method,outcome,c_index,lift,n_train,n_test,fold_hash,status,hyperparameters,error\n";

    const std::size_t M = config.methods.size();
    const std::size_t K = static_cast<std::size_t>(data.target.k());
    std::vector<std::vector<CellSummary>> cells(M, std::vector<CellSummary>(K));
    // Paired (method - Cox) C-index differences per (seed, fold, outcome).
    std::vector<std::vector<double>> paired(M);
    std::optional<std::size_t> cox;
    for (std::size_t m = 0; m < M; ++m)
        if (config.methods[m] == Method::cox) cox = m;

    Json manifest = {{"format_version", kFormatVersion},
                     {"config_fingerprint", fp},
                     {"command", "benchmark"},
                     {"total_units", config.seeds.size() * static_cast<std::size_t>(config.cv.outer_folds) * M},
                     {"completed_units", Json::array()},
                     {"failed_units", Json::array()},
                     {"files", {"metrics.csv", "summary.json", "manifest.json"}}};
    auto flush_manifest = [&] {
        std::ofstream mf = detail::open_out(manifest_path);
        mf << manifest.dump(2) << '\n';
    };

    for (std::uint64_t seed : config.seeds) {
        const std::vector<MethodResult> results =
            run_nested_cv(data.source_ptr(), data.target, config.methods, grid, config.cv, {seed}, opt, &src);
        for (std::size_t u = 0; u < results.size(); ++u) {
            const MethodResult& r = results[u];
            const std::size_t m = u % M;
            const Json unit = {{"seed", r.seed}, {"fold", r.fold_index}, {"method", r.method_name}};
            for (std::size_t k = 0; k < K; ++k) {
                metrics << r.seed << ',' << r.fold_index << ',' << r.method_name << ','
                        << detail::csv_field(data.target.outcome_names()[k]) << ',';
                if (r.ok)
                    metrics << detail::fmt(r.per_outcome_cindex[k]) << ',' << detail::fmt(r.per_outcome_lift[k]);
                else
                    metrics << ',';
                metrics << ',' << r.n_train << ',' << r.n_test << ',' << r.fold_hash << ','
                        << (r.ok ? "ok" : "failed") << ',' << detail::hyper_string(r.chosen_hyperparameters) << ','
                        << detail::csv_field(r.error) << '\n';
            }
            if (r.ok) {
                manifest["completed_units"].push_back(unit);
                for (std::size_t k = 0; k < K; ++k) {
                    cells[m][k].units += 1;
                    if (!std::isnan(r.per_outcome_cindex[k])) cells[m][k].c.push_back(r.per_outcome_cindex[k]);
                    if (!std::isnan(r.per_outcome_lift[k])) cells[m][k].lift.push_back(r.per_outcome_lift[k]);
                }
                if (cox) {
                    const MethodResult& ref = results[u - m + *cox];
                    if (ref.ok)
                        for (std::size_t k = 0; k < K; ++k)
                            if (!std::isnan(r.per_outcome_cindex[k]) && !std::isnan(ref.per_outcome_cindex[k]))
                                paired[m].push_back(r.per_outcome_cindex[k] - ref.per_outcome_cindex[k]);
                }
            } else {
                Json f = unit;
                f["error"] = r.error;
                manifest["failed_units"].push_back(f);
            }
        }
        metrics.flush();
        flush_manifest();
    }

    auto sd = [](const std::vector<double>& v) {
        if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
        double m = 0.0, s = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    auto mean = [](const std::vector<double>& v) {
        if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
        double m = 0.0;
        for (double x : v) m += x;
        return m / static_cast<double>(v.size());
    };

    const std::size_t units_per_method = config.seeds.size() * static_cast<std::size_t>(config.cv.outer_folds);
    Json rows = Json::array();
    Json methods = Json::array();
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<double> all_c;
        for (std::size_t k = 0; k < K; ++k) {
            const CellSummary& cs = cells[m][k];
            all_c.insert(all_c.end(), cs.c.begin(), cs.c.end());
            rows.push_back({{"method", method_name(config.methods[m])},
                            {"outcome", data.target.outcome_names()[k]},
                            {"mean_c_index", detail::number_or_null(mean(cs.c))},
                            {"sd_c_index", detail::number_or_null(sd(cs.c))},
                            {"mean_lift", detail::number_or_null(mean(cs.lift))},
                            {"sd_lift", detail::number_or_null(sd(cs.lift))},
                            {"n_units", cs.units},
                            {"completeness", static_cast<double>(cs.units) / static_cast<double>(units_per_method)}});
        }
        Json entry = {{"method", method_name(config.methods[m])},
                      {"mean_c_index", detail::number_or_null(mean(all_c))},
                      {"completeness",
                       static_cast<double>(cells[m][0].units) / static_cast<double>(units_per_method)}};
        if (cox && m != *cox) {
            entry["paired_c_index_difference_vs_cox"] = {{"mean", detail::number_or_null(mean(paired[m]))},
                                                         {"sd", detail::number_or_null(sd(paired[m]))},
                                                         {"n_pairs", paired[m].size()}};
        }
        methods.push_back(entry);
    }
    Json summary = {{"format_version", kFormatVersion},
                    {"config_fingerprint", fp},
                    {"standardization", data.standardization},
                    {"seeds", config.seeds},
                    {"outer_folds", config.cv.outer_folds},
                    {"inner_folds", config.cv.inner_folds},
                    {"lift_fraction", config.lift_fraction},
                    {"rows", rows},
                    {"methods", methods},
                    {"modeling_choices", modeling_choices()}};
    {
        std::ofstream sf = detail::open_out(fs::path(out_dir) / "summary.json");
        sf << summary.dump(2) << '\n';
    }
    flush_manifest();

    log << "method            mean C-index   vs Cox\n";
    for (const auto& e : methods) {
        const double c = e["mean_c_index"].is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                     : e["mean_c_index"].get<double>();
        char buf[96];
        std::snprintf(buf, sizeof buf, "%-17s %-14.4f", e["method"].get<std::string>().c_str(), c);
        log << buf;
        if (e.contains("paired_c_index_difference_vs_cox") && !e["paired_c_index_difference_vs_cox"]["mean"].is_null()) {
            std::snprintf(buf, sizeof buf, "%+.4f", e["paired_c_index_difference_vs_cox"]["mean"].get<double>());
            log << buf;
        }
        log << '\n';
    }
    const bool any_ok = !manifest["completed_units"].empty();
    if (!manifest["failed_units"].empty())
        log << manifest["failed_units"].size() << " unit(s) failed; see manifest.json\n";
    return any_ok ? 0 : 1;
}

// -------------------------------------------------------------------------
// fit

inline int cmd_fit(const ExperimentConfig& config, const std::string& method_override, const std::string& out_dir,
                   std::ostream& log) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string fp = config_fingerprint(config);
    Method m;
    if (!method_override.empty())
        m = method_from_name(method_override);
    else if (config.methods.size() == 1)
        m = config.methods.front();
    else
        throw std::invalid_argument("fit: name one method with --method");
    const PreparedData data = prepare_data(config, log);
    if (uses_source(m) && !data.source) throw std::invalid_argument(method_name(m) + " needs a source cohort");
    const HyperGrid grid = config.resolved_grid(data.target.p(), data.target.k());
    SourceModels src(data.source_ptr());

    HyperPoint hp;
    if (config.fit_hyperparameters) {
        hp = hyperpoint_from_json(*config.fit_hyperparameters);
    } else {
        Rng rng(config.seeds.front(), 300);
        const TuneResult t =
            tune_method(m, grid, data.target, src, config.cv.inner_folds, rng, config.criterion, config.cv.stratify_by_event);
        hp = t.best;
        log << "tuned " << method_name(m) << ": " << detail::hyper_string(hp.as_map(m)) << '\n';
    }

    MethodFit fit;
    try {
        fit = fit_method(m, hp, data.target, src, grid.residual_kind);
    } catch (const std::exception& e) {
        log << "fit failed for " << method_name(m) << ": " << e.what() << '\n';
        return 1;
    }
    for (const auto& r : fit.reports)
        if (!r.converged) log << "warning: a " << method_name(m) << " solver stage did not converge: " << r.message << '\n';

    ModelArtifact a;
    a.method = method_name(m);
    a.fingerprint = fp;
    a.predictor_names = data.target.predictor_names();
    a.outcome_names = data.target.outcome_names();
    a.coefficients = fit.coefficients.values;
    if (fit.transfer) {
        a.source_matrix = fit.transfer->source_matrix.values;
        a.residual = fit.transfer->residual;
    }
    a.hyperparameters = hp.as_map(m);
    a.reports = fit.reports;
    a.standardization = data.standardization;
    a.standardization_mean = data.target_transform.mean;
    a.standardization_scale = data.target_transform.scale;
    write_artifact((fs::path(out_dir) / "model.json").string(), a);

    {
        std::ofstream cf = detail::open_out(fs::path(out_dir) / "coefficients.csv");
        detail::write_header(cf, fp, "coefficients");
        cf << "predictor,outcome,coefficient,hazard_ratio,source,residual\n";
        for (int k = 0; k < data.target.k(); ++k)
            for (int j = 0; j < data.target.p(); ++j) {
                cf << detail::csv_field(a.predictor_names[static_cast<std::size_t>(j)]) << ','
                   << detail::csv_field(a.outcome_names[static_cast<std::size_t>(k)]) << ','
                   << format_double(a.coefficients(j, k)) << ',' << format_double(std::exp(a.coefficients(j, k))) << ','
                   << (a.source_matrix ? format_double((*a.source_matrix)(j, k)) : "") << ','
                   << (a.residual ? format_double((*a.residual)(j, k)) : "") << '\n';
            }
    }
    std::vector<std::string> files{"model.json", "coefficients.csv", "manifest.json"};

    if (config.fit_hazard_ratios) {
        std::ofstream hf = detail::open_out(fs::path(out_dir) / "hazard_ratios.csv");
        detail::write_header(hf, fp, "hazard-ratios");
        hf << "outcome,predictor,method,coefficient,coef_low,coef_high,hr,ci_low,ci_high,widened,replicates\n";
        for (int k = 0; k < data.target.k(); ++k) {
            const ColumnFitFn fn = [&](const SurvivalDataset& d, int kk) {
                MethodFit f = fit_method(m, hp, d, src, grid.residual_kind);
                VectorFit v;
                v.beta = f.coefficients.values.col(kk);
                for (const auto& r : f.reports) v.report.diverged = v.report.diverged || r.diverged;
                return v;
            };
            const auto rows = bootstrap_hazard_ratios(fn, data.target, k, config.bootstrap_replicates,
                                                      config.bootstrap_level, config.seeds.front(), method_name(m));
            for (const auto& r : rows)
                hf << detail::csv_field(a.outcome_names[static_cast<std::size_t>(k)]) << ','
                   << detail::csv_field(r.predictor) << ',' << r.method << ',' << format_double(r.coefficient) << ','
                   << format_double(r.coef_low) << ',' << format_double(r.coef_high) << ',' << format_double(r.hr)
                   << ',' << format_double(r.ci_low) << ',' << format_double(r.ci_high) << ','
                   << (r.widened ? 1 : 0) << ',' << r.replicates_used << '\n';
        }
        files.push_back("hazard_ratios.csv");
    }

    const Json manifest = {{"format_version", kFormatVersion},
                           {"config_fingerprint", fp},
                           {"command", "fit"},
                           {"method", method_name(m)},
                           {"files", files}};
    std::ofstream mf = detail::open_out(fs::path(out_dir) / "manifest.json");
    mf << manifest.dump(2) << '\n';
    log << "wrote " << (fs::path(out_dir) / "model.json").string() << '\n';
    return 0;
}

// -------------------------------------------------------------------------
// simulate

enum class StudyKind { recovery, coverage, both };

inline StudyKind study_from_string(const std::string& s) {
    if (s == "recovery") return StudyKind::recovery;
    if (s == "coverage") return StudyKind::coverage;
    if (s == "both") return StudyKind::both;
    throw std::invalid_argument("unknown study: " + s);
}

inline int cmd_simulate(const ExperimentConfig& config, StudyKind study, const std::string& out_dir, int jobs,
                        std::ostream& log) {
    namespace fs = std::filesystem;
    if (!config.simulation) throw std::invalid_argument("simulate: config needs a 'simulation' block");
    fs::create_directories(out_dir);
    const std::string fp = config_fingerprint(config);
    const SimConfig& sim = *config.simulation;

    StudyTuning tuning;
    tuning.grid = config.resolved_grid(sim.p, sim.k);
    tuning.criterion = config.study.criterion;
    tuning.inner_folds = config.study.inner_folds;
    if (config.fit_hyperparameters) tuning.fixed[Method::core_cox] = hyperpoint_from_json(*config.fit_hyperparameters);

    std::ostringstream text;
    text << "Simulation study report\n"
         << "format_version=" << kFormatVersion << "\nconfig_fingerprint=" << fp << "\n\n"
         << "Scenario: n_source=" << sim.n_source << " n_target=" << sim.n_target << " p=" << sim.p
         << " K=" << sim.k << " true_rank=" << sim.true_rank << " shift_sparsity=" << sim.shift_sparsity
         << " shift_magnitude=" << sim.shift_magnitude << " censoring=" << sim.censoring_rate_target
         << " correlation=" << sim.covariate_correlation << " baseline="
         << (sim.baseline == BaselineKind::exponential ? "exponential" : "weibull") << " seed=" << sim.rng_seed
         << "\n\n";
    std::vector<std::string> files;

    if (study == StudyKind::recovery || study == StudyKind::both) {
        const RecoveryStudy r =
            run_recovery_study(sim, config.study.methods, tuning, config.study.recovery_replicates, jobs);
        std::ofstream rf = detail::open_out(fs::path(out_dir) / "recovery.csv");
        detail::write_header(rf, fp, "recovery");
        rf << "replicate,seed,method,rrmse";
        for (int k = 0; k < sim.k; ++k) rf << ",rrmse_y" << (k + 1);
        rf << ",status,hyperparameters,error\n";
        for (const auto& row : r.rows) {
            rf << row.replicate << ',' << row.seed << ',' << row.method << ',' << detail::fmt(row.rrmse);
            for (int k = 0; k < sim.k; ++k)
                rf << ','
                   << (row.ok ? detail::fmt(row.column_rrmse[static_cast<std::size_t>(k)]) : std::string());
            rf << ',' << (row.ok ? "ok" : "failed") << ',' << detail::hyper_string(row.hyperparameters) << ','
               << detail::csv_field(row.error) << '\n';
        }
        std::ofstream sf = detail::open_out(fs::path(out_dir) / "recovery_summary.csv");
        detail::write_header(sf, fp, "recovery-summary");
        sf << "method,mean_rrmse,se_rrmse,n_ok,n_total,fraction_below_cox\n";
        text << "Coefficient recovery (RRMSE, " << config.study.recovery_replicates << " replicates)\n";
        for (const auto& s : r.summary) {
            sf << s.method << ',' << detail::fmt(s.mean) << ',' << detail::fmt(s.se) << ',' << s.n_ok << ','
               << s.n_total << ',' << detail::fmt(s.beats_cox) << '\n';
            char buf[160];
            std::snprintf(buf, sizeof buf, "  %-14s %.4f +/- %.4f  (ok %d/%d, below Cox in %.0f%% of replicates)\n",
                          s.method.c_str(), s.mean, s.se, s.n_ok, s.n_total,
                          std::isnan(s.beats_cox) ? 0.0 : 100.0 * s.beats_cox);
            text << buf;
        }
        text << '\n';
        files.insert(files.end(), {"recovery.csv", "recovery_summary.csv"});
    }

    if (study == StudyKind::coverage || study == StudyKind::both) {
        CoverageOptions co;
        co.n_boot = config.bootstrap_replicates;
        co.level = config.bootstrap_level;
        co.tuning = tuning;
        co.jobs = jobs;
        const CoverageStudy c = run_coverage_study(sim, config.study.coverage_experiments, co);
        std::ofstream cf = detail::open_out(fs::path(out_dir) / "coverage.csv");
        detail::write_header(cf, fp, "coverage");
        cf << "experiment,seed,method,cells,covered,mean_width_log_hr,mean_width_hr,widened,status,error\n";
        for (const auto& row : c.rows)
            cf << row.experiment << ',' << row.seed << ',' << row.method << ',' << row.cells << ',' << row.covered
               << ',' << detail::fmt(row.mean_width_log) << ',' << detail::fmt(row.mean_width_hr) << ','
               << row.widened << ',' << (row.ok ? "ok" : "failed") << ',' << detail::csv_field(row.error) << '\n';
        std::ofstream sf = detail::open_out(fs::path(out_dir) / "coverage_summary.csv");
        detail::write_header(sf, fp, "coverage-summary");
        sf << "method,coverage,mean_width_log_hr,mean_width_hr,experiments_ok,experiments,cells\n";
        text << "Bootstrap coverage (" << config.study.coverage_experiments << " experiments, "
             << config.bootstrap_replicates << " replicates, level " << config.bootstrap_level << ")\n"
             << "  CORE-Cox hyperparameters: " << detail::hyper_string(c.core_point.as_map(Method::core_cox))
             << '\n';
        for (const auto& s : c.summary) {
            sf << s.method << ',' << detail::fmt(s.coverage) << ',' << detail::fmt(s.mean_width_log) << ','
               << detail::fmt(s.mean_width_hr) << ',' << s.experiments_ok << ',' << s.experiments << ',' << s.cells
               << '\n';
            char buf[160];
            std::snprintf(buf, sizeof buf, "  %-14s coverage %.3f  mean width %.3f (log HR), %.3f (HR)\n",
                          s.method.c_str(), s.coverage, s.mean_width_log, s.mean_width_hr);
            text << buf;
        }
        text << '\n';
        files.insert(files.end(), {"coverage.csv", "coverage_summary.csv"});
    }

    text << "Modeling choices (substitutes for unstated settings)\n";
    for (const auto& m : modeling_choices()) text << "  - " << m << '\n';
    {
        std::ofstream tf = detail::open_out(fs::path(out_dir) / "summary.txt");
        tf << text.str();
    }
    files.push_back("summary.txt");
    files.push_back("manifest.json");
    const Json manifest = {{"format_version", kFormatVersion},
                           {"config_fingerprint", fp},
                           {"command", "simulate"},
                           {"files", files}};
    std::ofstream mf = detail::open_out(fs::path(out_dir) / "manifest.json");
    mf << manifest.dump(2) << '\n';
    log << text.str();
    return 0;
}

// -------------------------------------------------------------------------
// validate-data

inline int cmd_validate_data(const std::string& source_path, const std::string& target_path, std::ostream& log) {
    bool ok = true;
    std::optional<Cohort> source, target;
    auto load = [&](const std::string& path, std::optional<Cohort>& slot) {
        if (path.empty()) return;
        try {
            slot = ingest_csv(path);
            log << slot->report.to_text();
            const SurvivalDataset& d = slot->data;
            log << "  n=" << d.n() << " p=" << d.p() << " K=" << d.k() << "; events:";
            for (int k = 0; k < d.k(); ++k)
                log << ' ' << d.outcome_names()[static_cast<std::size_t>(k)] << '=' << d.outcome(k).event_count();
            log << '\n';
        } catch (const std::exception& e) {
            ok = false;
            log << "error: " << e.what() << '\n';
        }
    };
    load(source_path, source);
    load(target_path, target);
    if (source && target) {
        if (source->data.predictor_names() != target->data.predictor_names()) {
            ok = false;
            log << "error: source and target predictor columns differ\n";
        }
        if (source->data.outcome_names() != target->data.outcome_names()) {
            ok = false;
            log << "error: source and target outcome columns differ\n";
        }
    }
    log << (ok ? "schema ok\n" : "validation failed\n");
    return ok ? 0 : 1;
}

}  // namespace corecox
