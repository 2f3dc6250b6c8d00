// Command-line harness: simulation study, single-dataset fitting,
// sensitivity analysis, and synthetic data generation.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lbsimex.hpp"

namespace {

using namespace lbsimex;

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<std::string> parse_string_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<double> make_zeta_grid(double zeta_max, double zeta_step) {
    if (zeta_max <= 0.0 || zeta_step <= 0.0)
        throw std::invalid_argument("zeta grid: max and step must be positive");
    std::vector<double> grid;
    for (int k = 0;; ++k) {
        const double z = k * zeta_step;
        if (z > zeta_max + 1e-12) break;
        grid.push_back(z);
    }
    return grid;
}

LinkKind parse_model(const std::string& s) {
    if (s == "ph") return LinkKind::ph;
    if (s == "po") return LinkKind::po;
    throw std::invalid_argument("model must be ph or po");
}

TransformationLink make_link(LinkKind kind) {
    return kind == LinkKind::ph ? TransformationLink::ph() : TransformationLink::po();
}

Eigen::MatrixXd load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        for (auto& ch : line)
            if (ch == ',') ch = ' ';
        std::istringstream ss(line);
        std::vector<double> row;
        double v;
        while (ss >> v) row.push_back(v);
        if (!row.empty()) rows.push_back(row);
    }
    if (rows.empty()) throw IoError(path + ": empty matrix");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size())
            throw IoError(path + ": ragged matrix");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

// Shared data-loading flags for the fit/sensitivity subcommands.
struct DataArgs {
    std::string path;
    std::string config_path;
    std::string col_trunc, col_obs, col_status, col_covariates;

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", path, "cohort CSV file")->required();
        cmd->add_option("--config", config_path,
                        "key = value file with column names (trunc_col, obs_col, "
                        "status_col, covariate_cols)");
        cmd->add_option("--col-trunc", col_trunc, "truncation-time column name");
        cmd->add_option("--col-obs", col_obs, "observed-time column name");
        cmd->add_option("--col-status", col_status, "event-indicator column name");
        cmd->add_option("--col-covariates", col_covariates,
                        "comma-separated covariate column names");
    }

    Cohort load() const {
        ColumnMap map;
        if (!config_path.empty()) {
            const auto kv = parse_key_value_file(config_path);
            if (kv.count("trunc_col")) map.trunc = kv.at("trunc_col");
            if (kv.count("obs_col")) map.obs = kv.at("obs_col");
            if (kv.count("status_col")) map.status = kv.at("status_col");
            if (kv.count("covariate_cols"))
                map.covariates = parse_string_list(kv.at("covariate_cols"));
        }
        if (!col_trunc.empty()) map.trunc = col_trunc;
        if (!col_obs.empty()) map.obs = col_obs;
        if (!col_status.empty()) map.status = col_status;
        if (!col_covariates.empty()) map.covariates = parse_string_list(col_covariates);
        return load_cohort_csv(path, map);
    }
};

nlohmann::json vec_json(const Eigen::VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

int run(int argc, char** argv) {
    CLI::App app{"Transformation-model estimation for length-biased, right-censored "
                 "data with covariate measurement error"};
    app.require_subcommand(1);

    // ---- simulate -------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "run the simulation study");
    std::string model = "ph", methods_csv = "naive,simex,true", out_path, format = "csv";
    std::string sigma_scale = "sd", weighting = "uniform";
    double censoring = 0.25, sigma_eta = 0.5, zeta_max = 2.0, zeta_step = 0.25;
    int n = 200, reps = 200, B = 50, boot = 200, boot_B = 10, workers = 1;
    std::uint64_t seed = 0;
    sim->add_option("--model", model, "ph or po");
    sim->add_option("--censoring", censoring, "target censoring rate");
    sim->add_option("--sigma-eta", sigma_eta, "measurement-error size (diagonal)");
    sim->add_option("--sigma-eta-scale", sigma_scale,
                    "interpret --sigma-eta as 'sd' or 'var'");
    sim->add_option("--n", n, "cohort size");
    sim->add_option("--reps", reps, "simulation replicates");
    sim->add_option("--B", B, "contamination replicates per zeta");
    sim->add_option("--zeta-max", zeta_max, "largest zeta");
    sim->add_option("--zeta-step", zeta_step, "zeta grid spacing");
    sim->add_option("--seed", seed, "random seed");
    sim->add_option("--methods", methods_csv, "subset of naive,simex,true");
    sim->add_option("--boot", boot, "bootstrap resamples per interval (0 disables)");
    sim->add_option("--boot-B", boot_B,
                    "contamination replicates inside bootstrap refits (0: same as --B)");
    sim->add_option("--weighting", weighting, "risk weighting: uniform or length-biased");
    sim->add_option("--out", out_path, "output file (stdout when omitted)");
    sim->add_option("--format", format, "csv, json or md");
    sim->add_option("--workers", workers, "worker threads");

    // ---- fit ------------------------------------------------------------
    auto* fit = app.add_subcommand("fit", "fit one dataset and emit the corrected estimate");
    DataArgs fit_data;
    fit_data.attach(fit);
    std::string fit_model = "ph", fit_out, sigma_matrix_path;
    double fit_sigma_eta = -1.0;
    std::string fit_sigma_scale = "sd", fit_weighting = "uniform";
    int fit_B = 50, fit_boot = 200, fit_boot_B = 10, fit_workers = 1;
    std::uint64_t fit_seed = 0;
    double fit_zeta_max = 2.0, fit_zeta_step = 0.25;
    fit->add_option("--model", fit_model, "ph or po");
    fit->add_option("--sigma-eta", fit_sigma_eta, "diagonal error size");
    fit->add_option("--sigma-eta-scale", fit_sigma_scale, "'sd' or 'var'");
    fit->add_option("--sigma-eta-matrix", sigma_matrix_path, "file with the full matrix");
    fit->add_option("--B", fit_B, "contamination replicates");
    fit->add_option("--zeta-max", fit_zeta_max, "largest zeta");
    fit->add_option("--zeta-step", fit_zeta_step, "zeta grid spacing");
    fit->add_option("--seed", fit_seed, "random seed");
    fit->add_option("--boot", fit_boot, "bootstrap resamples");
    fit->add_option("--boot-B", fit_boot_B,
                    "contamination replicates inside bootstrap refits (0: same as --B)");
    fit->add_option("--weighting", fit_weighting, "uniform or length-biased");
    fit->add_option("--workers", fit_workers, "worker threads");
    fit->add_option("--out", fit_out, "output JSON (stdout when omitted)");

    // ---- sensitivity ----------------------------------------------------
    auto* sens = app.add_subcommand("sensitivity",
                                    "sensitivity analysis over assumed error sizes");
    DataArgs sens_data;
    sens_data.attach(sens);
    std::string sens_model = "ph", sens_out, sens_sigma_csv = "0.15,0.5,0.75";
    std::string sens_format = "csv", sens_weighting = "uniform";
    int sens_B = 50, sens_boot = 200, sens_boot_B = 10, sens_workers = 1;
    std::uint64_t sens_seed = 0;
    sens->add_option("--model", sens_model, "ph or po");
    sens->add_option("--sigma-e", sens_sigma_csv, "comma-separated sigma_e values");
    sens->add_option("--B", sens_B, "contamination replicates");
    sens->add_option("--seed", sens_seed, "random seed");
    sens->add_option("--boot", sens_boot, "bootstrap resamples");
    sens->add_option("--boot-B", sens_boot_B,
                    "contamination replicates inside bootstrap refits (0: same as --B)");
    sens->add_option("--weighting", sens_weighting, "uniform or length-biased");
    sens->add_option("--workers", sens_workers, "worker threads");
    sens->add_option("--out", sens_out, "output file (stdout when omitted)");
    sens->add_option("--format", sens_format, "csv, json or md");

    // ---- gen-data -------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic prevalent cohort");
    std::string gen_model = "ph", gen_out;
    double gen_censoring = 0.25, gen_sigma_eta = 0.5;
    std::string gen_sigma_scale = "sd";
    int gen_n = 200;
    std::uint64_t gen_seed = 0;
    bool with_truth = false;
    gen->add_option("--model", gen_model, "ph or po");
    gen->add_option("--censoring", gen_censoring, "target censoring rate");
    gen->add_option("--sigma-eta", gen_sigma_eta, "measurement-error size");
    gen->add_option("--sigma-eta-scale", gen_sigma_scale, "'sd' or 'var'");
    gen->add_option("--n", gen_n, "cohort size");
    gen->add_option("--seed", gen_seed, "random seed");
    gen->add_flag("--with-truth", with_truth, "include x1..xp columns");
    gen->add_option("--out", gen_out, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    if (sim->parsed()) {
        SimulationOptions opts;
        opts.scenario.link = parse_model(model);
        opts.scenario.target_censoring = censoring;
        opts.scenario.sigma_eta = sigma_eta;
        opts.scenario.sigma_eta_is_sd = (sigma_scale == "sd");
        opts.scenario.n = n;
        opts.replications = reps;
        opts.seed = seed;
        opts.workers = workers;
        opts.methods.clear();
        for (const auto& m : parse_string_list(methods_csv))
            opts.methods.push_back(parse_method(m));
        opts.simex.contamination_reps = B;
        opts.simex.zeta_grid = make_zeta_grid(zeta_max, zeta_step);
        opts.simex.bootstrap_reps = boot;
        opts.simex.bootstrap_contamination_reps = boot_B;
        opts.simex.fit.weighting = weighting == "length-biased"
                                       ? RiskWeighting::length_biased
                                       : RiskWeighting::uniform;
        const SimulationOutput result = run_simulation(opts);
        if (!result.health_warning.empty())
            std::cerr << "warning: " << result.health_warning << "\n";
        if (out_path.empty())
            emit_report(result.rows, parse_report_format(format), std::cout);
        else
            write_report_file(out_path, parse_report_format(format), result.rows);
        return 0;
    }

    if (fit->parsed()) {
        const Cohort cohort = fit_data.load();
        const auto kind = parse_model(fit_model);
        SimexConfig cfg;
        cfg.contamination_reps = fit_B;
        cfg.zeta_grid = make_zeta_grid(fit_zeta_max, fit_zeta_step);
        cfg.bootstrap_reps = fit_boot;
        cfg.bootstrap_contamination_reps = fit_boot_B;
        cfg.workers = fit_workers;
        cfg.fit.weighting = fit_weighting == "length-biased" ? RiskWeighting::length_biased
                                                             : RiskWeighting::uniform;
        if (!sigma_matrix_path.empty()) {
            cfg.error_cov = load_matrix(sigma_matrix_path);
        } else if (fit_sigma_eta >= 0.0) {
            const double var = fit_sigma_scale == "sd" ? fit_sigma_eta * fit_sigma_eta
                                                       : fit_sigma_eta;
            cfg.error_cov = var * Eigen::MatrixXd::Identity(cohort.dim(), cohort.dim());
        } else {
            throw std::invalid_argument("fit: pass --sigma-eta or --sigma-eta-matrix");
        }
        const auto key = StreamKey::root(fit_seed);
        const auto link = make_link(kind);
        const SimexResult result = simex_beta(cohort, link, cfg, key);
        const SimexTransform transform = simex_transform(cohort, link, cfg, key, result.beta);
        nlohmann::json out;
        out["model"] = to_string(kind);
        out["beta_simex"] = vec_json(result.beta);
        out["beta_naive"] = vec_json(result.naive.beta);
        out["dropped_fits"] = result.path.dropped_fits;
        out["monotonicity_adjustment"] = transform.monotonicity_adjustment;
        nlohmann::json path_json = nlohmann::json::array();
        for (std::size_t z = 0; z < result.path.zetas.size(); ++z)
            path_json.push_back(
                {{"zeta", result.path.zetas[z]},
                 {"beta", vec_json(result.path.beta_by_zeta.row(
                              static_cast<Eigen::Index>(z)).transpose())}});
        out["zeta_path"] = path_json;
        nlohmann::json h_json = nlohmann::json::array();
        for (std::size_t k = 0; k < transform.transform.size(); ++k)
            h_json.push_back({{"t", transform.transform.event_times()[k]},
                              {"H", transform.transform.values()[k]}});
        out["transform"] = h_json;
        if (fit_boot > 0) {
            const BootstrapInterval ci = bootstrap_ci(cohort, link, cfg, key, result.beta);
            out["se"] = vec_json(ci.se);
            out["ci_lower"] = vec_json(ci.lower);
            out["ci_upper"] = vec_json(ci.upper);
        }
        if (fit_out.empty()) {
            std::cout << out.dump(2) << "\n";
        } else {
            std::ofstream os(fit_out);
            if (!os) throw IoError("cannot write " + fit_out);
            os << out.dump(2) << "\n";
        }
        return 0;
    }

    if (sens->parsed()) {
        const Cohort cohort = sens_data.load();
        const auto kind = parse_model(sens_model);
        SimexConfig cfg;
        cfg.contamination_reps = sens_B;
        cfg.bootstrap_reps = sens_boot;
        cfg.bootstrap_contamination_reps = sens_boot_B;
        cfg.workers = sens_workers;
        cfg.fit.weighting = sens_weighting == "length-biased"
                                ? RiskWeighting::length_biased
                                : RiskWeighting::uniform;
        cfg.error_cov = Eigen::MatrixXd::Zero(cohort.dim(), cohort.dim());  // set per sigma_e
        const auto rows = sensitivity_analysis(cohort, make_link(kind),
                                               parse_double_list(sens_sigma_csv), cfg,
                                               StreamKey::root(sens_seed));
        if (sens_out.empty())
            emit_sensitivity(rows, parse_report_format(sens_format), std::cout);
        else
            write_sensitivity_file(sens_out, parse_report_format(sens_format), rows);
        return 0;
    }

    if (gen->parsed()) {
        SimScenario scenario;
        scenario.link = parse_model(gen_model);
        scenario.target_censoring = gen_censoring;
        scenario.sigma_eta = gen_sigma_eta;
        scenario.sigma_eta_is_sd = (gen_sigma_scale == "sd");
        scenario.n = gen_n;
        const auto root = StreamKey::root(gen_seed);
        const double c = calibrate_censoring(scenario, gen_censoring, root);
        Rng rng(root.child(stream_tag::datagen));
        const Cohort cohort = draw_prevalent_cohort(scenario, c, rng);
        write_cohort_csv(gen_out, cohort, with_truth);
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const lbsimex::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const lbsimex::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const lbsimex::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
