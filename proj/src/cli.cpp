#include "pathcor/cli.hpp"

#include "pathcor/envelope.hpp"
#include "pathcor/errors.hpp"
#include "pathcor/model.hpp"
#include "pathcor/moments.hpp"
#include "pathcor/rrr.hpp"
#include "pathcor/sem.hpp"
#include "pathcor/simulation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace pathcor::cli {

namespace {

using nlohmann::json;

class UsageError : public Error {
public:
    using Error::Error;
};

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "' is not valid JSON: " + e.what());
    }
}

// Number of comma-separated fields on the first non-blank line.
std::optional<std::size_t> first_row_width(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
    }
    return std::nullopt;
}

struct FitArgs {
    std::string data;
    Eigen::Index p = 0;
    Eigen::Index r = 0;
    std::string method = "rrr";
    std::optional<Eigen::Index> ux;
    std::optional<Eigen::Index> uy;
    bool select_dims = false;
    std::uint64_t seed = 0;
    SemOptions sem;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
    const auto width = first_row_width(a.data);
    if (width && *width != static_cast<std::size_t>(a.p + a.r))
        throw UsageError("--p + --r = " + std::to_string(a.p + a.r) + " but the data has " +
                         std::to_string(*width) + " columns");
    const Dataset data = read_csv_file(a.data, a.p, a.r);
    data.validate();
    const SampleMoments m = compute_moments(data);
    const bool composite = a.method == "pls" || a.method == "serr";
    if (!composite && (a.ux || a.uy || a.select_dims))
        throw UsageError("--ux, --uy and --select-dims apply to --method pls or serr only");

    json j;
    j["estimator"] = a.method;
    j["n"] = data.n();
    j["p"] = a.p;
    j["r"] = a.r;
    j["rho"] = nullptr;
    j["weights"] = nullptr;
    bool converged = true;

    if (a.method == "rrr") {
        const Rank1Fit fit = fit_rank1(m);
        j["estimate_cor_regression"] = fit.d1;
        j["degenerate"] = false;
        j["diagnostics"] = {{"second_canonical_correlation", fit.d2},
                            {"tied", fit.tied},
                            {"clamped", fit.clamped},
                            {"beta_yx", matrix_json(fit.beta_yx)}};
    } else if (a.method == "sem") {
        SemOptions opts = a.sem;
        opts.seed = a.seed;
        const SemFit fit = fit_sem(m, opts);
        double implied = std::nan("");
        try {
            implied = sem_implied_reg_correlation(fit);
        } catch (const DomainError&) {
        }
        converged = fit.converged;
        j["rho"] = fit.rho;
        j["implied_reg_correlation"] = number_or_null(implied);
        j["estimate_cor_regression"] = number_or_null(implied);
        j["degenerate"] = false;
        j["diagnostics"] = {{"lambda_x", std::vector<double>(fit.lambda_x.data(), fit.lambda_x.data() + fit.lambda_x.size())},
                            {"lambda_y", std::vector<double>(fit.lambda_y.data(), fit.lambda_y.data() + fit.lambda_y.size())},
                            {"d_x", std::vector<double>(fit.d_x.data(), fit.d_x.data() + fit.d_x.size())},
                            {"d_y", std::vector<double>(fit.d_y.data(), fit.d_y.data() + fit.d_y.size())},
                            {"neg_loglik", fit.neg_loglik},
                            {"discrepancy", fit.discrepancy},
                            {"iterations", fit.iterations},
                            {"gradient_norm", fit.gradient_norm},
                            {"heywood", fit.heywood},
                            {"starts_converged", fit.starts_converged}};
    } else {
        FitResult res;
        std::string dim_source = "default";
        Eigen::Index ux = 1;
        Eigen::Index uy = 1;
        if (a.method == "pca") {
            res = composite_estimate(m, pca_weights(m));
        } else if (a.method == "unit") {
            res = composite_estimate(m, unit_weights(a.p, a.r));
        } else {
            const CompositeMethod basis = a.method == "pls" ? CompositeMethod::Simpls : CompositeMethod::EnvelopeMle;
            if (a.select_dims) {
                if (a.ux || a.uy) throw UsageError("--select-dims cannot be combined with --ux or --uy");
                std::tie(ux, uy) = select_dimensions(data, basis);
                dim_source = "selected";
            } else {
                if (a.ux) ux = *a.ux;
                if (a.uy) uy = *a.uy;
                if (a.ux || a.uy) dim_source = "flag";
            }
            if (ux < 0 || ux > a.p || uy < 0 || uy > a.r)
                throw UsageError("--ux must lie in [0, p] and --uy in [0, r]");
            res = a.method == "pls" ? composite_estimate(m, simpls_weights(m, ux, uy))
                                    : serr_estimate(m, ux, uy, basis);
        }
        converged = res.converged;
        j["estimate_cor_regression"] = res.estimate;
        j["degenerate"] = res.degenerate;
        json diag = res.diagnostics;
        diag["dimension_source"] = dim_source;
        j["diagnostics"] = diag;
        if (res.weights) {
            j["weights"] = {{"method", to_string(res.weights->method)},
                            {"u_x", res.weights->u_x},
                            {"u_y", res.weights->u_y},
                            {"phi", matrix_json(res.weights->phi)},
                            {"gamma", matrix_json(res.weights->gamma)}};
        }
    }
    j["converged"] = converged;
    out << j.dump(2) << '\n';
    return converged ? kSuccess : kNotConverged;
}

int cmd_population(const std::string& path, std::ostream& out) {
    const PathParams params = params_from_json(read_json_file(path));
    params.validate();
    const PathParams marginal = convert_constraints(params, ConstraintMode::Marginal);
    const auto [h_xi, h_eta] = signal_ratios(params);
    const auto [v_xi, v_eta] = population_reg_variances(params);

    json j;
    j["constraint_mode"] = to_string(params.constraint_mode);
    j["cor_xi_eta"] = params.constraint_mode == ConstraintMode::Marginal
                          ? json(params.construct_correlation())
                          : json(nullptr);
    j["cor_regression"] = population_cor_conditional_means(params);
    j["bias_factor"] = bias_factor(marginal);
    j["H_xi"] = h_xi;
    j["H_eta"] = h_eta;
    j["var_E_xi_given_X"] = v_xi;
    j["var_E_eta_given_Y"] = v_eta;

    const IdentifiabilityReport rep = check_identifiability(params, structural_zeros(params));
    auto side_json = [](const SideIdentification& s) {
        json js = {{"identified", s.identified}, {"witness", nullptr}};
        if (s.witness) js["witness"] = {s.witness->i, s.witness->j};
        return js;
    };
    j["identifiability"] = {{"x", side_json(rep.x)},
                            {"y", side_json(rep.y)},
                            {"correlation_identified", rep.correlation_identified()}};
    out << j.dump(2) << '\n';
    return kSuccess;
}

void print_summary(const SimResult& result, std::ostream& out) {
    for (Estimator e : result.config.estimators) {
        double dev = 0.0;
        int cells = 0;
        int fails = 0;
        for (const SimCell& c : result.cells) {
            if (c.estimator != e) continue;
            fails += c.n_fail;
            if (c.n_ok == 0) continue;
            const double target = e == Estimator::Sem ? c.target_marginal : c.target_regression;
            dev += std::abs(c.mean - target);
            ++cells;
        }
        out << to_string(e) << ": mean |mean - target| = " << (cells > 0 ? dev / cells : std::nan(""))
            << ", failed replications = " << fails << '\n';
    }
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, std::uint64_t seed,
                 std::optional<int> reps, std::ostream& out) {
    json cfg_json = read_json_file(config_path);
    SimConfig config = sim_config_from_json(cfg_json);
    config.seed = seed;
    if (reps) config.reps = *reps;
    const SimResult result = run_grid(config);
    FigureRun run;
    run.n = config.n;
    run.result = result;
    const auto paths = write_figure_csv(out_path, {run});
    out << "wrote " << paths.front() << '\n';
    print_summary(result, out);
    return kSuccess;
}

int cmd_reproduce(int figure, const std::string& out_path, std::uint64_t seed, int reps, std::ostream& out) {
    const std::vector<FigureRun> runs = reproduce_figure(figure, seed, reps);
    const auto paths = write_figure_csv(out_path, runs);
    for (std::size_t k = 0; k < runs.size(); ++k) {
        out << "wrote " << paths[k] << " (N = " << runs[k].n << ")\n";
        print_summary(runs[k].result, out);
    }
    return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Construct-correlation estimators for reflexive two-construct path models"};
    app.name("pathcor");
    app.require_subcommand(1);

    FitArgs fit;
    Eigen::Index ux = 0;
    Eigen::Index uy = 0;
    auto* fit_cmd = app.add_subcommand("fit", "Estimate the construct correlation from a data file");
    fit_cmd->add_option("data", fit.data, "Headerless CSV, X columns then Y columns")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--p", fit.p, "Number of X indicators")->required()->check(CLI::PositiveNumber);
    fit_cmd->add_option("--r", fit.r, "Number of Y indicators")->required()->check(CLI::PositiveNumber);
    fit_cmd->add_option("--method", fit.method, "Estimator")
        ->check(CLI::IsMember({"rrr", "pls", "serr", "sem", "pca", "unit"}));
    auto* ux_opt = fit_cmd->add_option("--ux", ux, "X envelope dimension (pls, serr)")->check(CLI::NonNegativeNumber);
    auto* uy_opt = fit_cmd->add_option("--uy", uy, "Y envelope dimension (pls, serr)")->check(CLI::NonNegativeNumber);
    fit_cmd->add_flag("--select-dims", fit.select_dims, "Choose envelope dimensions by BIC");
    fit_cmd->add_option("--seed", fit.seed, "Seed for the SEM multi-start");
    fit_cmd->add_option("--max-iterations", fit.sem.max_iterations, "SEM optimizer iteration cap")
        ->check(CLI::PositiveNumber);
    fit_cmd->add_option("--tolerance", fit.sem.gradient_tolerance, "SEM gradient infinity-norm tolerance")
        ->check(CLI::PositiveNumber);
    fit_cmd->add_option("--starts", fit.sem.starts, "SEM multi-start count")->check(CLI::PositiveNumber);

    std::string params_path;
    auto* pop_cmd = app.add_subcommand("population", "Population quantities from a parameter file");
    pop_cmd->add_option("params", params_path, "Parameter JSON")->required()->check(CLI::ExistingFile);

    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    int reps = 10;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a Monte Carlo grid from a JSON config");
    sim_cmd->add_option("config", config_path, "Simulation config JSON")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--out", out_path, "Output CSV")->required();
    sim_cmd->add_option("--seed", seed, "Master seed")->required();
    auto* sim_reps = sim_cmd->add_option("--reps", reps, "Replications per grid point")->check(CLI::PositiveNumber);

    int figure = 0;
    auto* rep_cmd = app.add_subcommand("reproduce", "Run a published simulation configuration");
    rep_cmd->add_option("--figure", figure, "Figure id")->required()->check(CLI::Range(1, 4));
    rep_cmd->add_option("--out", out_path, "Output CSV")->required();
    rep_cmd->add_option("--seed", seed, "Master seed")->required();
    rep_cmd->add_option("--reps", reps, "Replications per grid point")->check(CLI::PositiveNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsage;
    }

    try {
        if (fit_cmd->parsed()) {
            if (*ux_opt) fit.ux = ux;
            if (*uy_opt) fit.uy = uy;
            return cmd_fit(fit, out);
        }
        if (pop_cmd->parsed()) return cmd_population(params_path, out);
        if (sim_cmd->parsed())
            return cmd_simulate(config_path, out_path, seed, *sim_reps ? std::optional<int>(reps) : std::nullopt, out);
        if (rep_cmd->parsed()) return cmd_reproduce(figure, out_path, seed, reps, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ParseError& e) {
        err << "parse error";
        if (e.row() > 0) err << " at row " << e.row() << ", column " << e.column();
        err << ": " << e.what() << '\n';
        return kDataError;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << " (condition number " << e.condition_number() << ")\n";
        return kDataError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace pathcor::cli
