#include "pathcor/simulation.hpp"

#include "pathcor/envelope.hpp"
#include "pathcor/errors.hpp"
#include "pathcor/random.hpp"
#include "pathcor/rrr.hpp"
#include "pathcor/sem.hpp"

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace pathcor {

std::string to_string(ErrorStructure e) {
    return e == ErrorStructure::Identity ? "identity" : "envelope_structured";
}

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::Rrr: return "rrr";
        case Estimator::Pls: return "pls";
        case Estimator::Serr: return "serr";
        case Estimator::Sem: return "sem";
        case Estimator::Pca: return "pca";
        case Estimator::Unit: return "unit";
    }
    return "unknown";
}

ErrorStructure error_structure_from_string(const std::string& s) {
    if (s == "identity") return ErrorStructure::Identity;
    if (s == "envelope_structured") return ErrorStructure::EnvelopeStructured;
    throw InputError("unknown error structure '" + s + "' (expected identity or envelope_structured)");
}

Estimator estimator_from_string(const std::string& s) {
    for (Estimator e : all_estimators())
        if (to_string(e) == s) return e;
    throw InputError("unknown estimator '" + s + "' (expected rrr, pls, serr, sem, pca or unit)");
}

const std::vector<Estimator>& all_estimators() {
    static const std::vector<Estimator> all = {Estimator::Rrr, Estimator::Pls, Estimator::Serr,
                                               Estimator::Sem, Estimator::Pca, Estimator::Unit};
    return all;
}

std::vector<double> default_rho_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 13; ++i) grid.push_back(0.05 + 0.05 * i);
    return grid;
}

void SimConfig::validate() const {
    if (loading.size() == 0 || loading.squaredNorm() == 0.0) throw InputError("loading must be nonzero");
    if (!loading.allFinite()) throw InputError("loading has non-finite entries");
    if (reps < 1) throw InputError("reps must be at least 1");
    if (rho_grid.empty()) throw InputError("rho_grid is empty");
    for (double rho : rho_grid)
        if (!(rho > -1.0 && rho < 1.0)) throw InputError("rho_grid values must lie in (-1, 1)");
    const Eigen::Index k = loading.size();
    if (n <= 2 * k) throw InputError("n must exceed p + r");
    if (estimators.empty()) throw InputError("no estimators requested");
    if (u_x < 0 || u_x > k || u_y < 0 || u_y > k) throw InputError("u_x and u_y must lie in [0, p]");
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("simulation config must be a JSON object");
    std::vector<std::string> missing;
    for (const char* key : {"loading", "n"})
        if (!j.contains(key)) missing.push_back(key);
    if (!missing.empty()) {
        std::string msg = "simulation config is missing required fields:";
        for (const auto& k : missing) msg += " " + k;
        throw ParseError(msg);
    }
    SimConfig c;
    try {
        const auto loading = j.at("loading").get<std::vector<double>>();
        c.loading = Eigen::Map<const Vector>(loading.data(), static_cast<Eigen::Index>(loading.size()));
        c.n = j.at("n").get<Eigen::Index>();
        if (j.contains("error_structure"))
            c.error_structure = error_structure_from_string(j.at("error_structure").get<std::string>());
        if (j.contains("rho_grid")) c.rho_grid = j.at("rho_grid").get<std::vector<double>>();
        if (j.contains("reps")) c.reps = j.at("reps").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("estimators")) {
            c.estimators.clear();
            for (const auto& s : j.at("estimators").get<std::vector<std::string>>())
                c.estimators.push_back(estimator_from_string(s));
        }
        if (j.contains("u_x")) c.u_x = j.at("u_x").get<Eigen::Index>();
        if (j.contains("u_y")) c.u_y = j.at("u_y").get<Eigen::Index>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("simulation config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const SimConfig& c) {
    nlohmann::json j;
    j["loading"] = std::vector<double>(c.loading.data(), c.loading.data() + c.loading.size());
    j["error_structure"] = to_string(c.error_structure);
    j["rho_grid"] = c.rho_grid;
    j["n"] = c.n;
    j["reps"] = c.reps;
    j["seed"] = c.seed;
    std::vector<std::string> est;
    for (Estimator e : c.estimators) est.push_back(to_string(e));
    j["estimators"] = est;
    j["u_x"] = c.u_x;
    j["u_y"] = c.u_y;
    return j;
}

PathParams sim_params(const SimConfig& config, double rho) {
    const Eigen::Index k = config.loading.size();
    const Matrix err = config.error_structure == ErrorStructure::Identity
                           ? Matrix(Matrix::Identity(k, k))
                           : envelope_structured_error(config.loading);
    return symmetric_params(config.loading, err, rho);
}

Dataset generate_dataset(const PathParams& params, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InputError("n must be positive");
    const JointCov cov = joint_covariance(params);
    const Matrix sigma = cov.observed();
    linalg::require_spd(sigma, "(X, Y) covariance");
    const Matrix root = linalg::sqrt_psd(sigma);
    const Eigen::Index k = sigma.rows();
    Vector mean(k);
    mean << params.mu_x, params.mu_y;

    Rng rng(seed);
    Matrix z(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) z(i, j) = rng.normal();

    Dataset data;
    data.p = params.p();
    data.r = params.r();
    data.rows = z * root;  // root is symmetric
    data.rows.rowwise() += mean.transpose();
    return data;
}

std::uint64_t child_seed(std::uint64_t master, double rho, int rep) {
    return derive_seed(master, std::bit_cast<std::uint64_t>(rho), static_cast<std::uint64_t>(rep));
}

const SimCell& SimResult::cell(double rho, Estimator e) const {
    for (const SimCell& c : cells)
        if (c.rho == rho && c.estimator == e) return c;
    throw InputError("no cell for rho " + std::to_string(rho) + " and estimator " + to_string(e));
}

double run_estimator(Estimator e, const Dataset& data, const SimConfig& config, std::uint64_t seed) {
    const SampleMoments m = compute_moments(data);
    switch (e) {
        case Estimator::Rrr: return estimate_cor_regression(m);
        case Estimator::Pls: return composite_estimate(m, simpls_weights(m, config.u_x, config.u_y)).estimate;
        case Estimator::Serr: return serr_estimate(m, config.u_x, config.u_y, CompositeMethod::EnvelopeMle).estimate;
        case Estimator::Pca: return composite_estimate(m, pca_weights(m)).estimate;
        case Estimator::Unit: return composite_estimate(m, unit_weights(m.p(), m.r())).estimate;
        case Estimator::Sem: {
            SemOptions opts;
            opts.seed = seed;
            const SemFit fit = fit_sem(m, opts);
            if (!fit.converged) throw NumericalError("sem did not converge", 0.0);
            return fit.rho;
        }
    }
    throw InputError("unknown estimator");
}

SimResult run_grid(const SimConfig& config) {
    config.validate();
    SimResult result;
    result.config = config;
    const std::size_t n_est = config.estimators.size();
    for (double rho : config.rho_grid) {
        const PathParams params = sim_params(config, rho);
        const double factor = bias_factor(params);
        std::vector<std::vector<double>> values(n_est);
        std::vector<int> fails(n_est, 0);
        for (int rep = 0; rep < config.reps; ++rep) {
            const std::uint64_t seed = child_seed(config.seed, rho, rep);
            const Dataset data = generate_dataset(params, config.n, seed);
            for (std::size_t k = 0; k < n_est; ++k) {
                try {
                    const double v = run_estimator(config.estimators[k], data, config, derive_seed(seed, k + 1));
                    if (std::isfinite(v))
                        values[k].push_back(v);
                    else
                        ++fails[k];
                } catch (const std::exception&) {
                    ++fails[k];
                }
            }
        }
        for (std::size_t k = 0; k < n_est; ++k) {
            SimCell c;
            c.rho = rho;
            c.estimator = config.estimators[k];
            c.n_ok = static_cast<int>(values[k].size());
            c.n_fail = fails[k];
            c.target_marginal = rho;
            c.target_regression = factor * rho;
            if (c.n_ok > 0) {
                double sum = 0.0;
                for (double v : values[k]) sum += v;
                c.mean = sum / c.n_ok;
                double ss = 0.0;
                for (double v : values[k]) ss += (v - c.mean) * (v - c.mean);
                c.sd = c.n_ok > 1 ? std::sqrt(ss / (c.n_ok - 1)) : 0.0;
            } else {
                c.mean = std::nan("");
                c.sd = std::nan("");
            }
            result.cells.push_back(c);
        }
    }
    return result;
}

void write_csv(std::ostream& out, const SimResult& result) {
    std::ostringstream s;
    s << std::setprecision(12);
    s << "rho,estimator,mean,sd,n_fail,target_marginal,target_regression\n";
    for (const SimCell& c : result.cells) {
        s << c.rho << ',' << to_string(c.estimator) << ',' << c.mean << ',' << c.sd << ',' << c.n_fail
          << ',' << c.target_marginal << ',' << c.target_regression << '\n';
    }
    out << s.str();
}

std::vector<Eigen::Index> figure_sample_sizes(int id) {
    switch (id) {
        case 1:
        case 3: return {100, 1000};
        case 2:
        case 4: return {100};
        default: throw InputError("unknown figure " + std::to_string(id) + " (expected 1, 2, 3 or 4)");
    }
}

SimConfig figure_config(int id, Eigen::Index n, std::uint64_t seed, int reps) {
    figure_sample_sizes(id);
    SimConfig c;
    c.loading = Vector(3);
    switch (id) {
        case 1:
        case 3: c.loading << 4.0 / 3.0, 0.98, 0.75; break;
        case 2: c.loading << 0.58, 0.98, 0.0; break;
        default: c.loading << 4.0, 4.0, 4.0; break;
    }
    c.error_structure = id == 3 ? ErrorStructure::EnvelopeStructured : ErrorStructure::Identity;
    c.n = n;
    c.reps = reps;
    c.seed = seed;
    return c;
}

std::vector<FigureRun> reproduce_figure(int id, std::uint64_t seed, int reps) {
    std::vector<FigureRun> runs;
    for (Eigen::Index n : figure_sample_sizes(id)) {
        FigureRun run;
        run.figure = id;
        run.n = n;
        run.result = run_grid(figure_config(id, n, seed, reps));
        runs.push_back(std::move(run));
    }
    return runs;
}

std::vector<std::string> write_figure_csv(const std::string& path, const std::vector<FigureRun>& runs) {
    std::vector<std::string> paths;
    const std::filesystem::path base(path);
    for (const FigureRun& run : runs) {
        std::filesystem::path target = base;
        if (runs.size() > 1) {
            target = base.parent_path() /
                     (base.stem().string() + "_n" + std::to_string(run.n) + base.extension().string());
        }
        std::ofstream out(target);
        if (!out) throw InputError("cannot open '" + target.string() + "' for writing");
        write_csv(out, run.result);
        out.close();
        if (!out) throw InputError("failed writing '" + target.string() + "'");
        paths.push_back(target.string());
    }
    return paths;
}

}  // namespace pathcor
