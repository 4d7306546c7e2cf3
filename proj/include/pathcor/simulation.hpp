#pragma once

#include "pathcor/model.hpp"
#include "pathcor/moments.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pathcor {

enum class ErrorStructure { Identity, EnvelopeStructured };

enum class Estimator { Rrr, Pls, Serr, Sem, Pca, Unit };

std::string to_string(ErrorStructure e);
std::string to_string(Estimator e);
ErrorStructure error_structure_from_string(const std::string& s);
Estimator estimator_from_string(const std::string& s);

const std::vector<Estimator>& all_estimators();

// 13 equispaced points from 0.05 to 0.65.
std::vector<double> default_rho_grid();

struct SimConfig {
    Vector loading;
    ErrorStructure error_structure = ErrorStructure::Identity;
    std::vector<double> rho_grid = default_rho_grid();
    Eigen::Index n = 100;
    int reps = 10;
    std::uint64_t seed = 0;
    std::vector<Estimator> estimators = all_estimators();
    // Envelope dimensions used by the pls and serr estimators.
    Eigen::Index u_x = 1;
    Eigen::Index u_y = 1;

    // Throws InputError on reps < 1, grid values outside (-1, 1), a zero
    // loading, n too small, or an empty estimator list.
    void validate() const;
};

// Keys: loading, error_structure, rho_grid, n, reps, seed, estimators, u_x, u_y.
// loading and n are required.
SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimConfig& config);

// Marginal-mode parameters for one grid point of `config`.
PathParams sim_params(const SimConfig& config, double rho);

// n rows from the (X, Y) margin of the model, drawn as mean + Sigma^{1/2} z.
Dataset generate_dataset(const PathParams& params, Eigen::Index n, std::uint64_t seed);

// Seed of replication `rep` at grid value `rho`. Keyed on the value rather
// than its position so reordering the grid leaves every cell unchanged.
std::uint64_t child_seed(std::uint64_t master, double rho, int rep);

struct SimCell {
    double rho = 0.0;
    Estimator estimator = Estimator::Rrr;
    double mean = 0.0;
    double sd = 0.0;
    int n_ok = 0;
    int n_fail = 0;
    double target_marginal = 0.0;
    double target_regression = 0.0;
};

struct SimResult {
    SimConfig config;
    // Grid order, then estimator order of the config.
    std::vector<SimCell> cells;

    const SimCell& cell(double rho, Estimator e) const;
};

// Value one estimator reports on one dataset: the rho estimate for sem, the
// regression-scale estimate otherwise. Throws on estimator failure
// (including sem non-convergence).
double run_estimator(Estimator e, const Dataset& data, const SimConfig& config, std::uint64_t seed);

SimResult run_grid(const SimConfig& config);

// Header: rho,estimator,mean,sd,n_fail,target_marginal,target_regression.
void write_csv(std::ostream& out, const SimResult& result);

struct FigureRun {
    int figure = 0;
    Eigen::Index n = 0;
    SimResult result;
};

// Published configuration of figure `id` (1 to 4) at sample size n.
SimConfig figure_config(int id, Eigen::Index n, std::uint64_t seed, int reps = 10);
std::vector<Eigen::Index> figure_sample_sizes(int id);

std::vector<FigureRun> reproduce_figure(int id, std::uint64_t seed, int reps = 10);

// Writes one CSV per run. With a single run the file is `path`; otherwise
// `<stem>_n<N><ext>` for each sample size. Returns the paths written.
std::vector<std::string> write_figure_csv(const std::string& path, const std::vector<FigureRun>& runs);

}  // namespace pathcor
