#pragma once

// Composite-based estimators. Every estimator here reduces X and Y to
// composites phi^T X and gamma^T Y and then applies the canonical-correlation
// estimator to the composite moments.

#include "pathcor/moments.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pathcor {

enum class CompositeMethod { Simpls, EnvelopeMle, Pca, Unit };

std::string to_string(CompositeMethod method);

struct CompositeWeights {
    Matrix gamma;  // r x u_y, orthonormal columns
    Matrix phi;    // p x u_x, orthonormal columns
    Eigen::Index u_y = 0;
    Eigen::Index u_x = 0;
    CompositeMethod method = CompositeMethod::Simpls;
    bool converged = true;
    int iterations = 0;
    // Envelope objective per accepted step (EnvelopeMle only).
    std::vector<double> trace_x;
    std::vector<double> trace_y;
};

struct EnvelopeOptions {
    int max_iterations = 2000;
    double gradient_tolerance = 1e-10;  // Frobenius norm of the Riemannian gradient
};

// log det(G^T S_res G) + log det(G^T S^{-1} G) for orthonormal G.
double envelope_objective(const Matrix& g, const Matrix& s_res, const Matrix& s_inv);

struct EnvelopeBasisFit {
    Matrix basis;
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> trace;
};

// Minimize envelope_objective over the Grassmannian from `start` by
// Riemannian gradient descent with a monotone line search.
EnvelopeBasisFit minimize_envelope_objective(const Matrix& s_res, const Matrix& s_inv,
                                             const Matrix& start,
                                             const EnvelopeOptions& opts = {});

CompositeWeights simpls_weights(const SampleMoments& m, Eigen::Index u_x, Eigen::Index u_y);

CompositeWeights envelope_weights_mle(const SampleMoments& m, Eigen::Index u_x,
                                      Eigen::Index u_y, const EnvelopeOptions& opts = {});

// Leading eigenvectors of s_x and s_y; u = 1 on each side.
CompositeWeights pca_weights(const SampleMoments& m);

// phi = 1_p / sqrt(p), gamma = 1_r / sqrt(r).
CompositeWeights unit_weights(Eigen::Index p, Eigen::Index r);

struct FitResult {
    std::string estimator;
    // Estimate of |cor{E(xi|X), E(eta|Y)}|.
    double estimate = 0.0;
    // Estimate of cor(xi, eta) when the estimator provides one (SEM).
    std::optional<double> rho;
    std::optional<CompositeWeights> weights;
    bool converged = true;
    // u = 0 on some side: composites carry no construct information.
    bool degenerate = false;
    nlohmann::json diagnostics = nlohmann::json::object();
};

// Canonical-correlation estimate on the composites defined by `w`.
FitResult composite_estimate(const SampleMoments& m, const CompositeWeights& w);

// Simultaneous envelope reduced-rank estimate. `method` must be Simpls or
// EnvelopeMle. At full dimensions the raw moments are used directly.
FitResult serr_estimate(const SampleMoments& m, Eigen::Index u_x, Eigen::Index u_y,
                        CompositeMethod method = CompositeMethod::EnvelopeMle);
FitResult serr_estimate(const Dataset& data, Eigen::Index u_x, Eigen::Index u_y,
                        CompositeMethod method = CompositeMethod::EnvelopeMle);

struct DimensionScore {
    Eigen::Index u_x = 0;
    Eigen::Index u_y = 0;
    double neg2_loglik = 0.0;  // per observation, up to a constant
    double parameters = 0.0;
    double bic = 0.0;
};

// BIC over the (p + 1)(r + 1) grid of envelope dimensions. The likelihood is
// that of the envelope-structured joint covariance with a rank-1 composite
// cross-covariance, evaluated at the bases produced by `method`.
std::vector<DimensionScore> dimension_scores(const SampleMoments& m,
                                             CompositeMethod method = CompositeMethod::EnvelopeMle);
std::pair<Eigen::Index, Eigen::Index> select_dimensions(
    const Dataset& data, CompositeMethod method = CompositeMethod::EnvelopeMle);

}  // namespace pathcor
