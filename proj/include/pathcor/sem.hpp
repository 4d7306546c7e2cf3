#pragma once

// Maximum-likelihood fit of the diagonal-error two-factor SEM:
//
//   Sigma = [[D_x + l_x l_x^T,   rho l_x l_y^T],
//            [rho l_y l_x^T,     D_y + l_y l_y^T]]
//
// The same covariance family can be written under regression constraints,
// where the X block reads D_x + (B^T D_x^{-1} B)^{-1} B B^T / (s2_xi - 1) and
// the cross block is B A^T. Both parameterizations are supported; they
// describe the same set of covariance matrices.

#include "pathcor/moments.hpp"

#include <cstdint>
#include <vector>

namespace pathcor {

enum class SemParameterization { Marginal, Regression };

struct SemOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-7;
    int starts = 5;
    std::uint64_t seed = 0;
    SemParameterization parameterization = SemParameterization::Marginal;
};

struct SemFit {
    Vector lambda_x;
    Vector lambda_y;
    Vector d_x;
    Vector d_y;
    double rho = 0.0;
    double neg_loglik = 0.0;
    // ML discrepancy log det Sigma + tr(S Sigma^{-1}) - log det S - (p + r).
    double discrepancy = 0.0;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    // Some uniqueness collapsed below 1e-6.
    bool heywood = false;
    int starts_converged = 0;
    // Objective after each accepted iteration of the winning start.
    std::vector<double> objective_trace;
};

Matrix sem_structured_cov(const SemFit& fit);

SemFit fit_sem(const SampleMoments& m, const SemOptions& opts = {});

// bias factor of the fitted model times |rho|.
double sem_implied_reg_correlation(const SemFit& fit);

// Discrepancy function and its analytic gradient over an unconstrained
// parameter vector. Marginal layout: (l_x, l_y, log d_x, log d_y, atanh rho).
// Regression layout: (B, A, log d_x, log d_y, log(s2_xi - 1), log(s2_eta - 1)).
class SemObjective {
public:
    SemObjective(const Matrix& sample_cov, Eigen::Index p, SemParameterization param);

    Eigen::Index dimension() const;
    // +inf outside the model (non-PD Sigma, or |rho| >= 1 under regression).
    double value(const Vector& theta) const;
    Vector gradient(const Vector& theta) const;
    Matrix implied_cov(const Vector& theta) const;
    // Map theta to loadings/uniquenesses/rho with the sign convention applied.
    SemFit to_fit(const Vector& theta) const;
    // Inverse of to_fit (for the marginal layout, exact; for the regression
    // layout, one representative of the scale-equivalent family).
    Vector from_fit(const SemFit& fit) const;

private:
    struct Pieces;
    bool build(const Vector& theta, Pieces& out) const;

    Matrix s_;
    double logdet_s_;
    Eigen::Index p_;
    Eigen::Index r_;
    SemParameterization param_;
};

}  // namespace pathcor
