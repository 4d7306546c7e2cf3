#pragma once

// Population side of the two-construct reflexive model:
//
//   X = mu_x + beta_x (xi - mu_xi) + e_x,    e_x ~ N(0, Sigma_{X|xi})
//   Y = mu_y + beta_y (eta - mu_eta) + e_y,  e_y ~ N(0, Sigma_{Y|eta})
//   (xi, eta) ~ N2(0, [[var_xi, cov], [cov, var_eta]])
//
// with all error terms independent. Everything here is a closed-form function
// of the parameters.

#include "pathcor/linalg.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pathcor {

enum class ConstraintMode { Marginal, Regression };

std::string to_string(ConstraintMode mode);
ConstraintMode constraint_mode_from_string(const std::string& s);

struct PathParams {
    Vector mu_x;
    Vector mu_y;
    Vector beta_x_xi;
    Vector beta_y_eta;
    Matrix sigma_x_given_xi;
    Matrix sigma_y_given_eta;
    double var_xi = 1.0;
    double var_eta = 1.0;
    double cov_xi_eta = 0.0;
    ConstraintMode constraint_mode = ConstraintMode::Marginal;

    Eigen::Index p() const { return beta_x_xi.size(); }
    Eigen::Index r() const { return beta_y_eta.size(); }

    // cov_xi_eta / sqrt(var_xi var_eta)
    double construct_correlation() const;

    // Throws InputError if dimensions disagree, an error covariance is not
    // PD, or the construct covariance is not PD. Marginal mode additionally
    // requires var_xi == var_eta == 1 (to 1e-12). Regression mode is checked
    // only when check_regression_scale is set, since it is a derived property.
    void validate(bool check_regression_scale = false) const;
};

// Marginal-mode parameters with identical loadings on both sides, zero means
// and a shared error covariance; the layout used by every simulation figure.
PathParams symmetric_params(const Vector& loading, const Matrix& error_cov, double rho);

// L (L^T L)^{-1} L^T + 3 L0 L0^T, where L0 is an orthonormal complement of L.
Matrix envelope_structured_error(const Vector& loading);

// Covariance of (X, Y, xi, eta), in that order.
struct JointCov {
    Eigen::Index p = 0;
    Eigen::Index r = 0;
    Matrix full;

    Matrix sigma_x() const { return full.topLeftCorner(p, p); }
    Matrix sigma_y() const { return full.block(p, p, r, r); }
    Matrix sigma_yx() const { return full.block(p, 0, r, p); }
    Matrix sigma_xy() const { return full.block(0, p, p, r); }
    // Joint covariance of (X, Y).
    Matrix observed() const { return full.topLeftCorner(p + r, p + r); }
    Vector sigma_x_xi() const { return full.block(0, p + r, p, 1); }
    Vector sigma_y_eta() const { return full.block(p, p + r + 1, r, 1); }
    Vector sigma_x_eta() const { return full.block(0, p + r + 1, p, 1); }
    Vector sigma_y_xi() const { return full.block(p, p + r, r, 1); }
    Matrix construct_cov() const { return full.bottomRightCorner(2, 2); }
};

JointCov joint_covariance(const PathParams& params);

// (var{E(xi|X)}, var{E(eta|Y)}).
std::pair<double, double> population_reg_variances(const PathParams& params);

// (H_xi, H_eta) with H_xi = Sigma_{xi X} Sigma_{X|xi}^{-1} Sigma_{X xi}.
std::pair<double, double> signal_ratios(const PathParams& params);

// [H_xi/(1+H_xi) * H_eta/(1+H_eta)]^{1/2}; marginal mode only.
double bias_factor(const PathParams& params);

// H/(H-1): the construct variance implied by H under regression constraints.
double sigma2_from_H(double H);

// cor{E(xi|X), E(eta|Y)} computed directly from the joint covariance blocks.
double population_cor_conditional_means(const PathParams& params);

// Rescale the constructs so the target constraints hold. The (X, Y)
// distribution and cor(xi, eta) are unchanged.
PathParams convert_constraints(const PathParams& params, ConstraintMode target);

enum class IndicatorSide { X, Y };

struct KnownZero {
    IndicatorSide side;
    Eigen::Index i;
    Eigen::Index j;
};

struct SideIdentification {
    bool identified = false;
    // First declared zero that delivers identification, if any.
    std::optional<KnownZero> witness;
};

struct IdentifiabilityReport {
    SideIdentification x;
    SideIdentification y;
    bool correlation_identified() const { return x.identified && y.identified; }
};

// A declared zero (i, j) of Sigma_{X|xi} identifies the X side when the
// loadings at i and j are both nonzero; likewise for Y.
IdentifiabilityReport check_identifiability(const PathParams& params,
                                            const std::vector<KnownZero>& known_zeros);

// All off-diagonal positions of both error covariances (the diagonal-error
// assumption made explicit).
std::vector<KnownZero> diagonal_error_zeros(Eigen::Index p, Eigen::Index r);

// Off-diagonal positions where the parameter matrices are exactly zero.
std::vector<KnownZero> structural_zeros(const PathParams& params);

// JSON with the field names used on disk; matrices are row-major arrays.
nlohmann::json to_json(const PathParams& params);
PathParams params_from_json(const nlohmann::json& j);

}  // namespace pathcor
