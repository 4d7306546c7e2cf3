#include "pathcor/rrr.hpp"

#include "pathcor/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pathcor {

namespace {

constexpr double kTieTolerance = 1e-10;

// Unit vector in span(basis) closest to the first coordinate axis that is not
// orthogonal to the span.
Vector lexicographic_direction(const Matrix& basis) {
    const Eigen::Index n = basis.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        Vector v = basis * basis.row(k).transpose();
        const double norm = v.norm();
        if (norm > 1e-8) return v / norm;
    }
    return basis.col(0);
}

}  // namespace

Rank1Fit fit_rank1(const SampleMoments& m) {
    const Matrix sx_inv_half = linalg::inv_sqrt_spd(m.s_x, "sample covariance of X (s_x)");
    const Matrix sy_inv_half = linalg::inv_sqrt_spd(m.s_y, "sample covariance of Y (s_y)");
    const Matrix k = sy_inv_half * m.s_yx * sx_inv_half;

    Eigen::JacobiSVD<Matrix> svd(k, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();

    Rank1Fit fit;
    const Eigen::Index p = m.p();
    const Eigen::Index r = m.r();
    fit.d2 = s.size() > 1 ? s[1] : 0.0;
    double d1 = s.size() > 0 ? s[0] : 0.0;

    if (d1 <= 0.0) {
        fit.d1 = 0.0;
        fit.a_dir = Vector::Unit(r, 0);
        fit.b_dir = Vector::Unit(p, 0);
        fit.beta_yx = Matrix::Zero(r, p);
        return fit;
    }

    Eigen::Index n_tied = 1;
    while (n_tied < s.size() && s[n_tied] >= d1 * (1.0 - kTieTolerance)) ++n_tied;
    fit.tied = n_tied > 1;

    Vector b = fit.tied ? lexicographic_direction(svd.matrixV().leftCols(n_tied)) : Vector(svd.matrixV().col(0));
    linalg::normalize_sign(b);
    Vector a = k * b;
    a /= a.norm();

    if (d1 > 1.0) {
        fit.clamped = true;
        d1 = 1.0;
    }
    fit.d1 = d1;
    fit.a_dir = a;
    fit.b_dir = b;
    fit.beta_yx = linalg::sqrt_psd(m.s_y) * a * d1 * b.transpose() * sx_inv_half;
    return fit;
}

double estimate_cor_regression(const SampleMoments& m) {
    return fit_rank1(m).d1;
}

double population_cor_regression(const JointCov& cov) {
    const Matrix sx = cov.sigma_x();
    const Matrix sy = cov.sigma_y();
    const Matrix sx_inv = linalg::inv_spd(sx, "Sigma_X");
    const Matrix sy_inv = linalg::inv_spd(sy, "Sigma_Y");
    const double t = (cov.sigma_xy() * sy_inv * cov.sigma_yx() * sx_inv).trace();
    return std::sqrt(std::max(0.0, t));
}

}  // namespace pathcor
