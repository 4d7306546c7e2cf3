#pragma once

#include "pathcor/model.hpp"
#include "pathcor/moments.hpp"
#include "pathcor/random.hpp"

#include <cmath>

namespace pathcor::test {

inline Vector figure1_loading() {
    Vector l(3);
    l << 4.0 / 3.0, 0.98, 0.75;
    return l;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

inline Vector random_vector(Rng& rng, Eigen::Index n) { return random_matrix(rng, n, 1).col(0); }

// Well-conditioned SPD matrix.
inline Matrix random_spd(Rng& rng, Eigen::Index n) {
    const Matrix a = random_matrix(rng, n, n);
    return a * a.transpose() / static_cast<double>(n) + 0.5 * Matrix::Identity(n, n);
}

inline Matrix random_orthogonal(Rng& rng, Eigen::Index n) {
    Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
    return qr.householderQ() * Matrix::Identity(n, n);
}

// Diagonal with entries in [0.3, 2.3).
inline Matrix random_diagonal(Rng& rng, Eigen::Index n) {
    Vector d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = 0.3 + 2.0 * rng.uniform();
    return d.asDiagonal();
}

inline PathParams random_marginal_params(Rng& rng, Eigen::Index p, Eigen::Index r, bool diagonal_errors = false) {
    PathParams params;
    params.mu_x = random_vector(rng, p);
    params.mu_y = random_vector(rng, r);
    params.beta_x_xi = random_vector(rng, p);
    params.beta_y_eta = random_vector(rng, r);
    params.sigma_x_given_xi = diagonal_errors ? random_diagonal(rng, p) : random_spd(rng, p);
    params.sigma_y_given_eta = diagonal_errors ? random_diagonal(rng, r) : random_spd(rng, r);
    params.var_xi = 1.0;
    params.var_eta = 1.0;
    params.cov_xi_eta = 1.9 * rng.uniform() - 0.95;
    params.constraint_mode = ConstraintMode::Marginal;
    return params;
}

inline SampleMoments population_moments(const PathParams& params, Eigen::Index n = 1000) {
    return moments_from_covariance(joint_covariance(params).observed(), params.p(), n);
}

inline SampleMoments random_sample_moments(Rng& rng, Eigen::Index n, Eigen::Index p, Eigen::Index r) {
    Dataset d;
    d.p = p;
    d.r = r;
    d.rows = random_matrix(rng, n, p + r);
    // Mild dependence between the blocks.
    d.rows.rightCols(r) += 0.5 * d.rows.leftCols(p) * random_matrix(rng, p, r);
    return compute_moments(d);
}

}  // namespace pathcor::test
