#pragma once

#include "pathcor/model.hpp"
#include "pathcor/moments.hpp"

namespace pathcor {

// Rank-1 reduced-rank regression of Y on X.
struct Rank1Fit {
    Matrix beta_yx;  // r x p, rank <= 1
    Vector a_dir;    // left singular direction of the standardized cross-covariance
    Vector b_dir;    // right singular direction, first nonzero entry positive
    double d1 = 0.0; // leading singular value, clamped to [0, 1]
    double d2 = 0.0; // second singular value (0 when min(p, r) = 1)
    // The leading singular value is repeated, so the rank-1 direction is not
    // unique; b_dir was picked lexicographically within the tied subspace.
    bool tied = false;
    // d1 exceeded 1 by rounding and was clamped.
    bool clamped = false;
};

Rank1Fit fit_rank1(const SampleMoments& m);

// Maximum-likelihood estimate of |cor{E(xi|X), E(eta|Y)}|: the first sample
// canonical correlation of X and Y.
double estimate_cor_regression(const SampleMoments& m);

// tr^{1/2}(Sigma_XY Sigma_Y^{-1} Sigma_YX Sigma_X^{-1}).
double population_cor_regression(const JointCov& cov);

}  // namespace pathcor
