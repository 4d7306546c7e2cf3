#pragma once

#include "pathcor/linalg.hpp"

#include <iosfwd>
#include <string>

namespace pathcor {

// n observations of (X, Y); columns 0..p-1 are X, p..p+r-1 are Y.
struct Dataset {
    Eigen::Index p = 0;
    Eigen::Index r = 0;
    Matrix rows;

    Eigen::Index n() const { return rows.rows(); }
    auto x() const { return rows.leftCols(p); }
    auto y() const { return rows.rightCols(r); }

    // Throws InputError on shape mismatch, n < 2, or non-finite entries.
    void validate() const;
};

// Headerless, comma-delimited, one observation per row. Throws ParseError
// with the 1-based row and column of the first bad field.
Dataset read_csv(std::istream& in, Eigen::Index p, Eigen::Index r);
Dataset read_csv_file(const std::string& path, Eigen::Index p, Eigen::Index r);
void write_csv(std::ostream& out, const Dataset& data);

// Sample moments with divisor n (maximum-likelihood convention).
struct SampleMoments {
    Eigen::Index n = 0;
    Vector mean_x;
    Vector mean_y;
    Matrix s_x;
    Matrix s_y;
    Matrix s_yx;  // r x p

    Eigen::Index p() const { return s_x.rows(); }
    Eigen::Index r() const { return s_y.rows(); }
    Matrix s_xy() const { return s_yx.transpose(); }
    // Joint covariance of (X, Y).
    Matrix joint() const;
};

SampleMoments compute_moments(const Dataset& data);

// Treat a population (X, Y) covariance as if it were a sample of size n.
SampleMoments moments_from_covariance(const Matrix& joint_xy, Eigen::Index p, Eigen::Index n);

// S_Y^{-1/2} S_YX S_X^{-1/2}; its singular values are the sample canonical
// correlations. Throws NumericalError naming the singular block.
Matrix standardized_cross_cov(const SampleMoments& m);

// Moments of the composites (phi^T X, gamma^T Y).
SampleMoments project_moments(const SampleMoments& m, const Matrix& phi, const Matrix& gamma);

}  // namespace pathcor
