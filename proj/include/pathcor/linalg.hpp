#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace pathcor {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Relative eigenvalue floor used for every positive-definiteness decision.
inline constexpr double kEigenFloor = 1e-12;

namespace linalg {

// True when m is symmetric (to 1e-10 relative) and every eigenvalue exceeds
// kEigenFloor times the largest one.
bool is_spd(const Matrix& m);

// Throws InputError naming `what` unless m is symmetric positive definite.
void require_spd(const Matrix& m, std::string_view what);

// Symmetric square root and inverse square root by eigendecomposition.
// inv_sqrt_spd throws NumericalError (with the condition number) when the
// smallest eigenvalue falls below the floor.
Matrix sqrt_psd(const Matrix& m);
Matrix inv_sqrt_spd(const Matrix& m, std::string_view what);

// Inverse of an SPD matrix; same failure contract as inv_sqrt_spd.
Matrix inv_spd(const Matrix& m, std::string_view what);

// Condition number from the symmetric eigenvalues (inf if singular).
double condition_number(const Matrix& m);

// log det of an SPD matrix via Cholesky; returns +inf if m is not PD.
double logdet_spd(const Matrix& m);

// Flip the sign of v so its first entry with |v_i| > tol*max|v| is positive.
// Returns true if the sign was flipped.
bool normalize_sign(Vector& v, double tol = 1e-12);

// Orthonormal basis for span(m) completed to a full orthogonal matrix; the
// first rank(m) columns span m.
Matrix orthogonal_completion(const Matrix& m);

// Orthonormalize the columns of m (thin QR). Columns must be independent.
Matrix orthonormalize(const Matrix& m);

// Largest principal angle (radians) between span(a) and span(b). Both must
// have orthonormal columns and the same column count.
double max_principal_angle(const Matrix& a, const Matrix& b);

// Singular values in descending order.
Vector singular_values(const Matrix& m);

}  // namespace linalg
}  // namespace pathcor
