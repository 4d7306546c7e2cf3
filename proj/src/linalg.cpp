#include "pathcor/linalg.hpp"

#include "pathcor/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pathcor::linalg {

namespace {

bool is_symmetric(const Matrix& m) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

Eigen::SelfAdjointEigenSolver<Matrix> eig(const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose()));
}

[[noreturn]] void throw_singular(std::string_view what, const Vector& evals) {
    const double hi = evals.maxCoeff();
    const double lo = evals.minCoeff();
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    throw NumericalError(std::string(what) + " is singular or not positive definite (condition number " +
                             std::to_string(cond) + ")",
                         cond);
}

}  // namespace

bool is_spd(const Matrix& m) {
    if (m.size() == 0 || !is_symmetric(m) || !m.allFinite()) return false;
    const Vector ev = eig(m).eigenvalues();
    const double hi = ev.maxCoeff();
    return hi > 0.0 && ev.minCoeff() > kEigenFloor * hi;
}

void require_spd(const Matrix& m, std::string_view what) {
    if (!is_spd(m)) {
        throw InputError(std::string(what) + " must be symmetric positive definite");
    }
}

Matrix sqrt_psd(const Matrix& m) {
    const auto es = eig(m);
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Matrix inv_sqrt_spd(const Matrix& m, std::string_view what) {
    const auto es = eig(m);
    const Vector& ev = es.eigenvalues();
    if (ev.size() == 0 || ev.maxCoeff() <= 0.0 || ev.minCoeff() <= kEigenFloor * ev.maxCoeff()) {
        throw_singular(what, ev);
    }
    const Vector inv_root = ev.cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose();
}

Matrix inv_spd(const Matrix& m, std::string_view what) {
    const auto es = eig(m);
    const Vector& ev = es.eigenvalues();
    if (ev.size() == 0 || ev.maxCoeff() <= 0.0 || ev.minCoeff() <= kEigenFloor * ev.maxCoeff()) {
        throw_singular(what, ev);
    }
    return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

double condition_number(const Matrix& m) {
    const Vector ev = eig(m).eigenvalues().cwiseAbs();
    const double lo = ev.minCoeff();
    return lo > 0.0 ? ev.maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

double logdet_spd(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
    if ((diag.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    return 2.0 * diag.array().log().sum();
}

bool normalize_sign(Vector& v, double tol) {
    if (v.size() == 0) return false;
    const double cutoff = tol * v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > cutoff) {
            if (v[i] < 0.0) {
                v = -v;
                return true;
            }
            return false;
        }
    }
    return false;
}

Matrix orthogonal_completion(const Matrix& m) {
    const Eigen::Index n = m.rows();
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    return q;
}

Matrix orthonormalize(const Matrix& m) {
    if (m.cols() == 0) return Matrix(m.rows(), 0);
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    // Keep each column pointing the same way as the input column.
    const Matrix r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
    if (a.cols() == 0) return 0.0;
    const Vector s = singular_values(a.transpose() * b);
    const double smallest = std::clamp(s.minCoeff(), -1.0, 1.0);
    // acos loses precision near 1; use the projection residual instead.
    const Matrix resid = b - a * (a.transpose() * b);
    const double sin_max = singular_values(resid).maxCoeff();
    return smallest > 0.7 ? std::asin(std::min(1.0, sin_max)) : std::acos(smallest);
}

Vector singular_values(const Matrix& m) {
    if (m.size() == 0) return Vector();
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues();
}

}  // namespace pathcor::linalg
