#include "pathcor/sem.hpp"

#include "pathcor/errors.hpp"
#include "pathcor/optimize.hpp"
#include "pathcor/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pathcor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHeywoodFloor = 1e-6;

}  // namespace

struct SemObjective::Pieces {
    Vector u_x;  // effective loadings
    Vector u_y;
    Vector d_x;
    Vector d_y;
    double rho = 0.0;
    // Regression layout only.
    Vector b;
    Vector a;
    double s_x = 0.0;
    double s_y = 0.0;
    double q_x = 0.0;
    double q_y = 0.0;
    Matrix sigma;
};

SemObjective::SemObjective(const Matrix& sample_cov, Eigen::Index p, SemParameterization param)
    : s_(sample_cov), p_(p), r_(sample_cov.rows() - p), param_(param) {
    if (p_ < 1 || r_ < 1) throw InputError("SEM needs at least one indicator per construct");
    linalg::require_spd(s_, "sample covariance of (X, Y)");
    logdet_s_ = linalg::logdet_spd(s_);
}

Eigen::Index SemObjective::dimension() const {
    const Eigen::Index base = 2 * (p_ + r_);
    return param_ == SemParameterization::Marginal ? base + 1 : base + 2;
}

bool SemObjective::build(const Vector& theta, Pieces& out) const {
    if (theta.size() != dimension() || !theta.allFinite()) return false;
    const Eigen::Index p = p_;
    const Eigen::Index r = r_;
    out.d_x = theta.segment(p + r, p).array().exp();
    out.d_y = theta.segment(2 * p + r, r).array().exp();
    if (param_ == SemParameterization::Marginal) {
        out.u_x = theta.head(p);
        out.u_y = theta.segment(p, r);
        out.rho = std::tanh(theta[2 * (p + r)]);
        if (std::abs(out.rho) >= 1.0) return false;
    } else {
        out.b = theta.head(p);
        out.a = theta.segment(p, r);
        const double var_a = std::exp(theta[2 * (p + r)]);
        const double var_b = std::exp(theta[2 * (p + r) + 1]);
        out.q_x = (out.b.array().square() / out.d_x.array()).sum();
        out.q_y = (out.a.array().square() / out.d_y.array()).sum();
        if (!(out.q_x > 0.0) || !(out.q_y > 0.0)) return false;
        out.s_x = 1.0 / std::sqrt(var_a * out.q_x);
        out.s_y = 1.0 / std::sqrt(var_b * out.q_y);
        out.u_x = out.s_x * out.b;
        out.u_y = out.s_y * out.a;
        out.rho = 1.0 / (out.s_x * out.s_y);
        if (!(out.rho < 1.0)) return false;
    }
    Matrix& sig = out.sigma;
    sig.resize(p + r, p + r);
    sig.topLeftCorner(p, p) = out.u_x * out.u_x.transpose();
    sig.topLeftCorner(p, p).diagonal() += out.d_x;
    sig.bottomRightCorner(r, r) = out.u_y * out.u_y.transpose();
    sig.bottomRightCorner(r, r).diagonal() += out.d_y;
    const Matrix cross = out.rho * out.u_y * out.u_x.transpose();
    sig.bottomLeftCorner(r, p) = cross;
    sig.topRightCorner(p, r) = cross.transpose();
    return sig.allFinite();
}

double SemObjective::value(const Vector& theta) const {
    Pieces pc;
    if (!build(theta, pc)) return kInf;
    Eigen::LLT<Matrix> llt(pc.sigma);
    if (llt.info() != Eigen::Success) return kInf;
    const double logdet = linalg::logdet_spd(pc.sigma);
    if (!std::isfinite(logdet)) return kInf;
    const double tr = llt.solve(s_).trace();
    return logdet + tr - logdet_s_ - static_cast<double>(p_ + r_);
}

Vector SemObjective::gradient(const Vector& theta) const {
    Pieces pc;
    Vector g = Vector::Zero(dimension());
    if (!build(theta, pc)) {
        g.setConstant(std::numeric_limits<double>::quiet_NaN());
        return g;
    }
    const Eigen::Index p = p_;
    const Eigen::Index r = r_;
    Eigen::LLT<Matrix> llt(pc.sigma);
    const Matrix inv = llt.solve(Matrix::Identity(p + r, p + r));
    const Matrix w = inv - inv * s_ * inv;  // dF/dSigma
    const Matrix w_xx = w.topLeftCorner(p, p);
    const Matrix w_yy = w.bottomRightCorner(r, r);
    const Matrix w_xy = w.topRightCorner(p, r);

    Vector g_ldx = w_xx.diagonal().cwiseProduct(pc.d_x);
    Vector g_ldy = w_yy.diagonal().cwiseProduct(pc.d_y);

    if (param_ == SemParameterization::Marginal) {
        g.head(p) = 2.0 * (w_xx * pc.u_x + pc.rho * w_xy * pc.u_y);
        g.segment(p, r) = 2.0 * (w_yy * pc.u_y + pc.rho * w_xy.transpose() * pc.u_x);
        g.segment(p + r, p) = g_ldx;
        g.segment(2 * p + r, r) = g_ldy;
        g[2 * (p + r)] = 2.0 * pc.u_x.dot(w_xy * pc.u_y) * (1.0 - pc.rho * pc.rho);
        return g;
    }

    // Regression layout: u_x = s_x B with s_x = (var_a q_x)^{-1/2}, cross = B A^T.
    const Vector gu_x = 2.0 * w_xx * pc.u_x;
    const Vector gu_y = 2.0 * w_yy * pc.u_y;
    const double gb = gu_x.dot(pc.b);
    const double ga = gu_y.dot(pc.a);
    const Vector ratio_x = pc.b.cwiseQuotient(pc.d_x) / pc.q_x;
    const Vector ratio_y = pc.a.cwiseQuotient(pc.d_y) / pc.q_y;
    g.head(p) = pc.s_x * gu_x - gb * pc.s_x * ratio_x + 2.0 * w_xy * pc.a;
    g.segment(p, r) = pc.s_y * gu_y - ga * pc.s_y * ratio_y + 2.0 * w_xy.transpose() * pc.b;
    g.segment(p + r, p) = g_ldx + 0.5 * gb * pc.s_x * ratio_x.cwiseProduct(pc.b);
    g.segment(2 * p + r, r) = g_ldy + 0.5 * ga * pc.s_y * ratio_y.cwiseProduct(pc.a);
    g[2 * (p + r)] = -0.5 * gb * pc.s_x;
    g[2 * (p + r) + 1] = -0.5 * ga * pc.s_y;
    return g;
}

Matrix SemObjective::implied_cov(const Vector& theta) const {
    Pieces pc;
    if (!build(theta, pc)) throw DomainError("SEM parameters lie outside the model");
    return pc.sigma;
}

SemFit SemObjective::to_fit(const Vector& theta) const {
    Pieces pc;
    if (!build(theta, pc)) throw DomainError("SEM parameters lie outside the model");
    SemFit fit;
    fit.lambda_x = pc.u_x;
    fit.lambda_y = pc.u_y;
    fit.d_x = pc.d_x;
    fit.d_y = pc.d_y;
    fit.rho = pc.rho;
    // Flipping a loading vector together with rho leaves Sigma unchanged.
    if (linalg::normalize_sign(fit.lambda_x)) fit.rho = -fit.rho;
    if (linalg::normalize_sign(fit.lambda_y)) fit.rho = -fit.rho;
    return fit;
}

Vector SemObjective::from_fit(const SemFit& fit) const {
    const Eigen::Index p = p_;
    const Eigen::Index r = r_;
    Vector theta(dimension());
    theta.segment(p + r, p) = fit.d_x.array().log();
    theta.segment(2 * p + r, r) = fit.d_y.array().log();
    if (param_ == SemParameterization::Marginal) {
        theta.head(p) = fit.lambda_x;
        theta.segment(p, r) = fit.lambda_y;
        theta[2 * (p + r)] = std::atanh(fit.rho);
        return theta;
    }
    if (fit.rho == 0.0) throw DomainError("the regression layout cannot represent rho = 0");
    const double q_x = (fit.lambda_x.array().square() / fit.d_x.array()).sum();
    const double q_y = (fit.lambda_y.array().square() / fit.d_y.array()).sum();
    theta.head(p) = fit.lambda_x;
    theta.segment(p, r) = fit.rho * fit.lambda_y;
    theta[2 * (p + r)] = -std::log(q_x);
    theta[2 * (p + r) + 1] = -std::log(q_y);
    return theta;
}

Matrix sem_structured_cov(const SemFit& fit) {
    const Eigen::Index p = fit.lambda_x.size();
    const Eigen::Index r = fit.lambda_y.size();
    Matrix sig(p + r, p + r);
    sig.topLeftCorner(p, p) = fit.lambda_x * fit.lambda_x.transpose();
    sig.topLeftCorner(p, p).diagonal() += fit.d_x;
    sig.bottomRightCorner(r, r) = fit.lambda_y * fit.lambda_y.transpose();
    sig.bottomRightCorner(r, r).diagonal() += fit.d_y;
    const Matrix cross = fit.rho * fit.lambda_y * fit.lambda_x.transpose();
    sig.bottomLeftCorner(r, p) = cross;
    sig.topRightCorner(p, r) = cross.transpose();
    return sig;
}

namespace {

// One-factor start for a block: leading principal component scaled to the
// variance it explains beyond the average of the remaining eigenvalues.
void principal_start(const Matrix& s, Vector& loading, Vector& uniq) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Eigen::Index n = s.rows();
    const double top = es.eigenvalues()[n - 1];
    const double rest = n > 1 ? es.eigenvalues().head(n - 1).mean() : 0.5 * top;
    Vector v = es.eigenvectors().col(n - 1);
    linalg::normalize_sign(v);
    loading = v * std::sqrt(std::max(top - rest, 0.1 * top));
    uniq = (s.diagonal() - loading.cwiseAbs2()).cwiseMax(0.1 * s.diagonal());
}

}  // namespace

SemFit fit_sem(const SampleMoments& m, const SemOptions& opts) {
    const Eigen::Index p = m.p();
    const Eigen::Index r = m.r();
    const Matrix s = m.joint();
    const SemObjective objective(s, p, opts.parameterization);

    SemFit start;
    principal_start(m.s_x, start.lambda_x, start.d_x);
    principal_start(m.s_y, start.lambda_y, start.d_y);
    {
        const double denom = std::sqrt(start.lambda_x.squaredNorm() * start.lambda_y.squaredNorm());
        double rho0 = denom > 0.0 ? start.lambda_y.dot(m.s_yx * start.lambda_x) / (denom * denom) : 0.0;
        rho0 = std::clamp(rho0, -0.9, 0.9);
        if (std::abs(rho0) < 0.05) rho0 = rho0 < 0.0 ? -0.05 : 0.05;
        start.rho = rho0;
    }
    const Vector theta0 = objective.from_fit(start);

    BfgsOptions bfgs;
    bfgs.max_iterations = opts.max_iterations;
    bfgs.gradient_tolerance = opts.gradient_tolerance;
    const auto f = [&objective](const Vector& t) { return objective.value(t); };
    const auto g = [&objective](const Vector& t) { return objective.gradient(t); };

    BfgsResult best;
    best.value = kInf;
    int n_converged = 0;
    const int n_starts = std::max(1, opts.starts);
    for (int k = 0; k < n_starts; ++k) {
        Vector theta = theta0;
        if (k > 0) {
            Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
            for (Eigen::Index i = 0; i < p + r; ++i) theta[i] *= std::exp(0.3 * rng.normal());
            for (Eigen::Index i = p + r; i < 2 * (p + r); ++i) theta[i] += 0.3 * rng.normal();
            for (Eigen::Index i = 2 * (p + r); i < theta.size(); ++i) theta[i] += 0.3 * rng.normal();
            if (!std::isfinite(objective.value(theta))) theta = theta0;
        }
        BfgsResult run = minimize_bfgs(f, g, theta, bfgs);
        if (run.converged) ++n_converged;
        if (run.value < best.value) best = std::move(run);
    }
    if (!std::isfinite(best.value)) {
        SemFit failed = start;
        failed.converged = false;
        failed.discrepancy = kInf;
        failed.neg_loglik = kInf;
        return failed;
    }

    SemFit fit = objective.to_fit(best.x);
    fit.converged = best.converged;
    fit.iterations = best.iterations;
    fit.gradient_norm = best.gradient_norm;
    fit.discrepancy = best.value;
    fit.objective_trace = std::move(best.trace);
    fit.starts_converged = n_converged;
    fit.heywood = fit.d_x.minCoeff() < kHeywoodFloor || fit.d_y.minCoeff() < kHeywoodFloor;
    const auto k = static_cast<double>(p + r);
    // log det Sigma + tr(S Sigma^{-1}) = F + log det S + k
    const double fit_term = best.value + linalg::logdet_spd(s) + k;
    fit.neg_loglik = 0.5 * static_cast<double>(m.n) * (k * std::log(2.0 * std::numbers::pi) + fit_term);
    return fit;
}

double sem_implied_reg_correlation(const SemFit& fit) {
    const double h_x = (fit.lambda_x.array().square() / fit.d_x.array()).sum();
    const double h_y = (fit.lambda_y.array().square() / fit.d_y.array()).sum();
    if (!(h_x > 0.0) || !(h_y > 0.0) || !std::isfinite(h_x) || !std::isfinite(h_y)) {
        throw DomainError("SEM fit has degenerate loadings");
    }
    return std::sqrt(h_x / (1.0 + h_x) * h_y / (1.0 + h_y)) * std::abs(fit.rho);
}

}  // namespace pathcor
