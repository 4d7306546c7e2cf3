#include "pathcor/envelope.hpp"

#include "pathcor/errors.hpp"
#include "pathcor/rrr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pathcor {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kStalledGradient = 1e-6;

void check_dims(Eigen::Index u_x, Eigen::Index u_y, Eigen::Index p, Eigen::Index r) {
    if (u_x < 0 || u_x > p)
        throw InputError("u_x must lie in [0, " + std::to_string(p) + "], got " + std::to_string(u_x));
    if (u_y < 0 || u_y > r)
        throw InputError("u_y must lie in [0, " + std::to_string(r) + "], got " + std::to_string(u_y));
}

void normalize_columns(Matrix& g) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
        Vector c = g.col(j);
        linalg::normalize_sign(c);
        g.col(j) = c;
    }
}

// Leading u eigenvectors of a symmetric matrix, largest first.
Matrix leading_eigenvectors(const Matrix& s, Eigen::Index u) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    Matrix out(s.rows(), u);
    for (Eigen::Index j = 0; j < u; ++j) out.col(j) = es.eigenvectors().col(s.rows() - 1 - j);
    normalize_columns(out);
    return out;
}

// SIMPLS directions for the side whose covariance is `s`; `cross` is the
// cross-covariance with that side in the columns (q x d).
Matrix simpls_basis(const Matrix& cross, const Matrix& s, Eigen::Index u) {
    const Eigen::Index d = s.rows();
    if (u == 0) return Matrix(d, 0);

    Matrix w(d, u);
    Matrix v(d, u);
    Matrix c = cross;
    const double scale = std::max(cross.norm(), std::numeric_limits<double>::min());
    Eigen::Index found = 0;
    for (; found < u; ++found) {
        Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeFullV);
        if (svd.singularValues().size() == 0 || svd.singularValues()[0] <= 1e-12 * scale) break;
        Vector dir = svd.matrixV().col(0);
        linalg::normalize_sign(dir);
        Vector img = s * dir;
        if (found > 0) img -= v.leftCols(found) * (v.leftCols(found).transpose() * img);
        const double norm = img.norm();
        if (norm <= 1e-12 * s.norm()) break;
        img /= norm;
        w.col(found) = dir;
        v.col(found) = img;
        c -= (c * img) * img.transpose();
    }
    if (found < u) {
        // Cross-covariance exhausted: fill with the leading variance directions
        // of s within the complement of what was found.
        const Matrix comp = found == 0 ? Matrix(Matrix::Identity(d, d))
                                       : Matrix(linalg::orthogonal_completion(w.leftCols(found)).rightCols(d - found));
        const Matrix e = leading_eigenvectors(comp.transpose() * s * comp, u - found);
        w.rightCols(u - found) = comp * e;
    }
    Matrix out = linalg::orthonormalize(w);
    normalize_columns(out);
    return out;
}

Matrix residual_cov(const Matrix& s_self, const Matrix& cross_other_self, const Matrix& s_other,
                    std::string_view what) {
    const Matrix other_inv = linalg::inv_spd(s_other, what);
    Matrix res = s_self - cross_other_self.transpose() * other_inv * cross_other_self;
    return 0.5 * (res + res.transpose());
}

Matrix riemannian_gradient(const Matrix& g, const Matrix& a, const Matrix& b) {
    const Matrix ag = a * g;
    const Matrix bg = b * g;
    const Matrix egrad = 2.0 * ag * (g.transpose() * ag).inverse() +
                         2.0 * bg * (g.transpose() * bg).inverse();
    return egrad - g * (g.transpose() * egrad);
}

struct SideFit {
    Matrix basis;
    bool converged = true;
    int iterations = 0;
    std::vector<double> trace;
};

SideFit envelope_side(const Matrix& s, const Matrix& s_res, const Matrix& simpls_start,
                      Eigen::Index u, const EnvelopeOptions& opts) {
    const Eigen::Index d = s.rows();
    SideFit out;
    if (u == 0) {
        out.basis = Matrix(d, 0);
        return out;
    }
    if (u == d) {
        out.basis = Matrix::Identity(d, d);
        return out;
    }
    const Matrix s_inv = linalg::inv_spd(s, "marginal covariance");
    const Matrix starts[] = {simpls_start, leading_eigenvectors(s, u), leading_eigenvectors(s_res, u)};

    bool have = false;
    EnvelopeBasisFit best;
    for (const Matrix& start : starts) {
        EnvelopeBasisFit fit = minimize_envelope_objective(s_res, s_inv, start, opts);
        if (!have || fit.objective < best.objective) {
            best = std::move(fit);
            have = true;
        }
    }
    out.basis = best.basis;
    normalize_columns(out.basis);
    out.converged = best.converged;
    out.iterations = best.iterations;
    out.trace = std::move(best.trace);
    return out;
}

}  // namespace

std::string to_string(CompositeMethod method) {
    switch (method) {
        case CompositeMethod::Simpls: return "simpls";
        case CompositeMethod::EnvelopeMle: return "envelope_mle";
        case CompositeMethod::Pca: return "pca";
        case CompositeMethod::Unit: return "unit";
    }
    return "unknown";
}

double envelope_objective(const Matrix& g, const Matrix& s_res, const Matrix& s_inv) {
    if (g.cols() == 0) return 0.0;
    return linalg::logdet_spd(g.transpose() * s_res * g) + linalg::logdet_spd(g.transpose() * s_inv * g);
}

EnvelopeBasisFit minimize_envelope_objective(const Matrix& s_res, const Matrix& s_inv,
                                             const Matrix& start, const EnvelopeOptions& opts) {
    EnvelopeBasisFit fit;
    fit.basis = linalg::orthonormalize(start);
    fit.objective = envelope_objective(fit.basis, s_res, s_inv);
    fit.trace.push_back(fit.objective);
    if (fit.basis.cols() == 0 || fit.basis.cols() == fit.basis.rows()) {
        fit.converged = true;
        return fit;
    }

    Matrix grad = riemannian_gradient(fit.basis, s_res, s_inv);
    double gnorm = grad.norm();
    double step = 1.0 / std::max(gnorm, 1.0);
    while (fit.iterations < opts.max_iterations) {
        if (gnorm < opts.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        Matrix candidate;
        double f_new = 0.0;
        double t = step;
        bool accepted = false;
        for (int k = 0; k < 60; ++k) {
            candidate = linalg::orthonormalize(fit.basis - t * grad);
            f_new = envelope_objective(candidate, s_res, s_inv);
            if (std::isfinite(f_new) && f_new <= fit.objective - kArmijo * t * gnorm * gnorm) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted || !(f_new < fit.objective)) {
            fit.converged = gnorm < kStalledGradient;
            break;
        }
        const Matrix grad_new = riemannian_gradient(candidate, s_res, s_inv);
        // Barzilai-Borwein length for the next trial step.
        const Matrix sdiff = -t * grad;
        const double sy = std::abs((sdiff.array() * (grad_new - grad).array()).sum());
        step = sy > 0.0 ? std::clamp(sdiff.squaredNorm() / sy, 1e-8, 1e8) : 2.0 * t;

        fit.basis = candidate;
        fit.objective = f_new;
        fit.trace.push_back(f_new);
        grad = grad_new;
        gnorm = grad.norm();
        ++fit.iterations;
    }
    if (gnorm < opts.gradient_tolerance) fit.converged = true;
    return fit;
}

CompositeWeights simpls_weights(const SampleMoments& m, Eigen::Index u_x, Eigen::Index u_y) {
    check_dims(u_x, u_y, m.p(), m.r());
    if (!m.s_x.allFinite() || !m.s_y.allFinite() || !m.s_yx.allFinite())
        throw InputError("sample moments contain non-finite entries");
    CompositeWeights w;
    w.method = CompositeMethod::Simpls;
    w.u_x = u_x;
    w.u_y = u_y;
    w.phi = simpls_basis(m.s_yx, m.s_x, u_x);
    w.gamma = simpls_basis(m.s_xy(), m.s_y, u_y);
    return w;
}

CompositeWeights envelope_weights_mle(const SampleMoments& m, Eigen::Index u_x, Eigen::Index u_y,
                                      const EnvelopeOptions& opts) {
    check_dims(u_x, u_y, m.p(), m.r());
    linalg::require_spd(m.s_x, "sample covariance of X (s_x)");
    linalg::require_spd(m.s_y, "sample covariance of Y (s_y)");
    const CompositeWeights start = simpls_weights(m, u_x, u_y);

    const Matrix res_x = residual_cov(m.s_x, m.s_yx, m.s_y, "sample covariance of Y (s_y)");
    const Matrix res_y = residual_cov(m.s_y, m.s_xy(), m.s_x, "sample covariance of X (s_x)");
    SideFit fx = envelope_side(m.s_x, res_x, start.phi, u_x, opts);
    SideFit fy = envelope_side(m.s_y, res_y, start.gamma, u_y, opts);

    CompositeWeights w;
    w.method = CompositeMethod::EnvelopeMle;
    w.u_x = u_x;
    w.u_y = u_y;
    w.phi = std::move(fx.basis);
    w.gamma = std::move(fy.basis);
    w.converged = fx.converged && fy.converged;
    w.iterations = fx.iterations + fy.iterations;
    w.trace_x = std::move(fx.trace);
    w.trace_y = std::move(fy.trace);
    return w;
}

CompositeWeights pca_weights(const SampleMoments& m) {
    CompositeWeights w;
    w.method = CompositeMethod::Pca;
    w.u_x = 1;
    w.u_y = 1;
    w.phi = leading_eigenvectors(m.s_x, 1);
    w.gamma = leading_eigenvectors(m.s_y, 1);
    return w;
}

CompositeWeights unit_weights(Eigen::Index p, Eigen::Index r) {
    if (p < 1 || r < 1) throw InputError("unit weights need p >= 1 and r >= 1");
    CompositeWeights w;
    w.method = CompositeMethod::Unit;
    w.u_x = 1;
    w.u_y = 1;
    w.phi = Matrix::Constant(p, 1, 1.0 / std::sqrt(static_cast<double>(p)));
    w.gamma = Matrix::Constant(r, 1, 1.0 / std::sqrt(static_cast<double>(r)));
    return w;
}

FitResult composite_estimate(const SampleMoments& m, const CompositeWeights& w) {
    FitResult res;
    res.estimator = to_string(w.method);
    res.weights = w;
    res.converged = w.converged;
    res.diagnostics["u_x"] = w.u_x;
    res.diagnostics["u_y"] = w.u_y;
    if (w.u_x == 0 || w.u_y == 0) {
        res.estimate = 0.0;
        res.degenerate = true;
        return res;
    }
    const Rank1Fit fit = fit_rank1(project_moments(m, w.phi, w.gamma));
    res.estimate = fit.d1;
    res.diagnostics["tied"] = fit.tied;
    res.diagnostics["clamped"] = fit.clamped;
    return res;
}

FitResult serr_estimate(const SampleMoments& m, Eigen::Index u_x, Eigen::Index u_y,
                        CompositeMethod method) {
    check_dims(u_x, u_y, m.p(), m.r());
    CompositeWeights w;
    if (method == CompositeMethod::Simpls)
        w = simpls_weights(m, u_x, u_y);
    else if (method == CompositeMethod::EnvelopeMle)
        w = envelope_weights_mle(m, u_x, u_y);
    else
        throw InputError("serr_estimate needs the simpls or envelope_mle basis method");

    FitResult res;
    if (u_x == m.p() && u_y == m.r()) {
        // The composites are invertible transforms of X and Y.
        res.estimator = to_string(method);
        res.weights = w;
        const Rank1Fit fit = fit_rank1(m);
        res.estimate = fit.d1;
        res.diagnostics["u_x"] = u_x;
        res.diagnostics["u_y"] = u_y;
        res.diagnostics["tied"] = fit.tied;
        res.diagnostics["clamped"] = fit.clamped;
    } else {
        res = composite_estimate(m, w);
    }
    res.estimator = "serr";
    res.diagnostics["basis_method"] = to_string(method);
    res.diagnostics["basis_iterations"] = w.iterations;
    return res;
}

FitResult serr_estimate(const Dataset& data, Eigen::Index u_x, Eigen::Index u_y,
                        CompositeMethod method) {
    return serr_estimate(compute_moments(data), u_x, u_y, method);
}

std::vector<DimensionScore> dimension_scores(const SampleMoments& m, CompositeMethod method) {
    const Eigen::Index p = m.p();
    const Eigen::Index r = m.r();
    if (m.n <= p + r)
        throw InputError("dimension selection needs n > p + r (n = " + std::to_string(m.n) +
                         ", p + r = " + std::to_string(p + r) + ")");
    if (method != CompositeMethod::Simpls && method != CompositeMethod::EnvelopeMle)
        throw InputError("dimension selection needs the simpls or envelope_mle basis method");
    linalg::require_spd(m.s_x, "sample covariance of X (s_x)");
    linalg::require_spd(m.s_y, "sample covariance of Y (s_y)");

    // Bases for each dimension, one side at a time.
    std::vector<Matrix> phis(p + 1);
    std::vector<Matrix> gammas(r + 1);
    for (Eigen::Index u = 0; u <= std::max(p, r); ++u) {
        const CompositeWeights w = method == CompositeMethod::Simpls
                                       ? simpls_weights(m, std::min(u, p), std::min(u, r))
                                       : envelope_weights_mle(m, std::min(u, p), std::min(u, r));
        if (u <= p) phis[u] = w.phi;
        if (u <= r) gammas[u] = w.gamma;
    }
    const Matrix sx_inv = linalg::inv_spd(m.s_x, "sample covariance of X (s_x)");
    const Matrix sy_inv = linalg::inv_spd(m.s_y, "sample covariance of Y (s_y)");
    const double base = linalg::logdet_spd(m.s_x) + linalg::logdet_spd(m.s_y);
    const double n = static_cast<double>(m.n);
    const double fixed = 0.5 * static_cast<double>(p * (p + 1) + r * (r + 1)) + static_cast<double>(p + r);

    std::vector<DimensionScore> scores;
    for (Eigen::Index ux = 0; ux <= p; ++ux) {
        for (Eigen::Index uy = 0; uy <= r; ++uy) {
            DimensionScore sc;
            sc.u_x = ux;
            sc.u_y = uy;
            double j = base + envelope_objective(phis[ux], m.s_x, sx_inv) +
                       envelope_objective(gammas[uy], m.s_y, sy_inv);
            sc.parameters = fixed;
            if (ux > 0 && uy > 0) {
                const double d1 = fit_rank1(project_moments(m, phis[ux], gammas[uy])).d1;
                j += std::log(std::max(1.0 - d1 * d1, std::numeric_limits<double>::min()));
                sc.parameters += static_cast<double>(ux + uy - 1);
            }
            sc.neg2_loglik = j;
            sc.bic = n * j + sc.parameters * std::log(n);
            scores.push_back(sc);
        }
    }
    return scores;
}

std::pair<Eigen::Index, Eigen::Index> select_dimensions(const Dataset& data, CompositeMethod method) {
    data.validate();
    const std::vector<DimensionScore> scores = dimension_scores(compute_moments(data), method);
    const DimensionScore* best = &scores.front();
    for (const DimensionScore& sc : scores) {
        const double tol = 1e-12 * std::max(1.0, std::abs(best->bic));
        const bool smaller = sc.u_x + sc.u_y < best->u_x + best->u_y;
        if (sc.bic < best->bic - tol || (std::abs(sc.bic - best->bic) <= tol && smaller)) best = &sc;
    }
    return {best->u_x, best->u_y};
}

}  // namespace pathcor
