#include "pathcor/optimize.hpp"

#include <cmath>

namespace pathcor {

BfgsResult minimize_bfgs(const std::function<double(const Vector&)>& f,
                         const std::function<Vector(const Vector&)>& grad,
                         const Vector& x0,
                         const BfgsOptions& opts) {
    constexpr double kArmijo = 1e-4;
    constexpr int kMaxBacktracks = 60;

    const Eigen::Index n = x0.size();
    BfgsResult res;
    res.x = x0;
    res.value = f(x0);
    if (!std::isfinite(res.value)) return res;
    Vector g = grad(res.x);
    Matrix h_inv = Matrix::Identity(n, n);
    res.gradient_norm = g.cwiseAbs().maxCoeff();
    bool reset_once = false;

    while (res.iterations < opts.max_iterations) {
        if (res.gradient_norm < opts.gradient_tolerance) {
            res.converged = true;
            break;
        }
        Vector dir = -h_inv * g;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            h_inv.setIdentity();
            dir = -g;
            slope = -g.squaredNorm();
        }
        // Keep the first trial step from leaving the domain wildly.
        double step = 1.0;
        const double dir_norm = dir.cwiseAbs().maxCoeff();
        if (dir_norm * step > 10.0) step = 10.0 / dir_norm;

        Vector x_new;
        double f_new = 0.0;
        bool accepted = false;
        for (int k = 0; k < kMaxBacktracks; ++k) {
            x_new = res.x + step * dir;
            f_new = f(x_new);
            if (std::isfinite(f_new) && f_new <= res.value + kArmijo * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted || !(f_new < res.value)) {
            // Line search stalled: retry once along steepest descent.
            if (!reset_once && !h_inv.isIdentity()) {
                h_inv.setIdentity();
                reset_once = true;
                continue;
            }
            break;
        }
        reset_once = false;

        const Vector g_new = grad(x_new);
        const Vector s = x_new - res.x;
        const Vector y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (res.iterations == 0) h_inv *= sy / y.squaredNorm();
            const double rho = 1.0 / sy;
            const Matrix eye = Matrix::Identity(n, n);
            h_inv = (eye - rho * s * y.transpose()) * h_inv * (eye - rho * y * s.transpose()) +
                    rho * s * s.transpose();
        }
        res.x = x_new;
        res.value = f_new;
        g = g_new;
        res.gradient_norm = g.cwiseAbs().maxCoeff();
        res.trace.push_back(res.value);
        ++res.iterations;
    }
    if (res.gradient_norm < opts.gradient_tolerance) res.converged = true;
    return res;
}

}  // namespace pathcor
