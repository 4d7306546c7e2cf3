#pragma once

#include "pathcor/linalg.hpp"

#include <functional>
#include <vector>

namespace pathcor {

struct BfgsOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-7;  // on the infinity norm
};

struct BfgsResult {
    Vector x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;  // objective after each accepted step
};

// Quasi-Newton minimization with a backtracking (Armijo) line search. Only
// steps that decrease the objective are accepted, so the trace is
// non-increasing. The objective may return +inf outside its domain.
BfgsResult minimize_bfgs(const std::function<double(const Vector&)>& f,
                         const std::function<Vector(const Vector&)>& grad,
                         const Vector& x0,
                         const BfgsOptions& opts = {});

}  // namespace pathcor
