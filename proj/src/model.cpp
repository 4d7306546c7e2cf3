#include "pathcor/model.hpp"

#include "pathcor/errors.hpp"

#include <cmath>
#include <string>

namespace pathcor {

namespace {

// v^T m^{-1} v for SPD m; throws NumericalError if m is singular.
double quad_inv(const Matrix& m, const Vector& v, std::string_view what) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success || !linalg::is_spd(m)) {
        throw NumericalError(std::string(what) + " is singular (condition number " +
                                 std::to_string(linalg::condition_number(m)) + ")",
                             linalg::condition_number(m));
    }
    return v.dot(llt.solve(v));
}

Vector read_vector(const nlohmann::json& j, const char* key, Eigen::Index expected) {
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ParseError(std::string("field '") + key + "' must be an array");
    if (static_cast<Eigen::Index>(arr.size()) != expected) {
        throw ParseError(std::string("field '") + key + "' has length " + std::to_string(arr.size()) +
                         ", expected " + std::to_string(expected));
    }
    Vector v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) v[i] = arr.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

Matrix read_matrix(const nlohmann::json& j, const char* key, Eigen::Index n) {
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ParseError(std::string("field '") + key + "' must be an array");
    Matrix m(n, n);
    // Accept either a flat row-major array or an array of rows.
    if (!arr.empty() && arr.front().is_array()) {
        if (static_cast<Eigen::Index>(arr.size()) != n) {
            throw ParseError(std::string("field '") + key + "' must have " + std::to_string(n) + " rows");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = arr.at(static_cast<std::size_t>(i));
            if (static_cast<Eigen::Index>(row.size()) != n) {
                throw ParseError(std::string("field '") + key + "' row " + std::to_string(i + 1) +
                                 " must have " + std::to_string(n) + " entries");
            }
            for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
        }
        return m;
    }
    if (static_cast<Eigen::Index>(arr.size()) != n * n) {
        throw ParseError(std::string("field '") + key + "' has " + std::to_string(arr.size()) +
                         " entries, expected " + std::to_string(n * n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) m(i, k) = arr.at(static_cast<std::size_t>(i * n + k)).get<double>();
    }
    return m;
}

}  // namespace

std::string to_string(ConstraintMode mode) {
    return mode == ConstraintMode::Marginal ? "marginal" : "regression";
}

ConstraintMode constraint_mode_from_string(const std::string& s) {
    if (s == "marginal") return ConstraintMode::Marginal;
    if (s == "regression") return ConstraintMode::Regression;
    throw ParseError("constraint_mode must be \"marginal\" or \"regression\", got \"" + s + "\"");
}

double PathParams::construct_correlation() const {
    return cov_xi_eta / std::sqrt(var_xi * var_eta);
}

void PathParams::validate(bool check_regression_scale) const {
    const Eigen::Index np = p();
    const Eigen::Index nr = r();
    if (np < 1 || nr < 1) throw InputError("p and r must be positive");
    if (mu_x.size() != np || mu_y.size() != nr) throw InputError("mean vectors must have lengths p and r");
    if (sigma_x_given_xi.rows() != np || sigma_x_given_xi.cols() != np) {
        throw InputError("sigma_x_given_xi must be p x p");
    }
    if (sigma_y_given_eta.rows() != nr || sigma_y_given_eta.cols() != nr) {
        throw InputError("sigma_y_given_eta must be r x r");
    }
    if (!beta_x_xi.allFinite() || !beta_y_eta.allFinite() || !mu_x.allFinite() || !mu_y.allFinite()) {
        throw InputError("parameters must be finite");
    }
    linalg::require_spd(sigma_x_given_xi, "sigma_x_given_xi");
    linalg::require_spd(sigma_y_given_eta, "sigma_y_given_eta");
    if (!(var_xi > 0.0) || !(var_eta > 0.0) || !std::isfinite(cov_xi_eta) ||
        cov_xi_eta * cov_xi_eta >= var_xi * var_eta * (1.0 - kEigenFloor)) {
        throw InputError("construct covariance must be positive definite");
    }
    if (constraint_mode == ConstraintMode::Marginal) {
        if (std::abs(var_xi - 1.0) > 1e-12 || std::abs(var_eta - 1.0) > 1e-12) {
            throw InputError("marginal constraints require var_xi = var_eta = 1");
        }
    } else if (check_regression_scale) {
        const auto [vx, vy] = population_reg_variances(*this);
        if (std::abs(vx - 1.0) > 1e-9 || std::abs(vy - 1.0) > 1e-9) {
            throw InputError("regression constraints require var{E(xi|X)} = var{E(eta|Y)} = 1");
        }
    }
}

PathParams symmetric_params(const Vector& loading, const Matrix& error_cov, double rho) {
    PathParams params;
    const Eigen::Index n = loading.size();
    params.mu_x = Vector::Zero(n);
    params.mu_y = Vector::Zero(n);
    params.beta_x_xi = loading;
    params.beta_y_eta = loading;
    params.sigma_x_given_xi = error_cov;
    params.sigma_y_given_eta = error_cov;
    params.var_xi = 1.0;
    params.var_eta = 1.0;
    params.cov_xi_eta = rho;
    params.constraint_mode = ConstraintMode::Marginal;
    return params;
}

Matrix envelope_structured_error(const Vector& loading) {
    if (loading.size() == 0 || loading.squaredNorm() == 0.0) {
        throw InputError("loading vector must be nonzero");
    }
    const Eigen::Index n = loading.size();
    const Matrix q = linalg::orthogonal_completion(loading);
    const Matrix l0 = q.rightCols(n - 1);
    return loading * loading.transpose() / loading.squaredNorm() + 3.0 * l0 * l0.transpose();
}

JointCov joint_covariance(const PathParams& params) {
    params.validate();
    const Eigen::Index p = params.p();
    const Eigen::Index r = params.r();
    const Vector& bx = params.beta_x_xi;
    const Vector& by = params.beta_y_eta;
    const double vxi = params.var_xi;
    const double veta = params.var_eta;
    const double c = params.cov_xi_eta;

    JointCov out;
    out.p = p;
    out.r = r;
    out.full = Matrix::Zero(p + r + 2, p + r + 2);
    auto& s = out.full;
    const Eigen::Index ixi = p + r;
    const Eigen::Index ieta = p + r + 1;

    s.topLeftCorner(p, p) = params.sigma_x_given_xi + bx * bx.transpose() * vxi;
    s.block(p, p, r, r) = params.sigma_y_given_eta + by * by.transpose() * veta;
    s.block(0, p, p, r) = bx * by.transpose() * c;
    s.block(p, 0, r, p) = by * bx.transpose() * c;
    s.block(0, ixi, p, 1) = bx * vxi;
    s.block(0, ieta, p, 1) = bx * c;
    s.block(p, ixi, r, 1) = by * c;
    s.block(p, ieta, r, 1) = by * veta;
    s.block(ixi, 0, 1, p) = (bx * vxi).transpose();
    s.block(ieta, 0, 1, p) = (bx * c).transpose();
    s.block(ixi, p, 1, r) = (by * c).transpose();
    s.block(ieta, p, 1, r) = (by * veta).transpose();
    s(ixi, ixi) = vxi;
    s(ieta, ieta) = veta;
    s(ixi, ieta) = c;
    s(ieta, ixi) = c;
    // Symmetrize away rounding differences between the two triangles.
    s = 0.5 * (s + s.transpose()).eval();
    return out;
}

std::pair<double, double> population_reg_variances(const PathParams& params) {
    const JointCov cov = joint_covariance(params);
    const double vx = quad_inv(cov.sigma_x(), cov.sigma_x_xi(), "Sigma_X");
    const double vy = quad_inv(cov.sigma_y(), cov.sigma_y_eta(), "Sigma_Y");
    return {vx, vy};
}

std::pair<double, double> signal_ratios(const PathParams& params) {
    params.validate();
    const Vector sx = params.beta_x_xi * params.var_xi;
    const Vector sy = params.beta_y_eta * params.var_eta;
    return {quad_inv(params.sigma_x_given_xi, sx, "sigma_x_given_xi"),
            quad_inv(params.sigma_y_given_eta, sy, "sigma_y_given_eta")};
}

double bias_factor(const PathParams& params) {
    if (params.constraint_mode != ConstraintMode::Marginal) {
        throw ModeError("bias_factor requires marginal constraints (var_xi = var_eta = 1)");
    }
    const auto [hx, hy] = signal_ratios(params);
    return std::sqrt(hx / (1.0 + hx) * hy / (1.0 + hy));
}

double sigma2_from_H(double H) {
    if (!(H > 1.0)) {
        throw DomainError("H must exceed 1: regression constraints are unattainable when the "
                          "conditional-mean variance cannot reach 1");
    }
    return H / (H - 1.0);
}

double population_cor_conditional_means(const PathParams& params) {
    const JointCov cov = joint_covariance(params);
    const Matrix sx = cov.sigma_x();
    const Matrix sy = cov.sigma_y();
    const Vector wx = Eigen::LLT<Matrix>(sx).solve(cov.sigma_x_xi());
    const Vector wy = Eigen::LLT<Matrix>(sy).solve(cov.sigma_y_eta());
    const double vx = wx.dot(sx * wx);
    const double vy = wy.dot(sy * wy);
    if (!(vx > 0.0) || !(vy > 0.0)) {
        throw DomainError("conditional means are degenerate (zero loadings)");
    }
    return wx.dot(cov.sigma_xy() * wy) / std::sqrt(vx * vy);
}

PathParams convert_constraints(const PathParams& params, ConstraintMode target) {
    params.validate();
    if (target == params.constraint_mode) return params;

    double scale_xi = 1.0;
    double scale_eta = 1.0;
    if (target == ConstraintMode::Marginal) {
        scale_xi = 1.0 / std::sqrt(params.var_xi);
        scale_eta = 1.0 / std::sqrt(params.var_eta);
    } else {
        if (params.beta_x_xi.cwiseAbs().maxCoeff() == 0.0 || params.beta_y_eta.cwiseAbs().maxCoeff() == 0.0) {
            throw DomainError("regression constraints are undefined when a loading vector is zero");
        }
        const auto [vx, vy] = population_reg_variances(params);
        scale_xi = 1.0 / std::sqrt(vx);
        scale_eta = 1.0 / std::sqrt(vy);
    }

    // xi -> a xi leaves X unchanged when beta_x -> beta_x / a.
    PathParams out = params;
    out.beta_x_xi = params.beta_x_xi / scale_xi;
    out.beta_y_eta = params.beta_y_eta / scale_eta;
    out.var_xi = params.var_xi * scale_xi * scale_xi;
    out.var_eta = params.var_eta * scale_eta * scale_eta;
    out.cov_xi_eta = params.cov_xi_eta * scale_xi * scale_eta;
    out.constraint_mode = target;
    if (target == ConstraintMode::Marginal) {
        out.var_xi = 1.0;
        out.var_eta = 1.0;
    }
    return out;
}

IdentifiabilityReport check_identifiability(const PathParams& params,
                                            const std::vector<KnownZero>& known_zeros) {
    const auto nonzero_pair = [](const Vector& b, Eigen::Index i, Eigen::Index j) {
        const double scale = b.cwiseAbs().maxCoeff();
        const double tol = 1e-12 * scale;
        return scale > 0.0 && std::abs(b[i]) > tol && std::abs(b[j]) > tol;
    };

    IdentifiabilityReport report;
    for (const auto& z : known_zeros) {
        const bool on_x = z.side == IndicatorSide::X;
        const Vector& b = on_x ? params.beta_x_xi : params.beta_y_eta;
        const Eigen::Index n = b.size();
        if (z.i < 0 || z.j < 0 || z.i >= n || z.j >= n || z.i == z.j) {
            throw InputError("known zero (" + std::to_string(z.i) + ", " + std::to_string(z.j) +
                             ") is not an off-diagonal position of the " + (on_x ? "X" : "Y") +
                             " error covariance");
        }
        SideIdentification& side = on_x ? report.x : report.y;
        if (!side.identified && nonzero_pair(b, z.i, z.j)) {
            side.identified = true;
            side.witness = z;
        }
    }
    return report;
}

std::vector<KnownZero> diagonal_error_zeros(Eigen::Index p, Eigen::Index r) {
    std::vector<KnownZero> zeros;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) zeros.push_back({IndicatorSide::X, i, j});
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = i + 1; j < r; ++j) zeros.push_back({IndicatorSide::Y, i, j});
    return zeros;
}

std::vector<KnownZero> structural_zeros(const PathParams& params) {
    std::vector<KnownZero> zeros;
    const auto scan = [&zeros](const Matrix& m, IndicatorSide side) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = i + 1; j < m.cols(); ++j)
                if (m(i, j) == 0.0 && m(j, i) == 0.0) zeros.push_back({side, i, j});
    };
    scan(params.sigma_x_given_xi, IndicatorSide::X);
    scan(params.sigma_y_given_eta, IndicatorSide::Y);
    return zeros;
}

nlohmann::json to_json(const PathParams& params) {
    const auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    const auto mat = [](const Matrix& m) {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(m.size()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
        return out;
    };
    nlohmann::json j;
    j["p"] = params.p();
    j["r"] = params.r();
    j["mu_x"] = vec(params.mu_x);
    j["mu_y"] = vec(params.mu_y);
    j["beta_x_xi"] = vec(params.beta_x_xi);
    j["beta_y_eta"] = vec(params.beta_y_eta);
    j["sigma_x_given_xi"] = mat(params.sigma_x_given_xi);
    j["sigma_y_given_eta"] = mat(params.sigma_y_given_eta);
    j["var_xi"] = params.var_xi;
    j["var_eta"] = params.var_eta;
    j["cov_xi_eta"] = params.cov_xi_eta;
    j["constraint_mode"] = to_string(params.constraint_mode);
    return j;
}

PathParams params_from_json(const nlohmann::json& j) {
    static const char* const kFields[] = {"p",          "r",          "mu_x",   "mu_y",
                                          "beta_x_xi",  "beta_y_eta", "sigma_x_given_xi",
                                          "sigma_y_given_eta", "var_xi", "var_eta",
                                          "cov_xi_eta", "constraint_mode"};
    if (!j.is_object()) throw ParseError("path parameters must be a JSON object");
    std::string missing;
    for (const char* f : kFields) {
        if (!j.contains(f)) missing += (missing.empty() ? "" : ", ") + std::string(f);
    }
    if (!missing.empty()) throw ParseError("path parameters are missing fields: " + missing);

    try {
        const auto p = j.at("p").get<Eigen::Index>();
        const auto r = j.at("r").get<Eigen::Index>();
        if (p < 1 || r < 1) throw ParseError("p and r must be positive integers");
        PathParams out;
        out.mu_x = read_vector(j, "mu_x", p);
        out.mu_y = read_vector(j, "mu_y", r);
        out.beta_x_xi = read_vector(j, "beta_x_xi", p);
        out.beta_y_eta = read_vector(j, "beta_y_eta", r);
        out.sigma_x_given_xi = read_matrix(j, "sigma_x_given_xi", p);
        out.sigma_y_given_eta = read_matrix(j, "sigma_y_given_eta", r);
        out.var_xi = j.at("var_xi").get<double>();
        out.var_eta = j.at("var_eta").get<double>();
        out.cov_xi_eta = j.at("cov_xi_eta").get<double>();
        out.constraint_mode = constraint_mode_from_string(j.at("constraint_mode").get<std::string>());
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("path parameters: ") + e.what());
    }
}

}  // namespace pathcor
