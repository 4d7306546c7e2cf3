#include "catch_amalgamated.hpp"

#include "pathcor/errors.hpp"
#include "pathcor/sem.hpp"
#include "pathcor/simulation.hpp"
#include "support.hpp"

#include <cmath>

using namespace pathcor;
using Catch::Matchers::WithinAbs;

namespace {

SemFit random_truth(Rng& rng, Eigen::Index p, Eigen::Index r) {
    SemFit f;
    f.lambda_x = Vector(p);
    f.lambda_y = Vector(r);
    for (Eigen::Index i = 0; i < p; ++i) f.lambda_x[i] = 0.5 + 1.5 * rng.uniform();
    for (Eigen::Index i = 0; i < r; ++i) f.lambda_y[i] = (rng.uniform() < 0.3 ? -1.0 : 1.0) * (0.5 + 1.5 * rng.uniform());
    f.lambda_y[0] = std::abs(f.lambda_y[0]);
    f.d_x = Vector(p);
    f.d_y = Vector(r);
    for (Eigen::Index i = 0; i < p; ++i) f.d_x[i] = 0.3 + rng.uniform();
    for (Eigen::Index i = 0; i < r; ++i) f.d_y[i] = 0.3 + rng.uniform();
    f.rho = 1.6 * rng.uniform() - 0.8;
    return f;
}

SampleMoments exact_moments(const SemFit& truth) {
    return moments_from_covariance(sem_structured_cov(truth), truth.lambda_x.size(), 500);
}

double max_param_error(const SemFit& a, const SemFit& b) {
    double e = std::abs(a.rho - b.rho);
    e = std::max(e, (a.lambda_x - b.lambda_x).cwiseAbs().maxCoeff());
    e = std::max(e, (a.lambda_y - b.lambda_y).cwiseAbs().maxCoeff());
    e = std::max(e, (a.d_x - b.d_x).cwiseAbs().maxCoeff());
    e = std::max(e, (a.d_y - b.d_y).cwiseAbs().maxCoeff());
    return e;
}

Vector fd_gradient(const SemObjective& obj, const Vector& theta) {
    Vector g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
        Vector tp = theta;
        Vector tm = theta;
        tp[i] += h;
        tm[i] -= h;
        g[i] = (obj.value(tp) - obj.value(tm)) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("structured covariance matches the population model") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const PathParams params = test::random_marginal_params(rng, 3, 4, true);
        SemFit f;
        f.lambda_x = params.beta_x_xi;
        f.lambda_y = params.beta_y_eta;
        f.d_x = params.sigma_x_given_xi.diagonal();
        f.d_y = params.sigma_y_given_eta.diagonal();
        f.rho = params.cov_xi_eta;
        CHECK((sem_structured_cov(f) - joint_covariance(params).observed()).cwiseAbs().maxCoeff() < 1e-14);
    }
    SemFit zero;
    zero.lambda_x = test::figure1_loading();
    zero.lambda_y = test::figure1_loading();
    zero.d_x = Vector::Ones(3);
    zero.d_y = Vector::Ones(3);
    zero.rho = 0.0;
    CHECK(sem_structured_cov(zero).topRightCorner(3, 3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradient matches finite differences") {
    Rng rng(2);
    for (auto param : {SemParameterization::Marginal, SemParameterization::Regression}) {
        for (int trial = 0; trial < 20; ++trial) {
            const SampleMoments m = test::random_sample_moments(rng, 200, 3, 3);
            const SemObjective obj(m.joint(), 3, param);
            const SemFit truth = random_truth(rng, 3, 3);
            const Vector theta = obj.from_fit(truth);
            REQUIRE(std::isfinite(obj.value(theta)));
            const Vector g = obj.gradient(theta);
            const Vector fd = fd_gradient(obj, theta);
            for (Eigen::Index i = 0; i < g.size(); ++i) {
                CHECK(std::abs(g[i] - fd[i]) <= 1e-4 * std::max(1.0, std::abs(fd[i])));
            }
        }
    }
}

TEST_CASE("gradient vanishes at the generating parameters") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const SemFit truth = random_truth(rng, 3, 3);
        const SemObjective obj(sem_structured_cov(truth), 3, SemParameterization::Marginal);
        const Vector theta = obj.from_fit(truth);
        CHECK(obj.gradient(theta).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(std::abs(obj.value(theta)) < 1e-12);
    }
}

TEST_CASE("exact moments recover the generating parameters") {
    Rng rng(4);
    int recovered = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const SemFit truth = random_truth(rng, 3, 3);
        SemOptions opts;
        opts.seed = static_cast<std::uint64_t>(trial);
        const SemFit fit = fit_sem(exact_moments(truth), opts);
        CHECK(fit.converged);
        if (max_param_error(fit, truth) <= 1e-6) ++recovered;
        CHECK(max_param_error(fit, truth) <= 1e-6);
    }
    CHECK(recovered == 50);
}

TEST_CASE("sign convention flips loadings together with rho") {
    SemFit truth;
    truth.lambda_x = -test::figure1_loading();
    truth.lambda_y = test::figure1_loading();
    truth.d_x = Vector::Ones(3);
    truth.d_y = Vector::Ones(3);
    truth.rho = 0.4;
    const SemFit fit = fit_sem(exact_moments(truth));
    CHECK(fit.lambda_x[0] > 0.0);
    CHECK(fit.lambda_y[0] > 0.0);
    CHECK_THAT(fit.rho, WithinAbs(-0.4, 1e-6));
}

TEST_CASE("objective trace never increases") {
    Rng rng(5);
    const SampleMoments m = test::random_sample_moments(rng, 150, 3, 3);
    const SemFit fit = fit_sem(m);
    REQUIRE(!fit.objective_trace.empty());
    for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
        CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1]);
    CHECK(fit.objective_trace.back() == fit.discrepancy);
    CHECK(fit.d_x.minCoeff() > 0.0);
    CHECK(std::abs(fit.rho) <= 1.0);
}

TEST_CASE("marginal and regression parameterizations agree") {
    const PathParams params = symmetric_params(test::figure1_loading(), Matrix::Identity(3, 3), 0.45);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SampleMoments m = compute_moments(generate_dataset(params, 500, seed));
        SemOptions opts;
        const SemFit marg = fit_sem(m, opts);
        opts.parameterization = SemParameterization::Regression;
        const SemFit reg = fit_sem(m, opts);
        REQUIRE(marg.converged);
        REQUIRE(reg.converged);
        CHECK((sem_structured_cov(marg) - sem_structured_cov(reg)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK_THAT(std::abs(marg.rho), WithinAbs(std::abs(reg.rho), 1e-6));
    }
}

TEST_CASE("scale equivariance") {
    const PathParams params = symmetric_params(test::figure1_loading(), Matrix::Identity(3, 3), 0.3);
    Dataset d = generate_dataset(params, 400, 17);
    const SemFit base = fit_sem(compute_moments(d));
    const double k = -2.5;
    d.rows.leftCols(3) *= k;
    const SemFit scaled = fit_sem(compute_moments(d));
    CHECK((scaled.lambda_x - std::abs(k) * base.lambda_x).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((scaled.d_x.cwiseSqrt() - std::abs(k) * base.d_x.cwiseSqrt()).cwiseAbs().maxCoeff() < 1e-6);
    // A negative k flips the sign of every X-Y covariance.
    CHECK_THAT(scaled.rho, WithinAbs(-base.rho, 1e-6));
}

TEST_CASE("implied regression-scale correlation") {
    SemFit f;
    f.lambda_x = test::figure1_loading();
    f.lambda_y = test::figure1_loading();
    f.d_x = Vector::Ones(3);
    f.d_y = Vector::Ones(3);
    f.rho = 0.5;
    CHECK_THAT(sem_implied_reg_correlation(f), WithinAbs(0.7675 * 0.5, 1e-4));
    f.rho = 0.0;
    CHECK(sem_implied_reg_correlation(f) == 0.0);
    f.lambda_x.setZero();
    CHECK_THROWS_AS(sem_implied_reg_correlation(f), DomainError);

    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const SemFit t = random_truth(rng, 3, 2);
        CHECK(sem_implied_reg_correlation(t) <= std::abs(t.rho));
    }
}

TEST_CASE("sample data from the diagonal-error model") {
    const PathParams params = symmetric_params(test::figure1_loading(), Matrix::Identity(3, 3), 0.5);
    const SemFit fit = fit_sem(compute_moments(generate_dataset(params, 1000, 5)));
    CHECK(fit.converged);
    CHECK_FALSE(fit.heywood);
    CHECK_THAT(fit.rho, WithinAbs(0.5, 0.1));
    CHECK(fit.neg_loglik > 0.0);
}

TEST_CASE("non-PD sample covariance is rejected") {
    SampleMoments m;
    m.n = 10;
    m.mean_x = Vector::Zero(2);
    m.mean_y = Vector::Zero(2);
    m.s_x = Matrix::Identity(2, 2);
    m.s_y = Matrix::Identity(2, 2);
    m.s_yx = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(fit_sem(m), InputError);
}
