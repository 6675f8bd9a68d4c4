#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "moecov/gp.hpp"
#include "support/oracles.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using moecov::AnyKernel;
using moecov::BaselineKind;
using moecov::GPModel;
using moecov::Matrix;
using moecov::Vector;

namespace {

Matrix random_points(int n, int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Matrix X(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = u(rng);
    return X;
}

oracle::Mat to_oracle(const Matrix& K) {
    oracle::Mat out(static_cast<std::size_t>(K.rows()),
                    std::vector<double>(static_cast<std::size_t>(K.cols())));
    for (Eigen::Index i = 0; i < K.rows(); ++i)
        for (Eigen::Index j = 0; j < K.cols(); ++j)
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = K(i, j);
    return out;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("cholesky factorization with jitter ladder") {
    Matrix K(2, 2);
    K << 4, 2, 2, 5;
    auto c = moecov::cholesky_with_jitter(K);
    REQUIRE(c.has_value());
    CHECK(c->used_jitter == 0.0);
    CHECK_THAT(c->L(0, 0), WithinAbs(2.0, 1e-14));
    CHECK_THAT(c->L(1, 0), WithinAbs(1.0, 1e-14));
    CHECK_THAT(c->L(1, 1), WithinAbs(2.0, 1e-14));
    CHECK(c->L(0, 1) == 0.0);

    SECTION("an indefinite matrix fails the whole ladder") {
        Matrix B(2, 2);
        B << 1, 2, 2, 1;  // eigenvalues 3 and -1
        CHECK_FALSE(moecov::cholesky_with_jitter(B).has_value());
    }

    SECTION("a singular PSD matrix succeeds on a later rung") {
        Matrix S = Matrix::Ones(3, 3);
        auto cs = moecov::cholesky_with_jitter(S);
        REQUIRE(cs.has_value());
        CHECK(cs->used_jitter > 0.0);
        Matrix R = cs->L * cs->L.transpose();
        CHECK(((R - S).cwiseAbs().maxCoeff()) < 1e-3);
    }

    SECTION("non-square input is rejected") {
        CHECK_THROWS_AS(moecov::cholesky_with_jitter(Matrix::Zero(2, 3)), std::invalid_argument);
    }
}

TEST_CASE("log marginal likelihood on identity covariance is closed-form") {
    // white noise with unit amplitude makes K the identity
    Matrix X(2, 1);
    X << 0.0, 1.0;
    Vector f(2);
    f << 1.0, 2.0;
    GPModel m{AnyKernel{BaselineKind::WN}, {1.0}, X, f};
    auto lml = moecov::log_marginal_likelihood(m);
    REQUIRE(lml.has_value());
    CHECK_THAT(*lml, WithinRel(-4.337877066409345, 1e-14));
}

TEST_CASE("log marginal likelihood matches the dense-inverse oracle") {
    std::mt19937_64 rng(321);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> ut(0.3, 2.5);

    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + static_cast<int>(rng() % 7);
        Matrix X = random_points(n, 2, rng);
        Vector f(n);
        for (int i = 0; i < n; ++i) f(i) = g(rng);

        GPModel m{AnyKernel{BaselineKind::SE}, {ut(rng), ut(rng)}, X, f, 0.05};
        auto lml = moecov::log_marginal_likelihood(m);
        REQUIRE(lml.has_value());

        auto K = moecov::build_covariance(m.kernel, m.theta, X);
        REQUIRE(K.has_value());
        K->diagonal().array() += 0.05;
        auto want = oracle::lml(to_oracle(*K), to_std(f));
        REQUIRE(want.has_value());
        CHECK_THAT(*lml, WithinRel(*want, 1e-10));
    }
}

TEST_CASE("posterior prediction at a single point is closed-form") {
    Matrix X(1, 1), Xs(1, 1);
    X << 0.0;
    Xs << 1.0;
    Vector f(1);
    f << 1.0;
    GPModel m{AnyKernel{BaselineKind::SE}, {1.0, 1.0}, X, f};
    auto p = moecov::posterior_predict(m, Xs);
    REQUIRE(p.has_value());
    CHECK_THAT(p->mean(0), WithinRel(0.6065306597126334, 1e-14));
    CHECK_THAT(p->variance(0), WithinRel(0.6321205588285577, 1e-13));
}

TEST_CASE("posterior prediction matches the dense-inverse oracle") {
    std::mt19937_64 rng(654);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> ut(0.4, 2.0);

    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + static_cast<int>(rng() % 6);
        int ms = 1 + static_cast<int>(rng() % 4);
        Matrix X = random_points(n, 2, rng);
        Matrix Xs = random_points(ms, 2, rng);
        Vector f(n);
        for (int i = 0; i < n; ++i) f(i) = g(rng);

        double t0 = ut(rng), tl = ut(rng);
        GPModel m{AnyKernel{BaselineKind::M52}, {t0, tl}, X, f, 0.1};
        auto p = moecov::posterior_predict(m, Xs, true);
        REQUIRE(p.has_value());

        auto K = moecov::build_covariance(m.kernel, m.theta, X);
        auto Ks = moecov::build_covariance(m.kernel, m.theta, X, Xs);
        REQUIRE(K.has_value());
        REQUIRE(Ks.has_value());
        K->diagonal().array() += 0.1;
        std::vector<double> kss(static_cast<std::size_t>(ms), t0 * t0);
        auto want = oracle::posterior(to_oracle(*K), to_oracle(*Ks), kss, to_std(f));
        REQUIRE(want.has_value());

        for (int j = 0; j < ms; ++j) {
            CHECK_THAT(p->mean(j), WithinAbs(want->mean[static_cast<std::size_t>(j)],
                                             1e-9 * (1.0 + std::abs(want->mean[static_cast<std::size_t>(j)]))));
            CHECK_THAT(p->variance(j),
                       WithinAbs(want->variance[static_cast<std::size_t>(j)], 1e-9));
        }
        REQUIRE(p->full_cov.has_value());
        for (int j = 0; j < ms; ++j)
            CHECK_THAT((*p->full_cov)(j, j), WithinAbs(p->variance(j), 1e-12));
    }
}

TEST_CASE("diagonal-only and full-covariance paths agree") {
    std::mt19937_64 rng(777);
    Matrix X = random_points(6, 3, rng);
    Matrix Xs = random_points(4, 3, rng);
    Vector f = Vector::LinSpaced(6, -1.0, 2.0);
    GPModel m{AnyKernel{BaselineKind::RQ}, {1.0, 0.8, 1.5}, X, f, 0.01};

    auto diag_only = moecov::posterior_predict(m, Xs, false);
    auto full = moecov::posterior_predict(m, Xs, true);
    REQUIRE(diag_only.has_value());
    REQUIRE(full.has_value());
    CHECK_FALSE(diag_only->full_cov.has_value());
    for (int j = 0; j < 4; ++j) {
        CHECK_THAT(diag_only->mean(j), WithinAbs(full->mean(j), 1e-12));
        CHECK_THAT(diag_only->variance(j), WithinAbs(full->variance(j), 1e-10));
    }
}

TEST_CASE("predictive variance is never negative") {
    // a near-singular setup that would go slightly negative without clamping
    Matrix X(3, 1), Xs(1, 1);
    X << 0.0, 1e-9, 2e-9;
    Xs << 1e-10;
    Vector f(3);
    f << 1.0, 1.0, 1.0;
    GPModel m{AnyKernel{BaselineKind::SE}, {1.0, 1.0}, X, f};
    auto p = moecov::posterior_predict(m, Xs);
    REQUIRE(p.has_value());
    CHECK(p->variance(0) >= 0.0);
}

TEST_CASE("model faults propagate as empty results") {
    Matrix X(2, 1);
    X << 0.0, 5.0;
    Vector f(2);
    f << 1.0, -1.0;
    // sqrt(s) goes NaN for this data
    GPModel m{AnyKernel{moecov::parse_expr("sqrt(s)")}, {1.0, 3.0}, X, f};
    CHECK_FALSE(moecov::log_marginal_likelihood(m).has_value());
    CHECK_FALSE(moecov::posterior_predict(m, X).has_value());
}

TEST_CASE("dimension mismatch at prediction time throws") {
    Matrix X(2, 2);
    X << 0, 0, 1, 1;
    Vector f(2);
    f << 0, 1;
    GPModel m{AnyKernel{BaselineKind::SE}, {1.0, 1.0}, X, f};
    CHECK_THROWS_AS(moecov::posterior_predict(m, Matrix::Zero(1, 3)), std::invalid_argument);
}

TEST_CASE("extra diagonal term equals an explicit noise addition") {
    std::mt19937_64 rng(11);
    Matrix X = random_points(5, 2, rng);
    Vector f = Vector::LinSpaced(5, 0.0, 1.0);

    GPModel noisy{AnyKernel{BaselineKind::SE}, {1.0, 1.0}, X, f, 0.25};
    auto lml_noisy = moecov::log_marginal_likelihood(noisy);

    auto K = moecov::build_covariance(noisy.kernel, noisy.theta, X);
    REQUIRE(K.has_value());
    K->diagonal().array() += 0.25;
    auto want = oracle::lml(to_oracle(*K), to_std(f));
    REQUIRE(lml_noisy.has_value());
    REQUIRE(want.has_value());
    CHECK_THAT(*lml_noisy, WithinRel(*want, 1e-10));
}
