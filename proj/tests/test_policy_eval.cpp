#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "amdp/policy_eval.hpp"
#include "test_support.hpp"

using namespace amdp;
using amdp::testing::random_mdp;

TEST_CASE("span seminorm") {
    Vector v(3);
    v << 3, 1, 4;
    CHECK(span_seminorm(v) == 3.0);
    CHECK(span_seminorm(Vector(Vector::Constant(5, 2.7))) == 0.0);

    SUBCASE("shift invariance and subadditivity") {
        Rng rng = make_rng(31);
        for (int trial = 0; trial < 50; ++trial) {
            Vector a(6), b(6);
            for (int i = 0; i < 6; ++i) {
                a[i] = 4.0 * uniform01(rng) - 2.0;
                b[i] = 4.0 * uniform01(rng) - 2.0;
            }
            CHECK(span_seminorm(Vector(a.array() + 3.5)) ==
                  doctest::Approx(span_seminorm(a)).epsilon(1e-12));
            CHECK(span_seminorm(Vector(a + b)) <= span_seminorm(a) + span_seminorm(b) + 1e-12);
        }
    }

    SUBCASE("empty input is a dimension error") {
        CHECK_THROWS_AS((void)span_seminorm(Vector()), DimensionError);
    }
}

TEST_CASE("exact critic delegates to the Poisson solve") {
    Rng rng = make_rng(32);
    const TabularAmdp mdp = random_mdp(4, 3, rng);
    const auto pi = StochasticPolicy::random(4, 3, rng);
    const auto h = RegularizerSpec::negative_entropy(0.8);

    const auto critic = exact_critic(mdp, pi, h);
    const auto dv = differential_values(mdp, pi, h);
    CHECK((critic.q - dv.q).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(critic.rho == dv.rho);
    CHECK(!critic.noise.has_value());

    const TabularAmdp flat = mdp.with_cost(Matrix::Constant(4, 3, 1.0));
    const auto flat_critic = exact_critic(flat, pi, RegularizerSpec::zero());
    CHECK(flat_critic.q.lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("noisy critic") {
    Rng rng = make_rng(33);
    const TabularAmdp mdp = random_mdp(4, 3, rng);
    const auto pi = StochasticPolicy::random(4, 3, rng);
    const auto h = RegularizerSpec::zero();
    const auto exact = exact_critic(mdp, pi, h);

    SUBCASE("zero noise reproduces the exact critic bit for bit") {
        const auto noisy = noisy_critic(mdp, pi, h, 0.0, 0.0, 7);
        CHECK((noisy.q - exact.q).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK(noisy.rho == exact.rho);
        CHECK(noisy.noise.has_value());
    }

    SUBCASE("deterministic perturbation has span exactly the bias bound") {
        const auto noisy = noisy_critic(mdp, pi, h, 0.25, 0.0, 7);
        CHECK(span_seminorm(Matrix(noisy.q - exact.q)) == doctest::Approx(0.25).epsilon(1e-12));
        // Same seed, same pattern.
        const auto again = noisy_critic(mdp, pi, h, 0.25, 0.0, 7);
        CHECK((noisy.q - again.q).lpNorm<Eigen::Infinity>() == 0.0);
    }

    SUBCASE("expectation over seeds stays within the construction bound") {
        const double bias = 0.1;
        const double sigma = 0.3;
        const int n_seeds = 10000;
        Matrix mean = Matrix::Zero(4, 3);
        for (int seed = 0; seed < n_seeds; ++seed)
            mean += noisy_critic(mdp, pi, h, bias, sigma, static_cast<std::uint64_t>(seed)).q -
                    exact.q;
        mean /= n_seeds;
        CHECK(span_seminorm(mean) <= bias + 3.0 * sigma / std::sqrt(n_seeds));
    }

    SUBCASE("stochastic part is zero-mean within three standard errors") {
        const double sigma = 0.5;
        const int n_seeds = 4000;
        Matrix mean = Matrix::Zero(4, 3);
        for (int seed = 0; seed < n_seeds; ++seed)
            mean += noisy_critic(mdp, pi, h, 0.0, sigma, static_cast<std::uint64_t>(seed)).q -
                    exact.q;
        mean /= n_seeds;
        const double se = sigma / std::sqrt(n_seeds);
        CHECK(mean.cwiseAbs().maxCoeff() <= 3.5 * se);
    }
}

TEST_CASE("TD critic") {
    SUBCASE("recovers the exact critic on a small chain") {
        Rng rng = make_rng(34);
        const TabularAmdp mdp = random_mdp(2, 2, rng, 0.1);
        const auto pi = StochasticPolicy::random(2, 2, rng);
        const auto h = RegularizerSpec::zero();
        TdConfig config;
        config.n_samples = 100000;
        config.learning_rate = 0.03;
        config.epochs = 6;
        const auto td = td_critic(mdp, pi, h, config, 5);
        const auto exact = exact_critic(mdp, pi, h);
        CHECK(span_seminorm(Matrix(td.q - exact.q)) <= 0.05);
        CHECK(td.noise.has_value());
    }

    SUBCASE("self-loop state gives the batch-average cost") {
        std::vector<Matrix> p(1, Matrix(1, 1));
        p[0] << 1.0;
        Matrix c(1, 1);
        c << 4.25;
        const TabularAmdp mdp(std::move(p), std::move(c));
        const auto pi = StochasticPolicy::uniform(1, 1);
        const auto td = td_critic(mdp, pi, RegularizerSpec::zero(), TdConfig{1000, 32, 0.1, 2}, 3);
        CHECK(td.rho == doctest::Approx(4.25).epsilon(1e-12));
    }

    SUBCASE("error median improves when samples quadruple") {
        Rng rng = make_rng(35);
        const TabularAmdp mdp = random_mdp(2, 2, rng, 0.1);
        const auto pi = StochasticPolicy::random(2, 2, rng);
        const auto exact = exact_critic(mdp, pi, RegularizerSpec::zero());
        auto median_error = [&](int n_samples) {
            std::vector<double> errors;
            for (int seed = 0; seed < 20; ++seed) {
                TdConfig config;
                config.n_samples = n_samples;
                config.learning_rate = 0.03;
                const auto td = td_critic(mdp, pi, RegularizerSpec::zero(), config,
                                          static_cast<std::uint64_t>(seed));
                errors.push_back(span_seminorm(Matrix(td.q - exact.q)));
            }
            std::sort(errors.begin(), errors.end());
            return errors[errors.size() / 2];
        };
        CHECK(median_error(40000) < median_error(10000));
    }
}

TEST_CASE("span operator") {
    Rng rng = make_rng(36);
    const TabularAmdp mdp = random_mdp(4, 2, rng);
    const auto pi = StochasticPolicy::random(4, 2, rng);
    const auto h = RegularizerSpec::negative_entropy(0.4);
    const auto dv = differential_values(mdp, pi, h);

    SUBCASE("the differential Q-function is a fixed point") {
        for (int j : {1, 3}) {
            SpanOperator op(mdp, pi, h, j);
            CHECK((op.apply(dv.q) - dv.q).lpNorm<Eigen::Infinity>() <= 1e-9);
        }
    }

    SUBCASE("affine shifts commute through the operator") {
        SpanOperator op(mdp, pi, h, 2);
        Matrix q(4, 2);
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 2; ++a) q(s, a) = 2.0 * uniform01(rng) - 1.0;
        const Matrix lhs = op.apply(Matrix(q.array() + 5.5));
        const Matrix rhs = op.apply(q).array() + 5.5;
        CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
}

TEST_CASE("contraction coefficient") {
    SUBCASE("identical kernel rows contract to zero") {
        // All actions and states share one successor distribution.
        Matrix row(1, 4);
        row << 0.1, 0.2, 0.3, 0.4;
        std::vector<Matrix> p(2, row.replicate(4, 1));
        const TabularAmdp mdp(std::move(p), Matrix::Zero(4, 2));
        const auto pi = StochasticPolicy::uniform(4, 2);
        CHECK(contraction_coefficient(mdp, pi, 1) == doctest::Approx(0.0).epsilon(1e-15));
    }

    SUBCASE("disjoint supports give gamma = 1") {
        const TabularAmdp mdp({Matrix::Identity(2, 2)}, Matrix::Zero(2, 1));
        const auto pi = StochasticPolicy::uniform(2, 1);
        CHECK(contraction_coefficient(mdp, pi, 1) == 1.0);
    }

    SUBCASE("hand-computed two-row overlap") {
        Matrix p0(2, 2);
        p0 << 0.9, 0.1, 0.5, 0.5;
        const TabularAmdp mdp({p0}, Matrix::Zero(2, 1));
        const auto pi = StochasticPolicy::uniform(2, 1);
        CHECK(std::abs(contraction_coefficient(mdp, pi, 1) - 0.4) <= 1e-15);
    }

    SUBCASE("measured span ratios never exceed the certificate") {
        Rng rng = make_rng(37);
        for (int cfg = 0; cfg < 5; ++cfg) {
            const TabularAmdp mdp = random_mdp(3 + cfg, 2, rng);
            const auto pi = StochasticPolicy::random(mdp.n_states(), 2, rng);
            const int j = 1 + cfg % 3;
            const double gamma = contraction_coefficient(mdp, pi, j);
            SpanOperator op(mdp, pi, RegularizerSpec::zero(), j);
            for (int pair = 0; pair < 100; ++pair) {
                Matrix a(mdp.n_states(), 2), b(mdp.n_states(), 2);
                for (int s = 0; s < mdp.n_states(); ++s)
                    for (int act = 0; act < 2; ++act) {
                        a(s, act) = 2.0 * uniform01(rng) - 1.0;
                        b(s, act) = 2.0 * uniform01(rng) - 1.0;
                    }
                const double before = span_seminorm(Matrix(a - b));
                const double after = span_seminorm(Matrix(op.apply(a) - op.apply(b)));
                CHECK(after <= gamma * before + 1e-12);
            }
        }
    }

    SUBCASE("a contractive J exists within the state-action budget") {
        Rng rng = make_rng(38);
        for (int trial = 0; trial < 10; ++trial) {
            const TabularAmdp mdp = random_mdp(4, 2, rng, 0.02);
            const auto pi = StochasticPolicy::random(4, 2, rng);
            const int j = find_contractive_j(mdp, pi);
            CHECK(j >= 1);
            CHECK(j <= 8);
            CHECK(contraction_coefficient(mdp, pi, j) <= 0.9);
        }
    }

    SUBCASE("a slowly mixing cycle needs more steps") {
        // Near-deterministic 3-cycle: one step barely overlaps, three steps mix.
        const double eps = 0.02;
        Matrix p0 = Matrix::Zero(3, 3);
        p0 << eps, 1.0 - 2.0 * eps, eps, eps, eps, 1.0 - 2.0 * eps, 1.0 - 2.0 * eps, eps, eps;
        const TabularAmdp mdp({p0}, Matrix::Zero(3, 1));
        const auto pi = StochasticPolicy::uniform(3, 1);
        const double gamma1 = contraction_coefficient(mdp, pi, 1);
        const int j = find_contractive_j(mdp, pi, 0.9);
        CHECK(gamma1 > 0.9);
        CHECK(contraction_coefficient(mdp, pi, j) <= 0.9);
    }
}
