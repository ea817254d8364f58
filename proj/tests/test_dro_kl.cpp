#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "odrpo/dro_kl.hpp"
#include "odrpo/oracle.hpp"

#include <cmath>

using namespace odrpo;

namespace {

// Single-state problem with a uniform two-action reference policy.
KlProblem two_action_problem(double a0, double a1, double delta) {
    KlProblem p;
    p.rho.weights = {1.0};
    p.policy = TabularPolicy::uniform(1, 2);
    p.advantages = AdvantageEstimate(1, 2);
    p.advantages.value(0, 0) = a0;
    p.advantages.value(0, 1) = a1;
    p.advantages.mark_visited(0, 0);
    p.advantages.mark_visited(0, 1);
    p.delta = delta;
    return p;
}

KlProblem random_problem(RngStream& rng, double delta) {
    InstanceGenerator gen;
    gen.seed = rng.next_u64();
    auto inst = gen.make(0);
    inst.delta = delta;
    return to_kl_problem(inst);
}

} // namespace

TEST_CASE("dual objective: zero advantages give beta*delta") {
    const auto p = two_action_problem(0.0, 0.0, 0.1);
    CHECK(kl_dual_objective(p, 3.0) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("dual objective: beta -> 0 recovers the max advantage") {
    auto p = two_action_problem(1.0, 0.0, 0.0);
    CHECK(kl_dual_objective(p, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(kl_dual_objective(p, 1e-3) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("dual objective: direct evaluation of the log-sum-exp form") {
    const auto p = two_action_problem(1.0, 0.0, 0.1);
    // 0.1 + 1*log(0.5 e + 0.5), computed directly.
    const double expected = 0.1 + std::log(0.5 * std::exp(1.0) + 0.5);
    CHECK(kl_dual_objective(p, 1.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(0.7201145069582775).epsilon(1e-15));
}

TEST_CASE("dual gradient: zero advantages give delta for every beta") {
    const auto p = two_action_problem(0.0, 0.0, 0.1);
    for (double beta : {1e-6, 0.5, 3.0, 1e4}) {
        CHECK(kl_dual_gradient(p, beta) == doctest::Approx(0.1).epsilon(1e-12));
    }
    CHECK_THROWS_AS(kl_dual_gradient(p, 0.0), std::invalid_argument);
}

TEST_CASE("dual gradient: direct evaluation") {
    const auto p = two_action_problem(1.0, 0.0, 0.1);
    const double z = 0.5 * std::exp(1.0) + 0.5;  // E[e^{A/beta}] at beta = 1
    const double za = 0.5 * std::exp(1.0);       // E[e^{A/beta} A]
    const double expected = 0.1 + std::log(z) - za / z;
    CHECK(kl_dual_gradient(p, 1.0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(-0.0109440716717274).epsilon(1e-10));
}

TEST_CASE("dual gradient matches central finite differences") {
    RngStream rng(21);
    int checked = 0;
    while (checked < 300) {
        const double delta = std::vector<double>{0.01, 0.1, 0.5}[rng.uniform_int(3)];
        const auto p = random_problem(rng, delta);
        const auto bounds = kl_beta_bounds(p);
        const double lo = std::max(bounds.beta_min * 10.0, 1e-5);
        const double beta =
            std::exp(rng.uniform(std::log(lo), std::log(bounds.beta_max / 10.0)));
        const double h = 1e-6 * std::max(1.0, beta);
        const double fd =
            (kl_dual_objective(p, beta + h) - kl_dual_objective(p, beta - h)) / (2.0 * h);
        const double analytic = kl_dual_gradient(p, beta);
        CHECK(std::abs(fd - analytic) <= 1e-5 * std::max(1.0, std::abs(analytic)));
        ++checked;
    }
}

TEST_CASE("solve: constant advantages sit at the domain floor") {
    auto p = two_action_problem(0.0, 0.0, 0.1);
    const auto result = kl_solve_beta(p);
    const auto bounds = kl_beta_bounds(p);
    CHECK(result.beta_star == doctest::Approx(bounds.beta_min).epsilon(1e-12));
    CHECK(result.dual_value == doctest::Approx(bounds.beta_min * 0.1).epsilon(1e-9));
    CHECK(result.evaluations > 0);
    CHECK(result.hops == 10);

    auto c = two_action_problem(0.7, 0.7, 0.1);
    const auto rc = kl_solve_beta(c);
    CHECK(rc.beta_star == doctest::Approx(kl_beta_bounds(c).beta_min).epsilon(1e-12));
    CHECK(rc.dual_value == doctest::Approx(kl_beta_bounds(c).beta_min * 0.1 + 0.7).epsilon(1e-12));
}

TEST_CASE("solve: agrees with a dense million-point grid") {
    const auto p = two_action_problem(1.0, 0.0, 0.05);
    const auto result = kl_solve_beta(p);
    const auto [grid_beta, grid_value] = kl_grid_oracle(p, 1000000);
    CHECK(std::abs(result.beta_star - grid_beta) <= 1e-4 * grid_beta);
    CHECK(result.dual_value <= grid_value + 1e-12);
}

TEST_CASE("solve: dual value never exceeds the grid oracle on random instances") {
    InstanceGenerator gen;
    gen.seed = 2024;
    for (int i = 0; i < 100; ++i) {
        const auto inst = gen.make(i);
        const auto p = to_kl_problem(inst);
        const auto result = kl_solve_beta(p);
        const auto [grid_beta, grid_value] = kl_grid_oracle(p, 10000);
        CHECK(result.dual_value <= grid_value + 1e-8);
    }
}

TEST_CASE("policy update: identity, closed form, and the large-beta limit") {
    SUBCASE("zero advantages reproduce the reference exactly") {
        auto p = two_action_problem(0.0, 0.0, 0.1);
        p.policy.prob(0, 0) = 0.3;
        p.policy.prob(0, 1) = 0.7;
        const auto updated = kl_policy_update(p, 2.5);
        CHECK(updated.prob(0, 0) == 0.3);
        CHECK(updated.prob(0, 1) == 0.7);
        const auto limit = kl_policy_update(p, 0.0);
        CHECK(limit.prob(0, 0) == 0.3);
        CHECK(limit.prob(0, 1) == 0.7);
    }
    SUBCASE("exponential tilt at beta = 1") {
        const auto p = two_action_problem(1.0, 0.0, 0.1);
        const auto updated = kl_policy_update(p, 1.0);
        const double e = std::exp(1.0);
        CHECK(updated.prob(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
        CHECK(updated.prob(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-14));
    }
    SUBCASE("very large beta leaves the policy in place") {
        RngStream rng(31);
        const auto p = random_problem(rng, 0.1);
        double max_abs = 0.0;
        for (double v : p.advantages.values) {
            max_abs = std::max(max_abs, std::abs(v));
        }
        const auto updated = kl_policy_update(p, 1e6 * std::max(1.0, max_abs));
        for (int s = 0; s < p.policy.n_states(); ++s) {
            for (int a = 0; a < p.policy.n_actions(); ++a) {
                CHECK(std::abs(updated.prob(s, a) - p.policy.prob(s, a)) <= 1e-5);
            }
        }
    }
}

TEST_CASE("update invariants over random instances") {
    InstanceGenerator gen;
    gen.seed = 77;
    for (int i = 0; i < 60; ++i) {
        const auto inst = gen.make(i);
        const auto p = to_kl_problem(inst);
        const auto result = kl_solve_beta(p);
        const auto updated = kl_policy_update(p, result.beta_star);

        // Rows are distributions and the support never grows.
        CHECK(updated.row_stochastic(1e-12));
        for (int s = 0; s < p.policy.n_states(); ++s) {
            for (int a = 0; a < p.policy.n_actions(); ++a) {
                if (p.policy.prob(s, a) == 0.0) {
                    CHECK(updated.prob(s, a) == 0.0);
                }
            }
        }

        // Feasibility and improvement.
        const double kl = weighted_kl(p.rho, updated, p.policy);
        CHECK(kl <= p.delta * (1.0 + 1e-6) + 1e-9);
        const double gain = surrogate_objective(p.rho, p.advantages, updated) -
                            surrogate_objective(p.rho, p.advantages, p.policy);
        CHECK(gain >= -1e-10);

        // Strong duality certificate.
        const double gap =
            duality_gap(p.rho, p.advantages, updated, result.dual_value);
        CHECK(gap >= -1e-9 * (1.0 + std::abs(result.dual_value)));
        CHECK(gap <= 1e-6 * (1.0 + std::abs(result.dual_value)));
    }
}

TEST_CASE("primal optimum is monotone in the trust-region radius") {
    InstanceGenerator gen;
    gen.seed = 4242;
    for (int i = 0; i < 20; ++i) {
        auto inst = gen.make(i);
        double previous = -1e18;
        for (double delta : {0.01, 0.05, 0.2, 0.8}) {
            inst.delta = delta;
            const auto p = to_kl_problem(inst);
            const auto updated = kl_policy_update(p, kl_solve_beta(p).beta_star);
            const double primal = surrogate_objective(p.rho, p.advantages, updated);
            CHECK(primal >= previous - 1e-10);
            previous = primal;
        }
    }
}

TEST_CASE("support-restricted stabilization handles zero-probability argmax") {
    // The top advantage sits on an action the policy cannot take; the shifted
    // log-sum-exp must ignore it instead of collapsing to -inf.
    KlProblem p;
    p.rho.weights = {1.0};
    p.policy = TabularPolicy(1, 3, 0.0);
    p.policy.prob(0, 0) = 0.5;
    p.policy.prob(0, 1) = 0.5;
    p.advantages = AdvantageEstimate(1, 3);
    p.advantages.value(0, 0) = 0.2;
    p.advantages.value(0, 1) = -0.1;
    p.advantages.value(0, 2) = 50.0; // unsupported
    p.delta = 0.1;
    const double value = kl_dual_objective(p, 1e-4);
    CHECK(std::isfinite(value));
    CHECK(value == doctest::Approx(0.2).epsilon(1e-3));
    const auto updated = kl_policy_update(p, 1e-4);
    CHECK(updated.prob(0, 2) == 0.0);
    CHECK(updated.prob(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(kl_solve_beta(p).beta_star > 0.0);
}

TEST_CASE("problem validation") {
    auto p = two_action_problem(1.0, 0.0, 0.1);
    p.delta = 0.0;
    CHECK_THROWS_AS(validate_kl_problem(p), std::invalid_argument);
    p.delta = 0.1;
    p.rho.weights = {0.5, 0.5};
    CHECK_THROWS_AS(validate_kl_problem(p), std::invalid_argument);
    p.rho.weights = {0.7};
    CHECK_THROWS_AS(validate_kl_problem(p), std::invalid_argument);
}
