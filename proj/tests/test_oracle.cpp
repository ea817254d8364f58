#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "odrpo/oracle.hpp"

#include <cmath>

using namespace odrpo;

TEST_CASE("instance generator: normalized, strictly positive rows, reproducible") {
    InstanceGenerator gen;
    gen.seed = 3;
    for (int i = 0; i < 25; ++i) {
        const auto inst = gen.make(i);
        CHECK(inst.policy.n_states() >= 1);
        CHECK(inst.policy.n_states() <= 6);
        CHECK(inst.policy.n_actions() >= 2);
        CHECK(inst.policy.n_actions() <= 6);
        CHECK(inst.policy.row_stochastic(1e-12));
        for (int s = 0; s < inst.policy.n_states(); ++s) {
            for (int a = 0; a < inst.policy.n_actions(); ++a) {
                CHECK(inst.policy.prob(s, a) > 0.0);
            }
        }
        double sum = 0.0;
        for (double w : inst.rho.weights) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        const auto again = gen.make(i);
        CHECK(again.delta == inst.delta);
        CHECK(again.advantages.values == inst.advantages.values);
    }
}

TEST_CASE("weak duality: dual at any beta dominates any feasible policy") {
    InstanceGenerator gen;
    gen.seed = 8;
    RngStream rng(12);
    for (int i = 0; i < 5; ++i) {
        const auto inst = gen.make(i);
        const auto klp = to_kl_problem(inst);
        const auto wsp = to_wass_problem(inst);
        const auto bounds = kl_beta_bounds(klp);

        for (int f = 0; f < 20; ++f) {
            // A feasible policy: mix the reference toward a random direction
            // and verify the metric before using it.
            TabularPolicy candidate = inst.policy;
            const double scale = std::sqrt(inst.delta) * rng.uniform(0.05, 0.6);
            for (int s = 0; s < candidate.n_states(); ++s) {
                std::vector<double> row(candidate.n_actions());
                for (int a = 0; a < candidate.n_actions(); ++a) {
                    row[a] = candidate.prob(s, a) + scale * rng.normal();
                }
                row = project_to_simplex(std::move(row));
                for (int a = 0; a < candidate.n_actions(); ++a) {
                    candidate.prob(s, a) = row[a];
                }
            }
            const double primal = surrogate_objective(inst.rho, inst.advantages, candidate);
            if (weighted_kl(inst.rho, candidate, inst.policy) <= inst.delta) {
                for (int b = 0; b < 20; ++b) {
                    const double beta = std::exp(rng.uniform(std::log(bounds.beta_min),
                                                             std::log(bounds.beta_max)));
                    CHECK(kl_dual_objective(klp, beta) >= primal - 1e-9);
                }
            }
            if (weighted_total_variation(inst.rho, candidate, inst.policy) <= inst.delta) {
                for (int b = 0; b < 20; ++b) {
                    const double beta = rng.uniform(0.0, 3.0);
                    CHECK(wass_dual_objective(wsp, beta) >= primal - 1e-9);
                }
            }
        }
    }
}

TEST_CASE("grid refinement is monotone") {
    InstanceGenerator gen;
    gen.seed = 21;
    for (int i = 0; i < 10; ++i) {
        const auto inst = gen.make(i);
        const auto klp = to_kl_problem(inst);
        const auto wsp = to_wass_problem(inst);
        double kl_prev = kl_grid_oracle(klp, 1000).second;
        double ws_prev = wass_grid_oracle(wsp, 1000).second;
        for (int g : {2000, 4000, 8000}) {
            const double kl_next = kl_grid_oracle(klp, g).second;
            const double ws_next = wass_grid_oracle(wsp, g).second;
            CHECK(kl_next <= kl_prev + 1e-12);
            CHECK(ws_next <= ws_prev + 1e-12);
            kl_prev = kl_next;
            ws_prev = ws_next;
        }
    }
    CHECK_THROWS_AS(kl_grid_oracle(to_kl_problem(gen.make(0)), 100), std::invalid_argument);
}

TEST_CASE("dominance: solver output survives ten thousand challengers") {
    InstanceGenerator gen;
    gen.seed = 55;
    int held = 0;
    const int total = 30;
    for (int i = 0; i < total; ++i) {
        const auto inst = gen.make(i);
        const auto klp = to_kl_problem(inst);
        const auto updated = kl_policy_update(klp, kl_solve_beta(klp).beta_star);
        RngStream rng(1000 + i);
        if (primal_feasible_dominance(inst.rho, inst.policy, inst.advantages, inst.delta,
                                      MetricKind::kKl, updated, 10000, rng)) {
            ++held;
        }
    }
    CHECK(held >= (99 * total) / 100);
}

TEST_CASE("dominance: the reference policy loses when there is room to improve") {
    // One state, sharply different advantages, roomy budget: tilting toward
    // the good action beats staying put.
    InstanceGenerator::Instance inst;
    inst.rho.weights = {1.0};
    inst.policy = TabularPolicy::uniform(1, 2);
    inst.advantages = AdvantageEstimate(1, 2);
    inst.advantages.value(0, 0) = 1.0;
    inst.advantages.value(0, 1) = -1.0;
    inst.advantages.mark_visited(0, 0);
    inst.advantages.mark_visited(0, 1);
    inst.delta = 0.5;
    RngStream rng(7);
    CHECK_FALSE(primal_feasible_dominance(inst.rho, inst.policy, inst.advantages, inst.delta,
                                          MetricKind::kKl, inst.policy, 2000, rng));
}

TEST_CASE("dominance: vanishing trust region accepts trivially") {
    InstanceGenerator gen;
    gen.seed = 61;
    auto inst = gen.make(0);
    inst.delta = 1e-9;
    const auto problem = to_kl_problem(inst);
    const auto updated = kl_policy_update(problem, kl_solve_beta(problem).beta_star);
    RngStream rng(3);
    CHECK(primal_feasible_dominance(inst.rho, inst.policy, inst.advantages, inst.delta,
                                    MetricKind::kKl, updated, 200, rng));
}

TEST_CASE("dominance: hopeless rejection rate aborts with a diagnostic") {
    // Deterministic reference rows make almost every perturbed row leave the
    // KL support, so proposals are rejected essentially always.
    InstanceGenerator::Instance inst;
    const int ns = 20;
    inst.rho.weights.assign(ns, 1.0 / ns);
    inst.policy = TabularPolicy(ns, 2, 0.0);
    for (int s = 0; s < ns; ++s) {
        inst.policy.prob(s, 0) = 1.0;
    }
    inst.advantages = AdvantageEstimate(ns, 2);
    RngStream rng(9);
    CHECK_THROWS_AS(primal_feasible_dominance(inst.rho, inst.policy, inst.advantages, 0.05,
                                              MetricKind::kKl, inst.policy, 500, rng),
                    std::runtime_error);
}

TEST_CASE("duality gap signs") {
    InstanceGenerator gen;
    gen.seed = 77;
    const auto inst = gen.make(2);
    const auto klp = to_kl_problem(inst);
    const auto result = kl_solve_beta(klp);
    const auto updated = kl_policy_update(klp, result.beta_star);

    const double gap = duality_gap(inst.rho, inst.advantages, updated, result.dual_value);
    CHECK(gap >= -1e-9);
    CHECK(gap <= 1e-6 * (1.0 + std::abs(result.dual_value)));

    // Weak duality at an arbitrary beta: the dual value there sits above the
    // reference policy's primal value.
    const double loose_dual = kl_dual_objective(klp, kl_beta_bounds(klp).beta_max);
    CHECK(duality_gap(inst.rho, inst.advantages, inst.policy, loose_dual) >= 0.0);
}

TEST_CASE("simplex projection") {
    const auto p = project_to_simplex({0.2, 0.5, 0.3});
    CHECK(p[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
    const auto q = project_to_simplex({2.0, -1.0, 0.5});
    double sum = 0.0;
    for (double v : q) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(q[0] > q[2]);
    CHECK(q[1] == 0.0);
}

TEST_CASE("run_verification: clean pass and the injected-bug negative control") {
    InstanceGenerator gen;
    gen.seed = 0;
    const auto clean = run_verification(gen, 40);
    CHECK(clean.ok);
    CHECK(clean.instances == 40);
    CHECK(clean.max_gap_rel <= 1e-6);
    CHECK(clean.max_constraint_excess <= 0.0);
    CHECK(clean.min_primal_gain >= -1e-10);
    CHECK(clean.max_grid_excess <= 1e-8);
    CHECK(clean.prop7_failures == 0);
    CHECK(clean.prop7_checked >= 40 * 6);

    VerifyOptions buggy;
    buggy.inject_bug = true;
    const auto broken = run_verification(gen, 10, buggy);
    CHECK_FALSE(broken.ok);
    CHECK(!broken.failure_description.empty());
}
