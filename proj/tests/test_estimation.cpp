#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "odrpo/env.hpp"
#include "odrpo/estimation.hpp"

#include <cmath>

using namespace odrpo;

namespace {

Trajectory make_trajectory(const std::vector<double>& rewards) {
    Trajectory traj;
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        traj.steps.push_back({static_cast<int>(t % 3), static_cast<int>(t % 2), rewards[t]});
    }
    return traj;
}

// Independent oracle: direct double-loop sum G_t = sum_k gamma^k r_{t+k}.
std::vector<double> returns_by_double_loop(const std::vector<double>& rewards, double gamma) {
    std::vector<double> out(rewards.size());
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        double acc = 0.0;
        double discount = 1.0;
        for (std::size_t k = t; k < rewards.size(); ++k) {
            acc += discount * rewards[k];
            discount *= gamma;
        }
        out[t] = acc;
    }
    return out;
}

} // namespace

TEST_CASE("returns: single step") {
    const auto g = compute_returns(make_trajectory({1.0}), 0.9);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("returns: geometric unrolling") {
    const auto g = compute_returns(make_trajectory({0.0, 0.0, 1.0}), 0.5);
    CHECK(g[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("returns: random vector matches double-loop oracle") {
    RngStream rng(7);
    std::vector<double> rewards(50);
    for (auto& r : rewards) {
        r = rng.uniform(-5.0, 5.0);
    }
    const auto fast = compute_returns(make_trajectory(rewards), 0.9);
    const auto oracle = returns_by_double_loop(rewards, 0.9);
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        CHECK(std::abs(fast[t] - oracle[t]) <= 1e-12);
    }
}

TEST_CASE("returns: recursion holds exactly on sampled trajectories") {
    auto env = make_env("cliffwalking");
    const auto policy = TabularPolicy::uniform(48, 4);
    RngStream rng(3);
    for (const auto& traj : sample_trajectories(*env, policy, 5, rng)) {
        const auto g = compute_returns(traj, 0.9);
        for (std::size_t t = 0; t + 1 < g.size(); ++t) {
            CHECK(g[t] == traj.steps[t].reward + 0.9 * g[t + 1]);
        }
    }
}

TEST_CASE("returns: empty trajectory throws") {
    CHECK_THROWS_AS(compute_returns(Trajectory{}, 0.9), std::invalid_argument);
}

TEST_CASE("tabular value: one step on squared error") {
    auto est = ValueEstimator::tabular(4, 0.25);
    update_value(est, {{2, 1.0}});
    CHECK(est.value(2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(est.value(0) == 0.0);
}

TEST_CASE("tabular value: geometric convergence on a repeated pair") {
    const double alpha = 0.25;
    const double target = 3.0;
    auto est = ValueEstimator::tabular(1, alpha);
    const double initial_error = std::abs(target - est.value(0));
    for (int k = 1; k <= 10; ++k) {
        update_value(est, {{0, target}});
        const double expected = std::pow(std::abs(1.0 - 2.0 * alpha), k) * initial_error;
        CHECK(std::abs(est.value(0) - target) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("value update rejects non-finite returns") {
    auto est = ValueEstimator::tabular(1, 0.1);
    CHECK_THROWS_AS(update_value(est, {{0, std::nan("")}}), std::invalid_argument);
}

TEST_CASE("mlp value: empty pair list is a no-op") {
    auto est = ValueEstimator::mlp(6, 1e-2, 42);
    const double before = est.value(3);
    update_value(est, {});
    CHECK(est.value(3) == before);
}

TEST_CASE("mlp value: fits a constant target") {
    auto est = ValueEstimator::mlp(12, 1e-2, 11);
    const double target = 2.0;
    RngStream rng(5);
    std::vector<std::pair<int, double>> pairs;
    for (int i = 0; i < 500; ++i) {
        pairs.emplace_back(rng.uniform_int(12), target);
    }
    const auto mse = [&] {
        double acc = 0.0;
        for (const auto& [s, g] : pairs) {
            const double d = g - est.value(s);
            acc += d * d;
        }
        return acc / pairs.size();
    };
    const double initial = mse();
    for (int pass = 0; pass < 200; ++pass) {
        update_value(est, pairs);
    }
    // The constant predictor achieves zero error, so the net must get close.
    CHECK(mse() < 0.01 * initial);
}

TEST_CASE("advantages: definition, mean, and unvisited convention") {
    auto v = ValueEstimator::tabular(3, 0.25);
    update_value(v, {{1, 1.0}}); // V(1) = 0.5

    Trajectory t1;
    t1.steps.push_back({1, 0, 0.0});
    SUBCASE("single sample") {
        const auto adv = estimate_advantages({t1}, {{2.0}}, v, 2);
        CHECK(adv.value(1, 0) == doctest::Approx(1.5).epsilon(1e-15));
        CHECK(adv.is_visited(1, 0));
        CHECK_FALSE(adv.is_visited(0, 0));
        CHECK(adv.value(0, 0) == 0.0);
    }
    SUBCASE("mean over repeated samples") {
        Trajectory t2;
        t2.steps.push_back({1, 0, 0.0});
        const auto adv = estimate_advantages({t1, t2}, {{1.5}, {3.5}}, v, 2);
        CHECK(adv.value(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("misaligned inputs throw") {
        CHECK_THROWS_AS(estimate_advantages({t1}, {{1.0, 2.0}}, v, 2), std::invalid_argument);
        CHECK_THROWS_AS(estimate_advantages({t1}, {}, v, 2), std::invalid_argument);
    }
}

TEST_CASE("advantages: equal the per-pair sample means on sampled data") {
    auto env = make_env("nchain");
    const auto policy = TabularPolicy::uniform(5, 2);
    RngStream rng(9);
    const auto trajs = sample_trajectories(*env, policy, 3, rng);
    std::vector<std::vector<double>> returns;
    for (const auto& t : trajs) {
        returns.push_back(compute_returns(t, 0.9));
    }
    auto v = ValueEstimator::tabular(5, 1e-2);
    const auto adv = estimate_advantages(trajs, returns, v, 2);

    std::vector<double> sum(10, 0.0);
    std::vector<int> count(10, 0);
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        for (std::size_t t = 0; t < trajs[i].steps.size(); ++t) {
            const auto& step = trajs[i].steps[t];
            sum[step.state * 2 + step.action] += returns[i][t] - v.value(step.state);
            count[step.state * 2 + step.action] += 1;
        }
    }
    for (int s = 0; s < 5; ++s) {
        for (int a = 0; a < 2; ++a) {
            if (count[s * 2 + a] == 0) {
                CHECK_FALSE(adv.is_visited(s, a));
                continue;
            }
            CHECK(adv.is_visited(s, a));
            CHECK(adv.value(s, a) ==
                  doctest::Approx(sum[s * 2 + a] / count[s * 2 + a]).epsilon(1e-12));
        }
    }
}

TEST_CASE("visitation: direct application of the update rule") {
    Trajectory traj;
    traj.steps.push_back({0, 0, 0.0});
    traj.steps.push_back({1, 0, 0.0});
    const auto rho = estimate_visitation({traj}, 0.9, 3);
    CHECK(rho.weight(0) == doctest::Approx(1.0 / 1.9).epsilon(1e-15));
    CHECK(rho.weight(1) == doctest::Approx(0.9 / 1.9).epsilon(1e-15));
    CHECK(rho.weight(2) == 0.0);
}

TEST_CASE("visitation: identical single-state trajectories normalize to one") {
    Trajectory traj;
    traj.steps.push_back({0, 0, 0.0});
    const auto rho = estimate_visitation({traj, traj}, 0.9, 2);
    CHECK(rho.weight(0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("visitation: brute-force recomputation on sampled trajectories") {
    auto env = make_env("cliffwalking");
    const auto policy = TabularPolicy::uniform(48, 4);
    RngStream rng(17);
    const auto trajs = sample_trajectories(*env, policy, 100, rng);
    const auto rho = estimate_visitation(trajs, 0.9, 48);

    double sum = 0.0;
    for (double w : rho.weights) {
        CHECK(w >= 0.0);
        sum += w;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    // Independent accumulation: per-state gamma^t mass, normalized at the end.
    std::vector<double> expected(48, 0.0);
    double total = 0.0;
    for (const auto& traj : trajs) {
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
            const double mass = std::pow(0.9, static_cast<double>(t)) / trajs.size();
            expected[traj.steps[t].state] += mass;
            total += mass;
        }
    }
    for (int s = 0; s < 48; ++s) {
        CHECK(rho.weight(s) == doctest::Approx(expected[s] / total).epsilon(1e-10));
    }
}

TEST_CASE("visitation: empty trajectory set throws") {
    CHECK_THROWS_AS(estimate_visitation({}, 0.9, 3), std::invalid_argument);
    CHECK_THROWS_AS(estimate_visitation({Trajectory{}}, 0.9, 3), std::invalid_argument);
}
