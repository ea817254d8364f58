#pragma once

#include "odrpo/estimation.hpp"
#include "odrpo/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace odrpo {

enum class Method { kKl, kWass };

std::string method_name(Method method);
Method method_from_name(const std::string& name);

struct TrainConfig {
    std::string env_id;
    Method method = Method::kKl;
    double gamma = 0.9;
    double delta = 0.1;
    int iterations = 1000;
    int batch = 1;
    double value_lr = 1e-2;
    ValueKind value_kind = ValueKind::kTabular;
    std::uint64_t seed = 0;
    bool beta_warm_start = false;
    int warm_start_after = 5;
    int eval_episodes = 1000;
};

/// Per-environment defaults; gamma/value-lr are shared, batch sizes and
/// iteration counts differ per task.
TrainConfig default_config(const std::string& env_id, Method method);

struct IterationRecord {
    int iteration = 0;
    double episode_reward_mean = 0.0;
    double episode_reward_std = 0.0;
    double beta_star = 0.0;
    double dual_value = 0.0;
    double constraint_value = 0.0; // measured rho-weighted divergence of the update
    double primal_gain = 0.0;      // surrogate improvement over the pre-update policy
    std::int64_t wall_ms = 0;
};

struct TrainResult {
    TabularPolicy policy;
    ValueEstimator value;
    std::vector<IterationRecord> records;
};

/// Runs the full actor-critic loop: per iteration, sample a batch of
/// episodes, compute Monte Carlo returns, take one value-regression pass,
/// estimate advantages and visitation weights, solve the selected dual and
/// apply its exact policy update. The initial policy is uniform. An initial
/// value estimator may be supplied (defaults to a zero table, or a randomly
/// initialized MLP when configured).
TrainResult train(const TrainConfig& config,
                  const std::optional<ValueEstimator>& initial_value = std::nullopt);

struct EvalSummary {
    double mean_return = 0.0;
    double std_return = 0.0;
    double mean_timesteps = 0.0;
    // Taxi-specific: fraction of episodes ending in a successful dropoff and
    // mean illegal pickup/dropoff events per episode.
    bool has_taxi_stats = false;
    double dropoff_rate = 0.0;
    double illegal_rate = 0.0;
};

/// Samples `episodes` episodes with actions drawn from the policy and
/// aggregates per-episode statistics.
EvalSummary evaluate(const TabularPolicy& policy, const std::string& env_id, int episodes,
                     std::uint64_t seed);

/// Mean episode reward over the last 10% of iterations (at least one).
double last_decile_reward(const std::vector<IterationRecord>& records);

} // namespace odrpo
