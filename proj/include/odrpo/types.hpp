#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace odrpo {

/// Deterministic random stream. All sampling goes through explicit streams so
/// that runs are reproducible bit-for-bit and per-episode streams can be split
/// off a run-level stream without coupling episode order to consumption order.
///
/// The helpers avoid std:: distributions on purpose: their output is
/// implementation-defined, while everything here is pinned to the
/// (standardized) mt19937_64 bit stream.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n), n >= 1.
    int uniform_int(int n);
    /// Standard normal via Box-Muller.
    double normal();

    /// Child stream seeded from this stream; children are independent of
    /// later draws from the parent.
    RngStream split();

  private:
    std::mt19937_64 engine_;
};

/// Mixes a (seed, index) pair into a well-spread 64-bit value. Used to derive
/// per-episode and per-run seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// Static description of a finite MDP environment.
struct MdpSpec {
    int n_states = 0;
    int n_actions = 0;
    int max_episode_steps = 0;
    std::string name;
};

struct TransitionStep {
    int state = 0;
    int action = 0;
    double reward = 0.0;
};

/// One sampled episode. `terminated` is true when the episode ended in a
/// terminal transition, false when it was cut off by the step limit.
struct Trajectory {
    std::vector<TransitionStep> steps;
    bool terminated = false;

    double total_reward() const;
};

/// Per-state categorical distribution pi(a|s), stored densely.
class TabularPolicy {
  public:
    TabularPolicy() = default;
    TabularPolicy(int n_states, int n_actions, double fill);

    static TabularPolicy uniform(int n_states, int n_actions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    double prob(int s, int a) const { return p_[static_cast<std::size_t>(s) * n_actions_ + a]; }
    double& prob(int s, int a) { return p_[static_cast<std::size_t>(s) * n_actions_ + a]; }

    std::span<const double> row(int s) const;
    std::span<double> row(int s);

    /// Draws an action from pi(.|s).
    int sample(int s, RngStream& rng) const;

    /// True iff every row is non-negative and sums to 1 within tol.
    bool row_stochastic(double tol = 1e-9) const;

  private:
    int n_states_ = 0;
    int n_actions_ = 0;
    std::vector<double> p_;
};

/// Estimated advantages A(s,a) with a mask of the pairs observed this
/// iteration. Unobserved pairs hold 0 so they are neutral in the dual
/// objectives.
struct AdvantageEstimate {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> visited;

    AdvantageEstimate() = default;
    AdvantageEstimate(int ns, int na)
        : n_states(ns), n_actions(na),
          values(static_cast<std::size_t>(ns) * na, 0.0),
          visited(static_cast<std::size_t>(ns) * na, 0) {}

    double value(int s, int a) const { return values[static_cast<std::size_t>(s) * n_actions + a]; }
    double& value(int s, int a) { return values[static_cast<std::size_t>(s) * n_actions + a]; }
    bool is_visited(int s, int a) const { return visited[static_cast<std::size_t>(s) * n_actions + a] != 0; }
    void mark_visited(int s, int a) { visited[static_cast<std::size_t>(s) * n_actions + a] = 1; }
};

/// Normalized discounted state-visitation weights; sums to 1.
struct VisitationWeights {
    std::vector<double> weights;

    int n_states() const { return static_cast<int>(weights.size()); }
    double weight(int s) const { return weights[s]; }
};

/// Result of a dual solve. `evaluations` counts dual objective/gradient
/// evaluations (candidate evaluations for the breakpoint search).
/// `moved_mass` and `boundary_tie` are transport diagnostics: the realized
/// rho-weighted transported mass at beta_star, and whether the trust-region
/// budget lands strictly between two vertex plans (in which case the vertex
/// policy cannot close the duality gap and the instance is flagged).
struct DualResult {
    double beta_star = 0.0;
    double dual_value = 0.0;
    long evaluations = 0;
    int hops = 0;
    double moved_mass = 0.0;
    bool boundary_tie = false;
};

/// rho-weighted expected advantage of `policy`: the surrogate objective each
/// update maximizes.
double surrogate_objective(const VisitationWeights& rho, const AdvantageEstimate& adv,
                           const TabularPolicy& policy);

/// rho-weighted KL(new || old). Infinite if new places mass where old has none.
double weighted_kl(const VisitationWeights& rho, const TabularPolicy& new_policy,
                   const TabularPolicy& old_policy);

/// rho-weighted total variation; equals the Wasserstein distance under the
/// 0/1 ground metric.
double weighted_total_variation(const VisitationWeights& rho, const TabularPolicy& new_policy,
                                const TabularPolicy& old_policy);

} // namespace odrpo
