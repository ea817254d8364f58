#pragma once

#include "odrpo/types.hpp"

#include <vector>

namespace odrpo {

/// Discounted returns G_t for one trajectory, computed by a single backward
/// pass G_t = r_t + gamma * G_{t+1}. Throws on an empty trajectory.
std::vector<double> compute_returns(const Trajectory& traj, double gamma);

enum class ValueKind { kTabular, kMlp };

/// Small dense feed-forward net: one-hot state input, rectifier hidden
/// layers, linear scalar output. Weights start uniform in
/// [-1/sqrt(fan_in), +1/sqrt(fan_in)].
struct MlpValue {
    std::vector<int> layer_sizes; // input, hidden..., 1
    std::vector<std::vector<double>> weights; // weights[l] is rows x cols, row-major
    std::vector<std::vector<double>> biases;

    MlpValue() = default;
    MlpValue(int n_states, const std::vector<int>& hidden, RngStream& rng);

    double forward(int state) const;
    /// One SGD step on (target - V(state))^2.
    void sgd_step(int state, double target, double lr);
};

/// State-value estimator behind the advantage step; tabular table by default,
/// optionally the small MLP.
class ValueEstimator {
  public:
    static ValueEstimator tabular(int n_states, double learning_rate);
    static ValueEstimator mlp(int n_states, double learning_rate, std::uint64_t seed,
                              const std::vector<int>& hidden = {10, 7, 5});

    ValueKind kind() const { return kind_; }
    int n_states() const { return n_states_; }
    double learning_rate() const { return learning_rate_; }

    double value(int state) const;

  private:
    ValueKind kind_ = ValueKind::kTabular;
    int n_states_ = 0;
    double learning_rate_ = 0.0;
    std::vector<double> table_;
    MlpValue net_;

    friend void update_value(ValueEstimator& estimator,
                             const std::vector<std::pair<int, double>>& pairs);
};

/// One stochastic-gradient pass over (state, return) pairs, in order,
/// minimizing the squared error. Tabular mode applies
/// V(s) <- V(s) + lr * 2 * (G - V(s)) per sample. Throws on non-finite
/// targets.
void update_value(ValueEstimator& estimator, const std::vector<std::pair<int, double>>& pairs);

/// Monte Carlo advantages: for every observed (s_t, a_t) the mean of
/// G_t - V(s_t) over all samples of that pair this iteration; unobserved
/// pairs stay 0 with the visited mask unset.
AdvantageEstimate estimate_advantages(const std::vector<Trajectory>& trajs,
                                      const std::vector<std::vector<double>>& returns,
                                      const ValueEstimator& estimator, int n_actions);

/// Discounted visitation frequencies: accumulate gamma^t / |D| per visited
/// state, then normalize to a probability distribution.
VisitationWeights estimate_visitation(const std::vector<Trajectory>& trajs, double gamma,
                                      int n_states);

} // namespace odrpo
