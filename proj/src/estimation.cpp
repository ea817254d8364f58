#include "odrpo/estimation.hpp"

#include <cmath>
#include <stdexcept>

namespace odrpo {

std::vector<double> compute_returns(const Trajectory& traj, double gamma) {
    if (traj.steps.empty()) {
        throw std::invalid_argument("compute_returns: empty trajectory");
    }
    std::vector<double> returns(traj.steps.size());
    double acc = 0.0;
    for (std::size_t i = traj.steps.size(); i-- > 0;) {
        acc = traj.steps[i].reward + gamma * acc;
        returns[i] = acc;
    }
    return returns;
}

MlpValue::MlpValue(int n_states, const std::vector<int>& hidden, RngStream& rng) {
    layer_sizes.push_back(n_states);
    layer_sizes.insert(layer_sizes.end(), hidden.begin(), hidden.end());
    layer_sizes.push_back(1);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int rows = layer_sizes[l + 1];
        const int cols = layer_sizes[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        std::vector<double> w(static_cast<std::size_t>(rows) * cols);
        for (auto& v : w) {
            v = rng.uniform(-bound, bound);
        }
        std::vector<double> b(rows);
        for (auto& v : b) {
            v = rng.uniform(-bound, bound);
        }
        weights.push_back(std::move(w));
        biases.push_back(std::move(b));
    }
}

namespace {

// Forward pass keeping pre-activations; the one-hot input makes the first
// layer a column lookup.
void mlp_forward(const MlpValue& net, int state, std::vector<std::vector<double>>& activations) {
    activations.assign(net.weights.size(), {});
    const int h0 = net.layer_sizes[1];
    activations[0].resize(h0);
    for (int r = 0; r < h0; ++r) {
        activations[0][r] = net.weights[0][static_cast<std::size_t>(r) * net.layer_sizes[0] + state] +
                            net.biases[0][r];
    }
    for (std::size_t l = 1; l < net.weights.size(); ++l) {
        const int rows = net.layer_sizes[l + 1];
        const int cols = net.layer_sizes[l];
        activations[l].resize(rows);
        for (int r = 0; r < rows; ++r) {
            double z = net.biases[l][r];
            for (int c = 0; c < cols; ++c) {
                const double prev = std::max(activations[l - 1][c], 0.0);
                z += net.weights[l][static_cast<std::size_t>(r) * cols + c] * prev;
            }
            activations[l][r] = z;
        }
    }
}

} // namespace

double MlpValue::forward(int state) const {
    std::vector<std::vector<double>> acts;
    mlp_forward(*this, state, acts);
    return acts.back()[0];
}

void MlpValue::sgd_step(int state, double target, double lr) {
    std::vector<std::vector<double>> acts;
    mlp_forward(*this, state, acts);
    const double out = acts.back()[0];

    // dL/dz at the linear output for L = (target - out)^2.
    std::vector<double> delta{-2.0 * (target - out)};
    for (std::size_t l = weights.size(); l-- > 0;) {
        const int rows = layer_sizes[l + 1];
        const int cols = layer_sizes[l];
        std::vector<double> prev_delta;
        if (l > 0) {
            prev_delta.assign(cols, 0.0);
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    if (acts[l - 1][c] > 0.0) {
                        prev_delta[c] += weights[l][static_cast<std::size_t>(r) * cols + c] * delta[r];
                    }
                }
            }
        }
        for (int r = 0; r < rows; ++r) {
            const double g = delta[r];
            biases[l][r] -= lr * g;
            if (l == 0) {
                weights[l][static_cast<std::size_t>(r) * cols + state] -= lr * g;
            } else {
                for (int c = 0; c < cols; ++c) {
                    const double prev = std::max(acts[l - 1][c], 0.0);
                    weights[l][static_cast<std::size_t>(r) * cols + c] -= lr * g * prev;
                }
            }
        }
        delta = std::move(prev_delta);
    }
}

ValueEstimator ValueEstimator::tabular(int n_states, double learning_rate) {
    ValueEstimator est;
    est.kind_ = ValueKind::kTabular;
    est.n_states_ = n_states;
    est.learning_rate_ = learning_rate;
    est.table_.assign(n_states, 0.0);
    return est;
}

ValueEstimator ValueEstimator::mlp(int n_states, double learning_rate, std::uint64_t seed,
                                   const std::vector<int>& hidden) {
    ValueEstimator est;
    est.kind_ = ValueKind::kMlp;
    est.n_states_ = n_states;
    est.learning_rate_ = learning_rate;
    RngStream rng(mix_seed(seed, 0x76616c7565ULL));
    est.net_ = MlpValue(n_states, hidden, rng);
    return est;
}

double ValueEstimator::value(int state) const {
    if (kind_ == ValueKind::kTabular) {
        return table_[state];
    }
    return net_.forward(state);
}

void update_value(ValueEstimator& estimator, const std::vector<std::pair<int, double>>& pairs) {
    for (const auto& [state, target] : pairs) {
        if (!std::isfinite(target)) {
            throw std::invalid_argument("update_value: non-finite return");
        }
        if (estimator.kind_ == ValueKind::kTabular) {
            double& v = estimator.table_[state];
            v += estimator.learning_rate_ * 2.0 * (target - v);
        } else {
            estimator.net_.sgd_step(state, target, estimator.learning_rate_);
        }
    }
}

AdvantageEstimate estimate_advantages(const std::vector<Trajectory>& trajs,
                                      const std::vector<std::vector<double>>& returns,
                                      const ValueEstimator& estimator, int n_actions) {
    if (trajs.size() != returns.size()) {
        throw std::invalid_argument("estimate_advantages: trajectories and returns misaligned");
    }
    AdvantageEstimate adv(estimator.n_states(), n_actions);
    std::vector<int> counts(adv.values.size(), 0);
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        if (trajs[i].steps.size() != returns[i].size()) {
            throw std::invalid_argument("estimate_advantages: trajectories and returns misaligned");
        }
        for (std::size_t t = 0; t < trajs[i].steps.size(); ++t) {
            const auto& step = trajs[i].steps[t];
            const double sample = returns[i][t] - estimator.value(step.state);
            const auto idx = static_cast<std::size_t>(step.state) * n_actions + step.action;
            adv.values[idx] += sample;
            counts[idx] += 1;
            adv.visited[idx] = 1;
        }
    }
    for (std::size_t idx = 0; idx < counts.size(); ++idx) {
        if (counts[idx] > 0) {
            adv.values[idx] /= counts[idx];
        }
    }
    return adv;
}

VisitationWeights estimate_visitation(const std::vector<Trajectory>& trajs, double gamma,
                                      int n_states) {
    bool any = false;
    for (const auto& t : trajs) {
        if (!t.steps.empty()) {
            any = true;
        }
    }
    if (!any) {
        throw std::invalid_argument("estimate_visitation: no non-empty trajectory");
    }
    VisitationWeights rho;
    rho.weights.assign(n_states, 0.0);
    const double per_traj = 1.0 / static_cast<double>(trajs.size());
    for (const auto& traj : trajs) {
        double discount = 1.0;
        for (const auto& step : traj.steps) {
            rho.weights[step.state] += discount * per_traj;
            discount *= gamma;
        }
    }
    double sum = 0.0;
    for (double w : rho.weights) {
        sum += w;
    }
    for (double& w : rho.weights) {
        w /= sum;
    }
    return rho;
}

} // namespace odrpo
