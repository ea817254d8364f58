#include "odrpo/types.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace odrpo {

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

int RngStream::uniform_int(int n) {
    // Lemire's multiply-shift; bias is unmeasurable for the small n used here
    // and the mapping is fully deterministic.
    const auto x = next_u64();
    return static_cast<int>((static_cast<unsigned __int128>(x) * static_cast<std::uint64_t>(n)) >> 64);
}

double RngStream::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

RngStream RngStream::split() {
    return RngStream(mix_seed(next_u64(), next_u64()));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 finalizer over the combined words.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Trajectory::total_reward() const {
    double sum = 0.0;
    for (const auto& step : steps) {
        sum += step.reward;
    }
    return sum;
}

TabularPolicy::TabularPolicy(int n_states, int n_actions, double fill)
    : n_states_(n_states), n_actions_(n_actions),
      p_(static_cast<std::size_t>(n_states) * n_actions, fill) {}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
    return TabularPolicy(n_states, n_actions, 1.0 / n_actions);
}

std::span<const double> TabularPolicy::row(int s) const {
    return {p_.data() + static_cast<std::size_t>(s) * n_actions_, static_cast<std::size_t>(n_actions_)};
}

std::span<double> TabularPolicy::row(int s) {
    return {p_.data() + static_cast<std::size_t>(s) * n_actions_, static_cast<std::size_t>(n_actions_)};
}

int TabularPolicy::sample(int s, RngStream& rng) const {
    const double u = rng.uniform();
    const auto r = row(s);
    double cum = 0.0;
    int last_supported = 0;
    for (int a = 0; a < n_actions_; ++a) {
        if (r[a] > 0.0) {
            last_supported = a;
        }
        cum += r[a];
        if (u < cum) {
            return a;
        }
    }
    // u landed in the rounding slack past the last positive entry.
    return last_supported;
}

bool TabularPolicy::row_stochastic(double tol) const {
    for (int s = 0; s < n_states_; ++s) {
        const auto r = row(s);
        double sum = 0.0;
        for (double v : r) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                return false;
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > tol) {
            return false;
        }
    }
    return true;
}

double surrogate_objective(const VisitationWeights& rho, const AdvantageEstimate& adv,
                           const TabularPolicy& policy) {
    if (rho.n_states() != policy.n_states() || adv.n_states != policy.n_states() ||
        adv.n_actions != policy.n_actions()) {
        throw std::invalid_argument("surrogate_objective: dimension mismatch");
    }
    double total = 0.0;
    for (int s = 0; s < policy.n_states(); ++s) {
        const double w = rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        double inner = 0.0;
        for (int a = 0; a < policy.n_actions(); ++a) {
            inner += policy.prob(s, a) * adv.value(s, a);
        }
        total += w * inner;
    }
    return total;
}

double weighted_kl(const VisitationWeights& rho, const TabularPolicy& new_policy,
                   const TabularPolicy& old_policy) {
    double total = 0.0;
    for (int s = 0; s < new_policy.n_states(); ++s) {
        const double w = rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        double kl = 0.0;
        for (int a = 0; a < new_policy.n_actions(); ++a) {
            const double p = new_policy.prob(s, a);
            if (p == 0.0) {
                continue;
            }
            const double q = old_policy.prob(s, a);
            if (q == 0.0) {
                return std::numeric_limits<double>::infinity();
            }
            kl += p * std::log(p / q);
        }
        total += w * kl;
    }
    return total;
}

double weighted_total_variation(const VisitationWeights& rho, const TabularPolicy& new_policy,
                                const TabularPolicy& old_policy) {
    double total = 0.0;
    for (int s = 0; s < new_policy.n_states(); ++s) {
        const double w = rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        double l1 = 0.0;
        for (int a = 0; a < new_policy.n_actions(); ++a) {
            l1 += std::abs(new_policy.prob(s, a) - old_policy.prob(s, a));
        }
        total += w * 0.5 * l1;
    }
    return total;
}

} // namespace odrpo
