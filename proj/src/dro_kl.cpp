#include "odrpo/dro_kl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace odrpo {

namespace {

// Dense per-state view restricted to rho(s) > 0 and pi(a|s) > 0; everything
// the dual objective and gradient need, gathered once per solve.
struct CompactState {
    double rho;
    double max_adv;
    std::vector<double> prob;
    std::vector<double> adv;
};

std::vector<CompactState> compact_view(const KlProblem& p) {
    std::vector<CompactState> view;
    for (int s = 0; s < p.policy.n_states(); ++s) {
        const double w = p.rho.weight(s);
        if (w <= 0.0) {
            continue;
        }
        CompactState cs;
        cs.rho = w;
        cs.max_adv = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < p.policy.n_actions(); ++a) {
            const double pa = p.policy.prob(s, a);
            if (pa <= 0.0) {
                continue;
            }
            const double adv = p.advantages.value(s, a);
            cs.prob.push_back(pa);
            cs.adv.push_back(adv);
            cs.max_adv = std::max(cs.max_adv, adv);
        }
        view.push_back(std::move(cs));
    }
    return view;
}

double objective_from_view(const std::vector<CompactState>& view, double delta, double beta) {
    if (beta == 0.0) {
        double total = 0.0;
        for (const auto& cs : view) {
            total += cs.rho * cs.max_adv;
        }
        return total;
    }
    double total = beta * delta;
    for (const auto& cs : view) {
        double z = 0.0;
        for (std::size_t i = 0; i < cs.prob.size(); ++i) {
            z += cs.prob[i] * std::exp((cs.adv[i] - cs.max_adv) / beta);
        }
        total += cs.rho * (cs.max_adv + beta * std::log(z));
    }
    return total;
}

double gradient_from_view(const std::vector<CompactState>& view, double delta, double beta) {
    double total = delta;
    for (const auto& cs : view) {
        double z = 0.0;
        double za = 0.0;
        for (std::size_t i = 0; i < cs.prob.size(); ++i) {
            const double w = cs.prob[i] * std::exp((cs.adv[i] - cs.max_adv) / beta);
            z += w;
            za += w * cs.adv[i];
        }
        total += cs.rho * (cs.max_adv / beta + std::log(z) - za / (beta * z));
    }
    return total;
}

struct BetaSearch {
    const std::vector<CompactState>& view;
    double delta;
    KlBetaBounds bounds;
    double tol_rel;
    long evaluations = 0;

    double objective(double beta) {
        ++evaluations;
        return objective_from_view(view, delta, beta);
    }
    double gradient(double beta) {
        ++evaluations;
        return gradient_from_view(view, delta, beta);
    }

    // Gradient-sign descent started near beta0: grow a bracket outward until
    // the gradient changes sign (or a domain edge is hit), then bisect. The
    // returned point is the upper end of the final bracket, where the
    // gradient is non-negative, so the recovered policy sits on the feasible
    // side of the trust region.
    double descend(double beta0) {
        double lo = std::clamp(beta0 / 2.0, bounds.beta_min, bounds.beta_max);
        double hi = std::clamp(beta0 * 2.0, bounds.beta_min, bounds.beta_max);
        while (gradient(lo) > 0.0 && lo > bounds.beta_min) {
            hi = lo;
            lo = std::max(bounds.beta_min, lo / 4.0);
        }
        if (gradient(lo) >= 0.0) {
            return lo; // increasing from the left edge
        }
        while (gradient(hi) < 0.0 && hi < bounds.beta_max) {
            lo = hi;
            hi = std::min(bounds.beta_max, hi * 4.0);
        }
        if (gradient(hi) <= 0.0) {
            return hi; // still decreasing at the right edge
        }
        while (hi - lo > tol_rel * std::max(1.0, hi)) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) {
                break;
            }
            if (gradient(mid) < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return hi;
    }
};

} // namespace

void validate_kl_problem(const KlProblem& problem) {
    const int ns = problem.policy.n_states();
    const int na = problem.policy.n_actions();
    if (problem.rho.n_states() != ns || problem.advantages.n_states != ns ||
        problem.advantages.n_actions != na) {
        throw std::invalid_argument("KlProblem: dimension mismatch");
    }
    if (!(problem.delta > 0.0)) {
        throw std::invalid_argument("KlProblem: delta must be positive");
    }
    double sum = 0.0;
    for (double w : problem.rho.weights) {
        if (w < 0.0) {
            throw std::invalid_argument("KlProblem: negative visitation weight");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("KlProblem: visitation weights not normalized");
    }
}

KlBetaBounds kl_beta_bounds(const KlProblem& problem) {
    double max_abs = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < problem.policy.n_states(); ++s) {
        if (problem.rho.weight(s) <= 0.0) {
            continue;
        }
        for (int a = 0; a < problem.policy.n_actions(); ++a) {
            if (problem.policy.prob(s, a) <= 0.0) {
                continue;
            }
            const double v = problem.advantages.value(s, a);
            max_abs = std::max(max_abs, std::abs(v));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 0.0;
    }
    KlBetaBounds b;
    b.beta_min = 1e-8 * (1.0 + max_abs);
    b.beta_max = 10.0 * (hi - lo + 1.0) / problem.delta;
    return b;
}

double kl_dual_objective(const KlProblem& problem, double beta) {
    if (beta < 0.0) {
        throw std::invalid_argument("kl_dual_objective: beta must be non-negative");
    }
    return objective_from_view(compact_view(problem), problem.delta, beta);
}

double kl_dual_gradient(const KlProblem& problem, double beta) {
    if (!(beta > 0.0)) {
        throw std::invalid_argument("kl_dual_gradient: beta must be positive");
    }
    return gradient_from_view(compact_view(problem), problem.delta, beta);
}

DualResult kl_solve_beta(const KlProblem& problem, const KlSolverConfig& config) {
    validate_kl_problem(problem);
    const auto view = compact_view(problem);
    BetaSearch search{view, problem.delta, kl_beta_bounds(problem), config.beta_tol_rel};

    double best_beta = search.descend(std::sqrt(search.bounds.beta_min * search.bounds.beta_max));
    double best_value = search.objective(best_beta);

    RngStream rng(mix_seed(config.seed, 0x6b6c686f70ULL));
    int hops = 0;
    for (int h = 0; h < config.hops; ++h) {
        ++hops;
        const double factor =
            std::exp(rng.uniform(std::log(config.hop_factor_min), std::log(config.hop_factor_max)));
        const double start = std::clamp(best_beta * factor, search.bounds.beta_min, search.bounds.beta_max);
        const double candidate = search.descend(start);
        const double value = search.objective(candidate);
        if (value < best_value) {
            best_beta = candidate;
            best_value = value;
        }
    }

    DualResult result;
    result.beta_star = best_beta;
    result.dual_value = best_value;
    result.evaluations = search.evaluations;
    result.hops = hops;
    return result;
}

TabularPolicy kl_policy_update(const KlProblem& problem, double beta_star) {
    if (beta_star < 0.0) {
        throw std::invalid_argument("kl_policy_update: beta_star must be non-negative");
    }
    const int ns = problem.policy.n_states();
    const int na = problem.policy.n_actions();
    TabularPolicy updated(ns, na, 0.0);
    std::vector<double> row(na);
    for (int s = 0; s < ns; ++s) {
        double max_adv = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < na; ++a) {
            if (problem.policy.prob(s, a) > 0.0) {
                max_adv = std::max(max_adv, problem.advantages.value(s, a));
            }
        }
        double z = 0.0;
        for (int a = 0; a < na; ++a) {
            const double pa = problem.policy.prob(s, a);
            if (pa <= 0.0) {
                row[a] = 0.0;
                continue;
            }
            const double shifted = problem.advantages.value(s, a) - max_adv;
            double w;
            if (beta_star > 0.0) {
                w = pa * std::exp(shifted / beta_star);
            } else {
                // beta -> 0 limit: mass proportional to pi over the argmax set.
                w = (shifted == 0.0) ? pa : 0.0;
            }
            row[a] = w;
            z += w;
        }
        for (int a = 0; a < na; ++a) {
            updated.prob(s, a) = row[a] / z;
        }
    }
    return updated;
}

} // namespace odrpo
