#include "odrpo/dro_wass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace odrpo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-state data for the 0/1 fast path: top advantage, whether it is
// attained more than once, and the runner-up.
struct RowMax {
    double max1 = -kInf;
    double max2 = -kInf;
    int argmax = -1;
    bool duplicated = false;
};

RowMax row_max(const WassProblem& p, int s) {
    RowMax rm;
    for (int a = 0; a < p.policy.n_actions(); ++a) {
        const double v = p.advantages.value(s, a);
        if (v > rm.max1) {
            rm.max2 = rm.max1;
            rm.max1 = v;
            rm.argmax = a;
            rm.duplicated = false;
        } else if (v == rm.max1) {
            rm.duplicated = true;
            rm.max2 = std::max(rm.max2, v);
        } else {
            rm.max2 = std::max(rm.max2, v);
        }
    }
    return rm;
}

// The stay/move decision under the 0/1 metric: action i transports iff its
// gap to the best alternative strictly exceeds beta. The gap is always
// computed as (best_other - A_i) -- the same expression that generates the
// breakpoint candidates -- so a candidate beta sitting exactly on a gap
// keeps that pair in place regardless of rounding.
bool moves_zero_one(double best_other, double ai, double beta) {
    return best_other - ai > beta;
}

// Dual objective under the 0/1 metric without building assignments.
double objective_zero_one(const WassProblem& p, double beta) {
    double total = beta * p.delta;
    for (int s = 0; s < p.policy.n_states(); ++s) {
        const double w = p.rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        const RowMax rm = row_max(p, s);
        double inner = 0.0;
        for (int i = 0; i < p.policy.n_actions(); ++i) {
            const double ai = p.advantages.value(s, i);
            const double best_other = (i == rm.argmax && !rm.duplicated) ? rm.max2 : rm.max1;
            inner += p.policy.prob(s, i) *
                     (moves_zero_one(best_other, ai, beta) ? best_other - beta : ai);
        }
        total += w * inner;
    }
    return total;
}

// Transport cost realized by the stay-at-tie assignment at beta.
double moved_cost_zero_one(const WassProblem& p, double beta) {
    double cost = 0.0;
    for (int s = 0; s < p.policy.n_states(); ++s) {
        const double w = p.rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        const RowMax rm = row_max(p, s);
        double inner = 0.0;
        for (int i = 0; i < p.policy.n_actions(); ++i) {
            const double best_other = (i == rm.argmax && !rm.duplicated) ? rm.max2 : rm.max1;
            if (moves_zero_one(best_other, p.advantages.value(s, i), beta)) {
                inner += p.policy.prob(s, i);
            }
        }
        cost += w * inner;
    }
    return cost;
}

double moved_cost_general(const WassProblem& p, const TransportAssignment& plan) {
    double cost = 0.0;
    for (int s = 0; s < p.policy.n_states(); ++s) {
        const double w = p.rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        double inner = 0.0;
        for (int i = 0; i < p.policy.n_actions(); ++i) {
            inner += p.policy.prob(s, i) * p.distance(plan.target_of(s, i), i);
        }
        cost += w * inner;
    }
    return cost;
}

// Advantage gaps of rho-positive states: gap(s,i) = max_a A(s,a) - A(s,i).
std::vector<double> positive_gaps(const WassProblem& p) {
    std::vector<double> gaps;
    for (int s = 0; s < p.policy.n_states(); ++s) {
        if (p.rho.weight(s) == 0.0) {
            continue;
        }
        const RowMax rm = row_max(p, s);
        for (int i = 0; i < p.policy.n_actions(); ++i) {
            const double g = rm.max1 - p.advantages.value(s, i);
            if (g > 0.0) {
                gaps.push_back(g);
            }
        }
    }
    return gaps;
}

} // namespace

GroundDistance::GroundDistance(int n_actions, std::vector<double> table)
    : n_(n_actions), table_(std::move(table)) {
    if (table_.size() != static_cast<std::size_t>(n_) * n_) {
        throw std::invalid_argument("GroundDistance: table size mismatch");
    }
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
            const double d = table_[static_cast<std::size_t>(i) * n_ + j];
            if (i == j && d != 0.0) {
                throw std::invalid_argument("GroundDistance: nonzero diagonal");
            }
            if (i != j && !(d > 0.0)) {
                throw std::invalid_argument("GroundDistance: off-diagonal entries must be positive");
            }
            if (d != table_[static_cast<std::size_t>(j) * n_ + i]) {
                throw std::invalid_argument("GroundDistance: asymmetric table");
            }
        }
    }
}

void validate_wass_problem(const WassProblem& problem) {
    const int ns = problem.policy.n_states();
    const int na = problem.policy.n_actions();
    if (problem.rho.n_states() != ns || problem.advantages.n_states != ns ||
        problem.advantages.n_actions != na) {
        throw std::invalid_argument("WassProblem: dimension mismatch");
    }
    if (!(problem.delta > 0.0)) {
        throw std::invalid_argument("WassProblem: delta must be positive");
    }
    double sum = 0.0;
    for (double w : problem.rho.weights) {
        if (w < 0.0) {
            throw std::invalid_argument("WassProblem: negative visitation weight");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("WassProblem: visitation weights not normalized");
    }
}

TransportAssignment wass_assignment(const WassProblem& problem, double beta) {
    if (beta < 0.0) {
        throw std::invalid_argument("wass_assignment: beta must be non-negative");
    }
    const int ns = problem.policy.n_states();
    const int na = problem.policy.n_actions();
    TransportAssignment plan;
    plan.n_states = ns;
    plan.n_actions = na;
    plan.target.resize(static_cast<std::size_t>(ns) * na);
    for (int s = 0; s < ns; ++s) {
        if (problem.distance.is_zero_one()) {
            // Decisions via the gap form (see moves_zero_one); the target of
            // every mover is the lowest-index argmax action.
            const RowMax rm = row_max(problem, s);
            for (int i = 0; i < na; ++i) {
                const double ai = problem.advantages.value(s, i);
                const double best_other = (i == rm.argmax && !rm.duplicated) ? rm.max2 : rm.max1;
                plan.target[static_cast<std::size_t>(s) * na + i] =
                    moves_zero_one(best_other, ai, beta) ? rm.argmax : i;
            }
            continue;
        }
        for (int i = 0; i < na; ++i) {
            double best = -kInf;
            for (int j = 0; j < na; ++j) {
                best = std::max(best, problem.advantages.value(s, j) - beta * problem.distance(j, i));
            }
            int target = -1;
            if (problem.advantages.value(s, i) == best) {
                target = i; // stay wins ties
            } else {
                for (int j = 0; j < na; ++j) {
                    if (problem.advantages.value(s, j) - beta * problem.distance(j, i) == best) {
                        target = j;
                        break;
                    }
                }
            }
            plan.target[static_cast<std::size_t>(s) * na + i] = target;
        }
    }
    return plan;
}

double wass_dual_objective(const WassProblem& problem, double beta) {
    if (beta < 0.0) {
        throw std::invalid_argument("wass_dual_objective: beta must be non-negative");
    }
    const auto plan = wass_assignment(problem, beta);
    double total = beta * problem.delta;
    for (int s = 0; s < problem.policy.n_states(); ++s) {
        const double w = problem.rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        double inner = 0.0;
        for (int i = 0; i < problem.policy.n_actions(); ++i) {
            const int j = plan.target_of(s, i);
            inner += problem.policy.prob(s, i) *
                     (problem.advantages.value(s, j) - beta * problem.distance(j, i));
        }
        total += w * inner;
    }
    return total;
}

double wass_local_beta(const WassProblem& problem, double beta0) {
    validate_wass_problem(problem);
    if (!problem.distance.is_zero_one()) {
        throw std::invalid_argument("wass_local_beta: requires the 0/1 ground metric");
    }
    if (beta0 < 0.0) {
        throw std::invalid_argument("wass_local_beta: beta0 must be non-negative");
    }

    const auto gaps = positive_gaps(problem);
    const double max_gap = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());
    const double min_pos_gap = gaps.empty() ? kInf : *std::min_element(gaps.begin(), gaps.end());

    if (beta0 >= max_gap) {
        return max_gap;
    }
    // rho-weighted mass of pairs transported at beta: those with gap > beta.
    const auto moving_mass = [&](double beta) {
        double mass = 0.0;
        for (int s = 0; s < problem.policy.n_states(); ++s) {
            const double w = problem.rho.weight(s);
            if (w == 0.0) {
                continue;
            }
            const RowMax rm = row_max(problem, s);
            for (int i = 0; i < problem.policy.n_actions(); ++i) {
                if (rm.max1 - problem.advantages.value(s, i) > beta) {
                    mass += w * problem.policy.prob(s, i);
                }
            }
        }
        return mass;
    };

    if (beta0 <= min_pos_gap) {
        return (problem.delta - moving_mass(0.0) < 0.0) ? min_pos_gap : 0.0;
    }
    // Interior segment: the dual is affine with slope delta - moving mass.
    if (problem.delta - moving_mass(beta0) < 0.0) {
        double next = kInf;
        for (double g : gaps) {
            if (g > beta0) {
                next = std::min(next, g);
            }
        }
        return next;
    }
    double prev = 0.0;
    for (double g : gaps) {
        if (g <= beta0) {
            prev = std::max(prev, g);
        }
    }
    return prev;
}

DualResult wass_solve_beta(const WassProblem& problem) {
    validate_wass_problem(problem);
    DualResult result;

    if (problem.distance.is_zero_one()) {
        auto candidates = positive_gaps(problem);
        candidates.push_back(0.0);
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

        double best_beta = 0.0;
        double best_value = kInf;
        for (double beta : candidates) {
            const double value = objective_zero_one(problem, beta);
            if (value < best_value) {
                best_value = value;
                best_beta = beta;
            }
        }
        result.beta_star = best_beta;
        result.dual_value = best_value;
        result.evaluations = static_cast<long>(candidates.size());
        result.moved_mass = moved_cost_zero_one(problem, best_beta);
    } else {
        // No breakpoint structure to exploit; dense log-spaced grid over the
        // range where transport is still possible.
        double beta_hi = 0.0;
        for (int s = 0; s < problem.policy.n_states(); ++s) {
            if (problem.rho.weight(s) == 0.0) {
                continue;
            }
            for (int i = 0; i < problem.policy.n_actions(); ++i) {
                for (int j = 0; j < problem.policy.n_actions(); ++j) {
                    if (j == i) {
                        continue;
                    }
                    const double diff =
                        problem.advantages.value(s, j) - problem.advantages.value(s, i);
                    if (diff > 0.0) {
                        beta_hi = std::max(beta_hi, diff / problem.distance(j, i));
                    }
                }
            }
        }
        double best_beta = 0.0;
        double best_value = wass_dual_objective(problem, 0.0);
        long evaluations = 1;
        if (beta_hi > 0.0) {
            const int points = 100000;
            const double beta_lo = beta_hi * 1e-10;
            const double ratio = std::log(beta_hi / beta_lo);
            for (int k = 0; k <= points; ++k) {
                const double beta = beta_lo * std::exp(ratio * k / points);
                const double value = wass_dual_objective(problem, beta);
                ++evaluations;
                if (value < best_value) {
                    best_value = value;
                    best_beta = beta;
                }
            }
        }
        result.beta_star = best_beta;
        result.dual_value = best_value;
        result.evaluations = evaluations;
        result.moved_mass = moved_cost_general(problem, wass_assignment(problem, best_beta));
    }

    result.boundary_tie = result.beta_star > 0.0 &&
                          result.beta_star * (problem.delta - result.moved_mass) >
                              1e-9 * (1.0 + std::abs(result.dual_value));
    return result;
}

TabularPolicy wass_policy_update(const WassProblem& problem, double beta_star) {
    if (beta_star < 0.0) {
        throw std::invalid_argument("wass_policy_update: beta_star must be non-negative");
    }
    const auto plan = wass_assignment(problem, beta_star);
    const int ns = problem.policy.n_states();
    const int na = problem.policy.n_actions();
    TabularPolicy updated(ns, na, 0.0);
    for (int s = 0; s < ns; ++s) {
        for (int i = 0; i < na; ++i) {
            updated.prob(s, plan.target_of(s, i)) += problem.policy.prob(s, i);
        }
    }
    return updated;
}

} // namespace odrpo
