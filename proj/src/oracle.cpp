#include "odrpo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace odrpo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

InstanceGenerator::Instance InstanceGenerator::make(int index) const {
    RngStream rng(mix_seed(seed, 0x696e7374ULL + static_cast<std::uint64_t>(index) * 2654435761ULL));
    Instance inst;
    const int ns = 1 + rng.uniform_int(max_states);
    const int na = 2 + rng.uniform_int(std::max(1, max_actions - 1));

    inst.policy = TabularPolicy(ns, na, 0.0);
    inst.advantages = AdvantageEstimate(ns, na);
    inst.rho.weights.assign(ns, 0.0);

    std::vector<bool> visited_state(ns, false);
    for (int s = 0; s < ns; ++s) {
        visited_state[s] = rng.uniform() < 0.85;
    }
    if (std::none_of(visited_state.begin(), visited_state.end(), [](bool b) { return b; })) {
        visited_state[0] = true;
    }

    for (int s = 0; s < ns; ++s) {
        double row_sum = 0.0;
        for (int a = 0; a < na; ++a) {
            const double u = 0.05 + rng.uniform(); // strictly positive rows
            inst.policy.prob(s, a) = u;
            row_sum += u;
        }
        for (int a = 0; a < na; ++a) {
            inst.policy.prob(s, a) /= row_sum;
        }
        if (!visited_state[s]) {
            continue;
        }
        inst.rho.weights[s] = 0.05 + rng.uniform();
        for (int a = 0; a < na; ++a) {
            if (rng.uniform() < 0.15) {
                continue; // pair not observed: advantage stays 0
            }
            inst.advantages.value(s, a) = rng.uniform(advantage_lo, advantage_hi);
            inst.advantages.mark_visited(s, a);
        }
    }
    double rho_sum = 0.0;
    for (double w : inst.rho.weights) {
        rho_sum += w;
    }
    for (double& w : inst.rho.weights) {
        w /= rho_sum;
    }
    inst.delta = delta_choices[rng.uniform_int(static_cast<int>(delta_choices.size()))];
    return inst;
}

KlProblem to_kl_problem(const InstanceGenerator::Instance& instance) {
    return {instance.rho, instance.policy, instance.advantages, instance.delta};
}

WassProblem to_wass_problem(const InstanceGenerator::Instance& instance) {
    return {instance.rho, instance.policy, instance.advantages, instance.delta, {}};
}

std::pair<double, double> kl_grid_oracle(const KlProblem& problem, int grid_points) {
    if (grid_points < 1000) {
        throw std::invalid_argument("kl_grid_oracle: grid_points must be >= 1000");
    }
    const KlBetaBounds bounds = kl_beta_bounds(problem);
    double best_beta = 0.0;
    double best_value = kl_dual_objective(problem, 0.0);
    const double log_ratio = std::log(bounds.beta_max / bounds.beta_min);
    for (int k = 0; k <= grid_points; ++k) {
        const double beta =
            bounds.beta_min * std::exp(log_ratio * static_cast<double>(k) / grid_points);
        const double value = kl_dual_objective(problem, beta);
        if (value < best_value) {
            best_value = value;
            best_beta = beta;
        }
    }
    return {best_beta, best_value};
}

double wass_dual_reference(const WassProblem& problem, double beta) {
    double total = beta * problem.delta;
    for (int s = 0; s < problem.policy.n_states(); ++s) {
        const double w = problem.rho.weight(s);
        if (w == 0.0) {
            continue;
        }
        double inner = 0.0;
        for (int i = 0; i < problem.policy.n_actions(); ++i) {
            double best = -kInf;
            for (int j = 0; j < problem.policy.n_actions(); ++j) {
                best = std::max(best,
                                problem.advantages.value(s, j) - beta * problem.distance(j, i));
            }
            inner += problem.policy.prob(s, i) * best;
        }
        total += w * inner;
    }
    return total;
}

namespace {

// Breakpoints of the 0/1 dual, recomputed directly from the advantage table.
std::vector<double> reference_breakpoints(const WassProblem& problem) {
    std::vector<double> points{0.0};
    for (int s = 0; s < problem.policy.n_states(); ++s) {
        if (problem.rho.weight(s) == 0.0) {
            continue;
        }
        double top = -kInf;
        for (int a = 0; a < problem.policy.n_actions(); ++a) {
            top = std::max(top, problem.advantages.value(s, a));
        }
        for (int a = 0; a < problem.policy.n_actions(); ++a) {
            const double gap = top - problem.advantages.value(s, a);
            if (gap > 0.0) {
                points.push_back(gap);
            }
        }
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    return points;
}

} // namespace

std::pair<double, double> wass_grid_oracle(const WassProblem& problem, int grid_points) {
    if (grid_points < 1000) {
        throw std::invalid_argument("wass_grid_oracle: grid_points must be >= 1000");
    }
    std::vector<double> candidates;
    if (problem.distance.is_zero_one()) {
        candidates = reference_breakpoints(problem);
    } else {
        candidates.push_back(0.0);
    }
    double beta_hi = candidates.back();
    if (!problem.distance.is_zero_one()) {
        for (int s = 0; s < problem.policy.n_states(); ++s) {
            if (problem.rho.weight(s) == 0.0) {
                continue;
            }
            for (int i = 0; i < problem.policy.n_actions(); ++i) {
                for (int j = 0; j < problem.policy.n_actions(); ++j) {
                    if (i == j) {
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
    }
    if (beta_hi > 0.0) {
        for (int k = 0; k <= grid_points; ++k) {
            candidates.push_back(beta_hi * static_cast<double>(k) / grid_points);
        }
    }
    double best_beta = 0.0;
    double best_value = kInf;
    for (double beta : candidates) {
        const double value = wass_dual_reference(problem, beta);
        if (value < best_value) {
            best_value = value;
            best_beta = beta;
        }
    }
    return {best_beta, best_value};
}

double wass_segment_minimum(const WassProblem& problem, double beta0, int grid_points) {
    const auto breakpoints = reference_breakpoints(problem);
    // Closed segment to the right of the largest breakpoint <= beta0; matches
    // the stay-at-tie convention, under which a pair sitting exactly on its
    // gap does not transport.
    double lo = 0.0;
    double hi = kInf;
    for (double b : breakpoints) {
        if (b <= beta0) {
            lo = std::max(lo, b);
        } else {
            hi = std::min(hi, b);
        }
    }
    if (hi == kInf) {
        hi = std::max(beta0, lo) + 1.0; // past the last breakpoint the dual grows at rate delta
    }
    double best = kInf;
    for (int k = 0; k <= grid_points; ++k) {
        const double beta = lo + (hi - lo) * static_cast<double>(k) / grid_points;
        best = std::min(best, wass_dual_reference(problem, beta));
    }
    return best;
}

std::vector<double> project_to_simplex(std::vector<double> v) {
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double running = 0.0;
    double threshold = 0.0;
    int support = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += sorted[k];
        const double candidate = (running - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) {
            threshold = candidate;
            support = static_cast<int>(k + 1);
        }
    }
    (void)support;
    for (double& x : v) {
        x = std::max(0.0, x - threshold);
    }
    return v;
}

bool primal_feasible_dominance(const VisitationWeights& rho, const TabularPolicy& reference,
                               const AdvantageEstimate& advantages, double delta,
                               MetricKind metric, const TabularPolicy& candidate, int samples,
                               RngStream& rng) {
    const double candidate_value = surrogate_objective(rho, advantages, candidate);
    const int ns = reference.n_states();
    const int na = reference.n_actions();

    long accepted = 0;
    long attempts = 0;
    while (accepted < samples) {
        ++attempts;
        if (attempts >= 2000 && accepted * 1000 < attempts) {
            throw std::runtime_error(
                "primal_feasible_dominance: rejection rate above 99.9%; trust region too tight "
                "for the proposal scale");
        }
        const double base_scale = metric == MetricKind::kKl ? std::sqrt(delta) : delta;
        const double scale = std::min(1.0, base_scale * rng.uniform(0.05, 1.0));

        TabularPolicy proposal = reference;
        std::vector<double> row(na);
        for (int s = 0; s < ns; ++s) {
            if (rho.weight(s) == 0.0) {
                continue; // zero-weight rows never affect metric or objective
            }
            for (int a = 0; a < na; ++a) {
                row[a] = reference.prob(s, a) + scale * rng.normal();
            }
            row = project_to_simplex(std::move(row));
            for (int a = 0; a < na; ++a) {
                proposal.prob(s, a) = row[a];
            }
        }
        const double distance = metric == MetricKind::kKl
                                    ? weighted_kl(rho, proposal, reference)
                                    : weighted_total_variation(rho, proposal, reference);
        if (!(distance <= delta)) {
            continue;
        }
        ++accepted;
        if (surrogate_objective(rho, advantages, proposal) > candidate_value + 1e-7) {
            return false;
        }
    }
    return true;
}

double duality_gap(const VisitationWeights& rho, const AdvantageEstimate& advantages,
                   const TabularPolicy& policy, double dual_value) {
    return dual_value - surrogate_objective(rho, advantages, policy);
}

namespace {

std::string describe_instance(const InstanceGenerator& generator, int index,
                              const InstanceGenerator::Instance& inst) {
    std::ostringstream out;
    out.precision(17);
    out << "generator_seed=" << generator.seed << " index=" << index
        << " n_states=" << inst.policy.n_states() << " n_actions=" << inst.policy.n_actions()
        << " delta=" << inst.delta << "\nrho=[";
    for (double w : inst.rho.weights) {
        out << w << ",";
    }
    out << "]\npolicy=[";
    for (int s = 0; s < inst.policy.n_states(); ++s) {
        for (int a = 0; a < inst.policy.n_actions(); ++a) {
            out << inst.policy.prob(s, a) << ",";
        }
        out << ";";
    }
    out << "]\nadvantages=[";
    for (int s = 0; s < inst.policy.n_states(); ++s) {
        for (int a = 0; a < inst.policy.n_actions(); ++a) {
            out << inst.advantages.value(s, a) << ",";
        }
        out << ";";
    }
    out << "]";
    return out.str();
}

} // namespace

VerifyReport run_verification(const InstanceGenerator& generator, int count,
                              const VerifyOptions& options) {
    VerifyReport report;
    report.instances = count;

    const auto fail = [&](const std::string& what, const InstanceGenerator& gen, int index,
                          const InstanceGenerator::Instance& inst) {
        if (report.ok) {
            report.failure_description = what + "\n" + describe_instance(gen, index, inst);
        }
        report.ok = false;
    };

    for (int index = 0; index < count; ++index) {
        const auto inst = generator.make(index);
        const double constraint_cap = inst.delta * (1.0 + 1e-6) + 1e-9;

        // KL side.
        {
            const KlProblem problem = to_kl_problem(inst);
            DualResult dual = kl_solve_beta(problem);
            if (options.inject_bug) {
                dual.beta_star *= 1.1;
                dual.dual_value = kl_dual_objective(problem, dual.beta_star);
            }
            const TabularPolicy updated = kl_policy_update(problem, dual.beta_star);
            const double constraint = weighted_kl(problem.rho, updated, problem.policy);
            report.max_constraint_excess =
                std::max(report.max_constraint_excess, constraint - constraint_cap);
            if (constraint > constraint_cap) {
                fail("kl constraint violated: " + std::to_string(constraint), generator, index, inst);
            }

            const double gain = surrogate_objective(problem.rho, problem.advantages, updated) -
                                surrogate_objective(problem.rho, problem.advantages, problem.policy);
            report.min_primal_gain = std::min(report.min_primal_gain, gain);
            if (gain < -options.primal_gain_tol) {
                fail("kl primal gain negative: " + std::to_string(gain), generator, index, inst);
            }

            const double gap =
                duality_gap(problem.rho, problem.advantages, updated, dual.dual_value);
            const double gap_rel = gap / (1.0 + std::abs(dual.dual_value));
            report.max_gap_rel = std::max(report.max_gap_rel, gap_rel);
            if (gap_rel > options.gap_rel_tol || gap < -1e-9 * (1.0 + std::abs(dual.dual_value))) {
                fail("kl duality gap out of tolerance: " + std::to_string(gap), generator, index,
                     inst);
            }

            const auto grid = kl_grid_oracle(problem, options.grid_points);
            const double grid_excess = dual.dual_value - grid.second;
            report.max_grid_excess = std::max(report.max_grid_excess, grid_excess);
            if (grid_excess > options.grid_agreement_tol) {
                fail("kl solver dual above grid oracle: " + std::to_string(grid_excess), generator,
                     index, inst);
            }
        }

        // Wasserstein side.
        {
            const WassProblem problem = to_wass_problem(inst);
            DualResult dual = wass_solve_beta(problem);
            if (options.inject_bug) {
                dual.beta_star = dual.beta_star > 0.0 ? dual.beta_star * 1.1 : 0.1;
                dual.dual_value = wass_dual_objective(problem, dual.beta_star);
            }
            const TabularPolicy updated = wass_policy_update(problem, dual.beta_star);
            const double constraint = weighted_total_variation(problem.rho, updated, problem.policy);
            report.max_constraint_excess =
                std::max(report.max_constraint_excess, constraint - constraint_cap);
            if (constraint > constraint_cap) {
                fail("wass constraint violated: " + std::to_string(constraint), generator, index,
                     inst);
            }

            const double gain = surrogate_objective(problem.rho, problem.advantages, updated) -
                                surrogate_objective(problem.rho, problem.advantages, problem.policy);
            report.min_primal_gain = std::min(report.min_primal_gain, gain);
            if (gain < -options.primal_gain_tol) {
                fail("wass primal gain negative: " + std::to_string(gain), generator, index, inst);
            }

            if (dual.boundary_tie) {
                ++report.boundary_ties;
            } else {
                const double gap =
                    duality_gap(problem.rho, problem.advantages, updated, dual.dual_value);
                const double gap_rel = gap / (1.0 + std::abs(dual.dual_value));
                report.max_gap_rel = std::max(report.max_gap_rel, gap_rel);
                if (gap_rel > options.gap_rel_tol ||
                    gap < -1e-9 * (1.0 + std::abs(dual.dual_value))) {
                    fail("wass duality gap out of tolerance: " + std::to_string(gap), generator,
                         index, inst);
                }
            }

            const auto grid = wass_grid_oracle(problem, options.grid_points);
            const double grid_excess = dual.dual_value - grid.second;
            report.max_grid_excess = std::max(report.max_grid_excess, grid_excess);
            if (grid_excess > options.grid_agreement_tol) {
                fail("wass solver dual above grid oracle: " + std::to_string(grid_excess),
                     generator, index, inst);
            }

            // Proposition-style local rule: the returned point must attain the
            // dual minimum over the closed segment containing beta0.
            const auto breakpoints = reference_breakpoints(problem);
            const double max_gap = breakpoints.back();
            RngStream prop_rng(mix_seed(generator.seed, 0x70726f70ULL + index));
            std::vector<double> starts{0.0, max_gap, max_gap * 1.5 + 0.1};
            for (int r = 0; r < 3; ++r) {
                starts.push_back(prop_rng.uniform(0.0, std::max(max_gap * 1.1, 0.2)));
            }
            for (double beta0 : starts) {
                const double local = wass_local_beta(problem, beta0);
                const double local_value = wass_dual_objective(problem, local);
                const double segment_min = wass_segment_minimum(problem, beta0, 2000);
                ++report.prop7_checked;
                if (std::abs(local_value - segment_min) > options.prop7_tol) {
                    ++report.prop7_failures;
                    fail("prop7 local rule missed the segment minimum at beta0=" +
                             std::to_string(beta0),
                         generator, index, inst);
                }
            }
        }
    }
    return report;
}

} // namespace odrpo
