#pragma once

#include "odrpo/types.hpp"

namespace odrpo {

/// Ground distance between actions. Default-constructed it is the 0/1 metric
/// (0 on the diagonal, 1 off it), under which the per-state Wasserstein
/// distance equals the transported probability mass. A dense tabular distance
/// may be supplied instead; it must be symmetric, zero on the diagonal and
/// positive off it.
class GroundDistance {
  public:
    GroundDistance() = default;
    explicit GroundDistance(int n_actions, std::vector<double> table);

    bool is_zero_one() const { return table_.empty(); }
    double operator()(int i, int j) const {
        if (table_.empty()) {
            return i == j ? 0.0 : 1.0;
        }
        return table_[static_cast<std::size_t>(i) * n_ + j];
    }

  private:
    int n_ = 0;
    std::vector<double> table_;
};

/// One Wasserstein trust-region instance over a finite action set.
struct WassProblem {
    VisitationWeights rho;
    TabularPolicy policy;
    AdvantageEstimate advantages;
    double delta = 0.0;
    GroundDistance distance;
};

void validate_wass_problem(const WassProblem& problem);

/// Vertex transport plan: target(s, i) is the action receiving the mass of
/// action i in state s.
struct TransportAssignment {
    int n_states = 0;
    int n_actions = 0;
    std::vector<int> target;

    int target_of(int s, int i) const { return target[static_cast<std::size_t>(s) * n_actions + i]; }
};

/// Per-pair argmax_j (A(s,a_j) - beta * d(a_j, a_i)). Ties prefer j = i
/// (no transport), then the lowest index.
TransportAssignment wass_assignment(const WassProblem& problem, double beta);

/// Dual objective
///   beta*delta + sum_s rho(s) sum_i pi(a_i|s) (A(s,a_j*) - beta d(a_j*, a_i))
/// evaluated with the assignment above.
double wass_dual_objective(const WassProblem& problem, double beta);

/// Closed-form local minimizer of the dual on the linear segment containing
/// beta0, for the 0/1 ground metric. Throws for other metrics.
double wass_local_beta(const WassProblem& problem, double beta0);

/// Global dual solve. Under the 0/1 metric the dual is piecewise linear with
/// breakpoints exactly at the advantage gaps of states with rho(s) > 0, so
/// the candidate set {0} united with those gaps is searched exhaustively and
/// the lowest minimizing beta is returned. Other metrics fall back to a dense
/// log-spaced grid. `evaluations` reports the candidate count; `moved_mass`
/// and `boundary_tie` report the realized transport at beta_star (see
/// DualResult).
DualResult wass_solve_beta(const WassProblem& problem);

/// Transport update: pi'(a_j|s) = sum over i assigned to j of pi(a_i|s),
/// with the assignment taken at beta_star. States whose advantage row is
/// identically zero keep their distribution.
TabularPolicy wass_policy_update(const WassProblem& problem, double beta_star);

} // namespace odrpo
