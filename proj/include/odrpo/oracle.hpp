#pragma once

#include "odrpo/dro_kl.hpp"
#include "odrpo/dro_wass.hpp"
#include "odrpo/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace odrpo {

/// Deterministic generator of small random trust-region instances. Generated
/// policy rows are strictly positive; some states are left unvisited (zero
/// visitation weight and a zero advantage row) and a few visited pairs get a
/// zero advantage, mirroring what the estimation pipeline produces.
struct InstanceGenerator {
    int max_states = 6;
    int max_actions = 6;
    double advantage_lo = -1.0;
    double advantage_hi = 1.0;
    std::vector<double> delta_choices{0.01, 0.1, 0.5};
    std::uint64_t seed = 0;

    struct Instance {
        VisitationWeights rho;
        TabularPolicy policy;
        AdvantageEstimate advantages;
        double delta = 0.0;
    };

    /// The index-th instance; independent of any other index.
    Instance make(int index) const;
};

KlProblem to_kl_problem(const InstanceGenerator::Instance& instance);
WassProblem to_wass_problem(const InstanceGenerator::Instance& instance);

/// Exhaustive 1-D search for the KL dual: minimizes kl_dual_objective over a
/// nested log-spaced grid on [beta_min, beta_max] plus the beta = 0 limit.
/// Doubling grid_points refines the same grid, so the minimum is monotone.
std::pair<double, double> kl_grid_oracle(const KlProblem& problem, int grid_points);

/// Independent evaluation of the Wasserstein dual at one beta: a direct
/// argmax sweep, sharing no code with the solver path.
double wass_dual_reference(const WassProblem& problem, double beta);

/// Exhaustive search for the Wasserstein dual: wass_dual_reference over a
/// nested linear grid on [0, max gap] together with independently recomputed
/// breakpoints.
std::pair<double, double> wass_grid_oracle(const WassProblem& problem, int grid_points);

/// Minimum of the Wasserstein dual over the closed linear segment of
/// breakpoints containing beta0, computed from the reference evaluation.
double wass_segment_minimum(const WassProblem& problem, double beta0, int grid_points);

enum class MetricKind { kKl, kWass01 };

/// Empirical optimality witness: draws random feasible policies around the
/// reference policy (perturb, project to the simplex, accept iff within the
/// trust region) and reports true iff none beats the candidate's surrogate
/// objective by more than 1e-7. Aborts if the rejection rate exceeds 99.9%.
bool primal_feasible_dominance(const VisitationWeights& rho, const TabularPolicy& reference,
                               const AdvantageEstimate& advantages, double delta,
                               MetricKind metric, const TabularPolicy& candidate, int samples,
                               RngStream& rng);

/// dual_value minus the candidate's surrogate objective; non-negative up to
/// numerical error whenever the candidate is feasible.
double duality_gap(const VisitationWeights& rho, const AdvantageEstimate& advantages,
                   const TabularPolicy& policy, double dual_value);

/// Euclidean projection of a vector onto the probability simplex.
std::vector<double> project_to_simplex(std::vector<double> v);

struct VerifyOptions {
    int grid_points = 20000;
    double gap_rel_tol = 1e-6;
    double grid_agreement_tol = 1e-8;
    double primal_gain_tol = 1e-10;
    double prop7_tol = 1e-8;
    bool inject_bug = false; // negative control: perturbs beta_star by 10%
};

struct VerifyReport {
    int instances = 0;
    double max_gap_rel = 0.0;
    double max_constraint_excess = 0.0; // max over instances of constraint - delta*(1+1e-6) - 1e-9
    double min_primal_gain = 0.0;
    double max_grid_excess = 0.0; // max of solver dual - grid oracle dual
    int prop7_checked = 0;
    int prop7_failures = 0;
    int boundary_ties = 0;
    bool ok = true;
    std::string failure_description; // first failing check, with the instance serialized
};

/// Runs both solvers plus every oracle check over `count` generated
/// instances. This is the programmatic core of the verify command.
VerifyReport run_verification(const InstanceGenerator& generator, int count,
                              const VerifyOptions& options = {});

} // namespace odrpo
