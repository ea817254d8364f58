#pragma once

#include "odrpo/types.hpp"

namespace odrpo {

/// One KL trust-region instance: maximize the rho-weighted expected advantage
/// over policies whose rho-weighted KL to `policy` is at most `delta`.
struct KlProblem {
    VisitationWeights rho;
    TabularPolicy policy;
    AdvantageEstimate advantages;
    double delta = 0.0;
};

/// Throws unless dimensions agree, delta > 0 and rho is normalized.
void validate_kl_problem(const KlProblem& problem);

struct KlBetaBounds {
    double beta_min = 0.0;
    double beta_max = 0.0;
};

/// Search domain for the dual variable. Below beta_min the update is
/// numerically the argmax policy; above beta_max the constraint is slack far
/// beyond delta.
KlBetaBounds kl_beta_bounds(const KlProblem& problem);

/// Dual objective
///   beta*delta + sum_s rho(s) * beta * log sum_a pi(a|s) exp(A(s,a)/beta),
/// evaluated in shifted log-sum-exp form with the per-state max taken over
/// the support of pi(.|s). At beta = 0 returns the limit
/// sum_s rho(s) * max_{a: pi(a|s)>0} A(s,a).
double kl_dual_objective(const KlProblem& problem, double beta);

/// Analytic derivative of the dual objective, beta > 0. Equals
/// delta - E_rho[KL(pi_beta || pi)] where pi_beta is the reweighted policy at
/// temperature beta, so its sign locates the feasibility boundary.
double kl_dual_gradient(const KlProblem& problem, double beta);

struct KlSolverConfig {
    int hops = 10;
    double hop_factor_min = 0.2;
    double hop_factor_max = 5.0;
    double beta_tol_rel = 1e-13;
    std::uint64_t seed = 0;
};

/// Global minimizer of the dual objective over [beta_min, beta_max].
/// The local phase brackets a sign change of the gradient and bisects it
/// (the dual is convex in beta); the hop phase perturbs the incumbent
/// multiplicatively and re-descends, accepting strict improvements only.
DualResult kl_solve_beta(const KlProblem& problem, const KlSolverConfig& config = {});

/// Closed-form update: pi'(a|s) proportional to pi(a|s) * exp(A(s,a)/beta).
/// At beta_star = 0 the limit concentrates mass on the argmax advantages
/// within the support of pi(.|s), proportionally to pi there. All states are
/// updated, including those with rho(s) = 0.
TabularPolicy kl_policy_update(const KlProblem& problem, double beta_star);

} // namespace odrpo
