#pragma once

#include <functional>
#include <optional>

#include "amdp/amdp_core.hpp"
#include "amdp/mirror_geometry.hpp"
#include "amdp/policy_eval.hpp"

namespace amdp {

/**
 * Step-size regimes:
 *   constant_optimized    eta = sqrt(distance_estimate /
 *                             (K * (lipschitz_aggregate^2 + sigma_omega^2)))
 *   inv_mu_k              eta_k = 1 / (mu (k+1)),   beta_k = 1
 *   weighted_2_over_mu_k  eta_k = 2 / (mu (k+1)),   beta_k = k+2
 *   nonconvex_min         eta = min(|mu|/2, 1/sqrt(K))
 * The first three satisfy the telescoping condition
 *   beta_k / eta_k <= beta_{k-1} (mu + 1/eta_{k-1}),
 * which telescoping_holds verifies numerically.
 */
struct StepSchedule {
    enum class Kind { constant_optimized, inv_mu_k, weighted_2_over_mu_k, nonconvex_min };

    Kind kind = Kind::inv_mu_k;
    double mu = 0.0;
    int horizon = 0;
    double distance_estimate = 0.0;   // 0 = use log(n_actions) under KL, 1 under euclidean
    double lipschitz_aggregate = 0.0; // 0 = use span of the first exact critic call
    double sigma_omega = 0.0;

    [[nodiscard]] double eta(int k) const;
    [[nodiscard]] double beta(int k) const;
    void validate() const;
    [[nodiscard]] bool uses_betas() const { return kind != Kind::nonconvex_min; }
    [[nodiscard]] bool telescoping_holds(double tol = 1e-9) const;
};

struct SpmdIterate {
    double rho = 0.0;              // exact average cost of pi_k
    double gap = 0.0;              // rho - rho_star
    double bregman_to_star = 0.0;  // sum_s kappa*(s) D(pi_k(s), pi*(s))
    double psi_max = 0.0;          // max_s psi^{pi_k}(s, pi_{k+1}(s)), exact critic
    double psi_abs_max = 0.0;      // max_s |psi|
    double d_iter_max = 0.0;       // max_s D(pi_k(s), pi_{k+1}(s))
    double stationarity = 0.0;     // max_s [D(pi_k,pi_{k+1})/(2 eta) + (mu+1/eta) D(pi_{k+1},pi_k)]
    double eta = 0.0;
};

struct SpmdTrace {
    std::vector<SpmdIterate> iterations;
    std::uint64_t seed = 0;
    bool exact_critic = true;
    double wall_seconds = 0.0; // never serialized; reproducibility is byte-level
};

/// Critic selection for a solver run.
struct CriticSpec {
    enum class Type { exact, noisy, td };
    Type type = Type::exact;
    double bias_bound = 0.0; // noisy
    double noise_std = 0.0;  // noisy
    TdConfig td;             // td
};

/// High-precision optimum: policy, its average cost, and its stationary law.
struct Reference {
    StochasticPolicy pi_star;
    double rho_star = 0.0;
    Vector kappa_star;
};

/// Per-iteration callback; exposes the quantities the invariant suites audit.
struct SpmdIterationView {
    int k;
    double eta;
    const StochasticPolicy& pi;
    const StochasticPolicy& pi_next;
    const CriticOutput& critic;
};
using SpmdObserver = std::function<void(const SpmdIterationView&)>;

struct SpmdOptions {
    std::optional<Reference> reference; // computed on demand when absent
    SpmdObserver observer;              // optional audit hook
    bool record_trace = true;
};

/**
 * Algorithm: K iterations of critic-then-actor. The actor step solves the
 * per-state prox subproblem in ascending state order, in closed form under
 * the KL geometry and numerically otherwise. Deterministic under a fixed
 * seed. Trace diagnostics (rho, gaps, advantages) are always computed from
 * exact solves, independent of the critic the actor consumed.
 */
[[nodiscard]] std::pair<StochasticPolicy, SpmdTrace> run_spmd(
    const TabularAmdp& mdp, const RegularizerSpec& h, const BregmanGeometry& geometry,
    const StepSchedule& schedule, const CriticSpec& critic, int iterations, std::uint64_t seed,
    const SpmdOptions& options = {});

/**
 * Reference optimum. For a negative-entropy regularizer this runs relative
 * value iteration on the soft Bellman optimality operator to machine
 * precision and cross-checks against an exact mirror-descent solve
 * (inv_mu_k steps) run to psi-stationarity 1e-12; disagreement in rho beyond
 * 1e-9 raises OracleError. The unregularized case is bracketed by
 * deterministic-policy enumeration cross-checked against hard relative value
 * iteration.
 */
[[nodiscard]] Reference reference_solution(const TabularAmdp& mdp, const RegularizerSpec& h,
                                           const BregmanGeometry& geometry);

/**
 * The value-iteration half of reference_solution alone. Used where an
 * optimum is recomputed once per iteration (the IPMD trace) and the
 * mirror-descent cross-check would dominate the runtime; every entry point
 * that fixes a reference for an experiment still goes through the
 * cross-checked pair.
 */
[[nodiscard]] Reference soft_optimum_rvi(const TabularAmdp& mdp, const RegularizerSpec& h);

struct MonotonicityReport {
    bool applicable = false;    // exact-critic runs only
    bool ok = false;
    int first_violation = -1;
    double max_rho_increase = 0.0;
    double max_psi = 0.0;
};

/// Exact-case checks: rho_{k+1} <= rho_k + 1e-10 and psi <= 0 per state.
/// Noisy runs return applicable = false.
[[nodiscard]] MonotonicityReport monotonicity_check(const SpmdTrace& trace);

enum class RateModel { inv_sqrt_k, log_k_over_k, inv_k };

struct RateFit {
    double coefficient = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Least squares of y against a*m(K) + b for the chosen model m.
[[nodiscard]] RateFit fit_rate(const std::vector<double>& horizons,
                               const std::vector<double>& values, RateModel model);

/// Running-average optimality gap of each trace fitted against the model;
/// traces supply (K, mean gap) points. Needs at least three horizons.
[[nodiscard]] RateFit rate_fit(const std::vector<SpmdTrace>& traces, RateModel model);

/// (1/K) sum_k gap_k of one trace.
[[nodiscard]] double running_average_gap(const SpmdTrace& trace);

} // namespace amdp
