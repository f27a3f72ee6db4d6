#pragma once

#include "amdp/amdp_core.hpp"

namespace amdp {

/**
 * Mirror map over the probability simplex. `negative_entropy` generates the
 * KL divergence (1-strongly convex w.r.t. the l1 norm, by Pinsker);
 * `squared_euclidean` generates half the squared l2 distance.
 */
struct BregmanGeometry {
    enum class Kind { negative_entropy, squared_euclidean };
    Kind kind = Kind::negative_entropy;

    static BregmanGeometry kl() { return {Kind::negative_entropy}; }
    static BregmanGeometry euclidean() { return {Kind::squared_euclidean}; }
};

/**
 * D(a2, a1) = omega(a1) - omega(a2) - <omega'(a2), a1 - a2>.
 *
 * Equals KL(a1 || a2) under negative entropy and 0.5 ||a1 - a2||^2 under the
 * squared euclidean map. Under KL, a zero coordinate of a2 where a1 carries
 * mass yields +infinity.
 */
[[nodiscard]] double bregman_distance(const BregmanGeometry& geometry,
                                      const Eigen::Ref<const Vector>& a2,
                                      const Eigen::Ref<const Vector>& a1);

/**
 * One per-state actor subproblem:
 *     min_{p in simplex}  <q_row, p> + h(p) + (1/eta) D(prev_policy_row, p).
 */
struct ProxProblem {
    Vector q_row;
    Vector prev_policy_row;
    double eta = 1.0;
    RegularizerSpec regularizer = RegularizerSpec::zero();
};

/// The subproblem objective at p; exposed so brute-force oracles can reuse it.
[[nodiscard]] double prox_objective(const ProxProblem& p, const BregmanGeometry& geometry,
                                    const Eigen::Ref<const Vector>& point);

/**
 * Exact minimizer under KL geometry with (optional) negative-entropy
 * regularizer of weight tau:
 *     p(a) proportional to prev(a)^{1/(1+eta*tau)} * exp(-eta*q(a)/(1+eta*tau)).
 * The result is strictly positive and sums to one. eta <= 0 is rejected;
 * eta = +infinity is accepted when tau > 0 (the softmin limit exp(-q/tau)).
 */
[[nodiscard]] Vector actor_prox_closed_form(const ProxProblem& p);

/**
 * Numerical minimizer of the same subproblem; the only path under the
 * squared-euclidean geometry and the independent oracle for the closed form.
 *
 * Quadratic case (euclidean geometry, tau = 0) is an exact sort-based simplex
 * projection of prev - eta*q; otherwise a damped reduced-space Newton method
 * drives the objective gap below 1e-12. eta = +infinity with tau = 0 under
 * the euclidean geometry returns the point mass on argmin q, lowest index
 * winning ties.
 */
[[nodiscard]] Vector actor_prox_numeric(const ProxProblem& p, const BregmanGeometry& geometry);

/**
 * Left-minus-right of the three-point inequality at the prox solution:
 *     <q,sol> + h(sol) + (1/eta) D(prev, sol) + (mu_d + 1/eta) D(sol, cmp)
 *   - [<q,cmp> + h(cmp) + (1/eta) D(prev, cmp)]
 * which is <= 0 for every comparator on the simplex whenever
 * mu_d + 1/eta >= 0. mu_d defaults to the regularizer weight (exact for
 * tabular critics).
 */
[[nodiscard]] double three_point_check(const ProxProblem& p, const BregmanGeometry& geometry,
                                       const Eigen::Ref<const Vector>& solution,
                                       const Eigen::Ref<const Vector>& comparator);

/// Euclidean projection onto the probability simplex (sort-based, exact).
[[nodiscard]] Vector project_to_simplex(const Eigen::Ref<const Vector>& x);

} // namespace amdp
