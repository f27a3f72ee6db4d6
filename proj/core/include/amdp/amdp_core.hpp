#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "amdp/errors.hpp"
#include "amdp/rng.hpp"

namespace amdp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Row-sum tolerance for probability tables.
inline constexpr double kRowSumTol = 1e-12;
/// Fixed-point tolerance for stationary distributions.
inline constexpr double kStationaryTol = 1e-10;
/// Max-norm tolerance for the Bellman/Poisson residuals.
inline constexpr double kBellmanTol = 1e-9;

/**
 * Convex per-state policy regularizer h.
 *
 * `negative_entropy` with weight tau evaluates
 *     h(s) = tau * sum_a pi(a|s) * log pi(a|s),
 * which is convex in the policy row with strong-convexity modulus tau under
 * the KL geometry. `zero` is the unregularized case.
 */
struct RegularizerSpec {
    enum class Kind { zero, negative_entropy };

    Kind kind = Kind::zero;
    double weight = 0.0;

    static RegularizerSpec zero() { return {Kind::zero, 0.0}; }

    static RegularizerSpec negative_entropy(double tau) {
        if (!(tau >= 0.0)) throw ConfigError("regularizer weight must be >= 0");
        return {Kind::negative_entropy, tau};
    }

    /// h evaluated at a single policy row (0*log 0 taken as 0).
    [[nodiscard]] double evaluate(const Eigen::Ref<const Vector>& policy_row) const;

    [[nodiscard]] bool is_zero() const { return kind == Kind::zero || weight == 0.0; }
};

/// Per-state probability distribution over actions; rows sum to one.
class StochasticPolicy {
public:
    explicit StochasticPolicy(Matrix probs);

    static StochasticPolicy uniform(int n_states, int n_actions);
    /// Point-mass policy; `actions[s]` is the chosen action in state s.
    static StochasticPolicy deterministic(int n_states, int n_actions,
                                          const std::vector<int>& actions);
    static StochasticPolicy random(int n_states, int n_actions, Rng& rng);

    [[nodiscard]] int n_states() const { return static_cast<int>(probs_.rows()); }
    [[nodiscard]] int n_actions() const { return static_cast<int>(probs_.cols()); }
    [[nodiscard]] const Matrix& probs() const { return probs_; }
    [[nodiscard]] Vector row(int s) const { return probs_.row(s).transpose(); }
    [[nodiscard]] double operator()(int s, int a) const { return probs_(s, a); }

    /// True when every entry is strictly positive (required under KL geometry).
    [[nodiscard]] bool strictly_positive() const { return probs_.minCoeff() > 0.0; }

private:
    Matrix probs_;
};

/**
 * Finite average-reward MDP: the tuple (S, A, P, c).
 *
 * The transition tensor is stored action-major: transition()[a] is the S x S
 * row-stochastic matrix with entry (s, s') = P(s' | s, a). Costs are an
 * S x A table. Instances are immutable after construction and validated on
 * construction (row sums within 1e-12, nonnegative probabilities, finite
 * costs).
 */
class TabularAmdp {
public:
    TabularAmdp(std::vector<Matrix> transition, Matrix cost);

    [[nodiscard]] int n_states() const { return static_cast<int>(cost_.rows()); }
    [[nodiscard]] int n_actions() const { return static_cast<int>(cost_.cols()); }
    [[nodiscard]] const std::vector<Matrix>& transition() const { return transition_; }
    [[nodiscard]] const Matrix& transition(int a) const { return transition_[static_cast<size_t>(a)]; }
    [[nodiscard]] const Matrix& cost() const { return cost_; }
    [[nodiscard]] double cost(int s, int a) const { return cost_(s, a); }

    /// Same dynamics with a different cost table.
    [[nodiscard]] TabularAmdp with_cost(Matrix cost) const;

private:
    std::vector<Matrix> transition_; // [a](s, s')
    Matrix cost_;                    // (s, a)
};

/// Stationary distribution of a policy-induced chain plus the Gamma surrogate
/// 1 - min_s kappa(s).
struct StationaryDistribution {
    Vector kappa;
    double gamma_gap = 0.0;
};

/**
 * Bias (differential value) functions solved against average cost rho.
 *
 * Normalization convention: sum_s kappa(s) v(s) = 0, which selects the basic
 * bias out of the family that is unique up to an additive constant.
 */
struct DifferentialValues {
    Vector v;   // state bias
    Matrix q;   // state-action bias
    double rho; // average cost the system was solved against
};

/// P_pi(s, s') = sum_a pi(a|s) P(s'|s, a).
[[nodiscard]] Matrix policy_transition_matrix(const TabularAmdp& mdp, const StochasticPolicy& pi);

/**
 * Unique stationary distribution of a row-stochastic matrix.
 *
 * Primary path is a dense least-squares solve of (kappa' (P - I) = 0,
 * sum kappa = 1); falls back to power iteration (cap 1e5, tolerance 1e-12)
 * if the dense residual fails the 1e-10 contract. Reducible or otherwise
 * non-ergodic chains raise ErgodicityError naming the offending structure.
 */
[[nodiscard]] StationaryDistribution stationary_distribution(const Matrix& p_pi);

[[nodiscard]] StationaryDistribution stationary_distribution(const TabularAmdp& mdp,
                                                             const StochasticPolicy& pi);

/// Per-state regularizer values h(s) for the given policy.
[[nodiscard]] Vector regularizer_values(const StochasticPolicy& pi, const RegularizerSpec& h);

/// rho = sum_s kappa(s) [ sum_a pi(a|s) c(s,a) + h(s) ].
[[nodiscard]] double average_cost(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                  const RegularizerSpec& h);

/**
 * Exact solve of the Poisson/Bellman system:
 *     q(s,a) = c(s,a) + h(s) - rho + sum_{s'} P(s'|s,a) v(s'),
 *     v(s)   = sum_a pi(a|s) q(s,a),
 * with the kappa-weighted zero-mean convention on v. Residuals above 1e-9
 * raise NumericalError.
 */
[[nodiscard]] DifferentialValues differential_values(const TabularAmdp& mdp,
                                                     const StochasticPolicy& pi,
                                                     const RegularizerSpec& h);

/**
 * Generalized advantage of pi_next against pi:
 *     psi(s) = sum_a pi_next(a|s) q^pi(s,a) - v^pi(s) + h^{pi_next}(s) - h^{pi}(s).
 */
[[nodiscard]] Vector advantage(const TabularAmdp& mdp, const StochasticPolicy& pi,
                               const StochasticPolicy& pi_next, const RegularizerSpec& h);

/// Same, reusing an already-solved critic for pi.
[[nodiscard]] Vector advantage_from(const DifferentialValues& dv, const StochasticPolicy& pi,
                                    const StochasticPolicy& pi_next, const RegularizerSpec& h);

/**
 * Residual of the performance-difference identity
 *     rho^{pi'} - rho^{pi} = sum_s kappa^{pi'}(s) psi^{pi}(s, pi'(s)).
 * Both sides are computed independently; the result is their absolute gap.
 */
[[nodiscard]] double performance_difference_check(const TabularAmdp& mdp,
                                                  const StochasticPolicy& pi,
                                                  const StochasticPolicy& pi_next,
                                                  const RegularizerSpec& h);

/// One trajectory step: state, action, bare cost, successor state.
struct TransitionSample {
    int s;
    int a;
    double c;
    int s_next;
};

/// Simulates n steps of the chain under pi starting from `start` (default 0).
[[nodiscard]] std::vector<TransitionSample> sample_trajectory(const TabularAmdp& mdp,
                                                              const StochasticPolicy& pi, int n,
                                                              Rng& rng, int start = 0);

} // namespace amdp
