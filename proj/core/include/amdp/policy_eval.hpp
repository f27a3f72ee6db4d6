#pragma once

#include <optional>

#include "amdp/amdp_core.hpp"

namespace amdp {

/// Synthetic error descriptor: deterministic bias span bound and stochastic
/// standard deviation per entry.
struct NoiseSpec {
    double bias_bound = 0.0;
    double noise_std = 0.0;
};

/**
 * Critic result: a differential-Q estimate and an average-cost estimate.
 * When `noise` is absent the estimate is exact (Bellman residual <= 1e-9).
 */
struct CriticOutput {
    Matrix q;
    double rho = 0.0;
    std::optional<NoiseSpec> noise;
};

/// max(v) - min(v); zero iff v is constant. Empty input raises DimensionError.
[[nodiscard]] double span_seminorm(const Vector& v);
/// Span over every entry of a table.
[[nodiscard]] double span_seminorm(const Matrix& table);

/// Exact critic; delegates to differential_values.
[[nodiscard]] CriticOutput exact_critic(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                        const RegularizerSpec& h);

/**
 * Exact critic plus a seeded deterministic perturbation of span exactly
 * `bias_bound` (zero-midrange pattern, reproducible for a given seed) plus
 * zero-mean gaussian noise of standard deviation `noise_std` per entry.
 */
[[nodiscard]] CriticOutput noisy_critic(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                        const RegularizerSpec& h, double bias_bound,
                                        double noise_std, std::uint64_t rng_seed);

struct TdConfig {
    int n_samples = 100000;
    int batch_size = 64;
    double learning_rate = 0.05;
    int epochs = 4;
};

/**
 * Tabular TD critic: stochastic semi-gradient descent on the TD objective
 *     ( c(s,a) + h_sample - rho_batch + q(s',a') - q(s,a) )^2
 * with rho_batch the batch average of c + h_sample, over trajectories drawn
 * from the chain under pi. h_sample = tau*log pi(a|s) is the per-sample
 * regularizer estimate. Reproducible under a fixed seed. Divergence (mean
 * TD error growing tenfold across epochs) raises NumericalError.
 * The returned noise descriptor carries the achieved Bellman residual.
 */
[[nodiscard]] CriticOutput td_critic(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                     const RegularizerSpec& h, const TdConfig& config,
                                     std::uint64_t rng_seed);

/**
 * Fixed-policy Bellman operator on state-action tables,
 *     (T q)(s,a) = c(s,a) + h(s) - rho + sum_{s',a'} P(s'|s,a) pi(a'|s') q(s',a'),
 * applied j_steps times. Its fixed point is the differential Q-function, and
 * it contracts the span seminorm at the rate certified by
 * contraction_coefficient.
 */
class SpanOperator {
public:
    SpanOperator(const TabularAmdp& mdp, const StochasticPolicy& pi, const RegularizerSpec& h,
                 int j_steps);

    [[nodiscard]] Matrix apply(const Matrix& q) const;
    [[nodiscard]] int j_steps() const { return j_steps_; }
    /// One-step state-action kernel P_pi((s',a') | (s,a)), an SA x SA matrix
    /// with flat index s * n_actions + a.
    [[nodiscard]] const Matrix& state_action_kernel() const { return kernel_; }

private:
    Matrix cost_term_; // c(s,a) + h(s) - rho
    Matrix kernel_;
    int n_states_;
    int n_actions_;
    int j_steps_;
};

[[nodiscard]] Matrix bellman_operator_apply(const SpanOperator& op, const Matrix& q);

/**
 * Span contraction coefficient of the J-step state-action kernel:
 *     gamma = 1 - min over row pairs of sum_t min(K_J(row1, t), K_J(row2, t)).
 * gamma = 1 (no contraction) is a valid answer.
 */
[[nodiscard]] double contraction_coefficient(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                             int j_steps);

/// Overload on a prebuilt one-step kernel.
[[nodiscard]] double contraction_coefficient(const Matrix& one_step_kernel, int j_steps);

/**
 * Smallest J <= n_states*n_actions with gamma(J) <= threshold; ergodicity
 * guarantees existence. Exceeding the cap raises NumericalError.
 */
[[nodiscard]] int find_contractive_j(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                     double threshold = 0.9);

} // namespace amdp
