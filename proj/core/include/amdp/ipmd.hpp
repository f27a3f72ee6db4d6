#pragma once

#include <string>

#include "amdp/features.hpp"
#include "amdp/io.hpp"
#include "amdp/spmd.hpp"

namespace amdp {

/**
 * Linear reward model c(s,a; theta) = theta' phi(s,a) with an l2-norm
 * regularizer on the predicted reward table (weight 0.05 by default).
 */
struct RewardModel {
    Vector theta;
    FeatureTable features;
    double regularization_weight = 0.05;

    [[nodiscard]] Matrix cost_table() const { return features.cost_table(theta); }
    /// L_r: the constructive bound on ||grad_theta c||_2.
    [[nodiscard]] double gradient_bound() const { return features.gradient_bound(); }
    /// w * ||c_theta||_2 over all (s,a).
    [[nodiscard]] double regularizer_value() const;
    /// Gradient of the regularizer; zero at c_theta = 0 (a valid subgradient).
    [[nodiscard]] Vector regularizer_gradient() const;
};

/// d(s,a) = kappa(s) pi(a|s): the stationary state-action distribution.
[[nodiscard]] Matrix state_action_distribution(const TabularAmdp& mdp, const StochasticPolicy& pi);

/**
 * Solves the entropy-regularized problem under the true reward and samples
 * demonstrations from the stationary chain (the first 1000 burn-in steps are
 * discarded). Fills empirical_features from the true reward's feature map.
 */
[[nodiscard]] std::pair<StochasticPolicy, Demonstrations> generate_expert(
    const TabularAmdp& mdp, const RewardModel& true_reward, double tau, int n_samples,
    std::uint64_t rng_seed);

/**
 * Stochastic dual gradient
 *     g = mean_E[phi] - mean_pi[phi] + grad regularizer(theta),
 * with the means taken over the two sample sets.
 */
[[nodiscard]] Vector dual_gradient(const RewardModel& reward, const Demonstrations& expert,
                                   const Demonstrations& agent);

/// Same gradient with exact state-action distributions instead of samples.
[[nodiscard]] Vector dual_gradient_exact(const RewardModel& reward, const Matrix& d_expert,
                                         const Matrix& d_agent);

/**
 * Exact dual objective
 *     L(theta) = <expert feature mean, theta> - rho*(theta) + regularizer,
 * where rho*(theta) is the optimal entropy-regularized average cost under
 * c(.;theta). Its gradient (Danskin) is the exact dual gradient with
 * d_agent = d^{pi_theta}, which the finite-difference oracle verifies.
 */
[[nodiscard]] double dual_objective_exact(const TabularAmdp& mdp, const RewardModel& reward,
                                          const Eigen::Ref<const Vector>& expert_feature_mean,
                                          double tau);

/// Span seminorm over all (s,a) of (c_learned - c_true); kills constant offsets.
[[nodiscard]] double reward_recovery_error(const RewardModel& learned, const RewardModel& truth);

struct PolicyLogGap {
    double gap = 0.0;   // inf-norm of log pi_next - log pi_theta after per-state
                        // constant alignment (= half the worst per-state span)
    double bound = 0.0; // span bound: span(Q_next - Q*_theta) / (2 tau)
};

/**
 * Distance between pi_next and the optimal policy under theta, plus the
 * span-seminorm bound it must satisfy: aligning each state's log-difference
 * by its optimal constant, the residual inf-norm is at most
 * span(Q_hat - Q*_theta) / (2 tau) with Q_hat = -tau log pi_next.
 */
[[nodiscard]] PolicyLogGap policy_log_gap(const TabularAmdp& mdp, const StochasticPolicy& pi_next,
                                          const RewardModel& reward, double tau);

/// Core of policy_log_gap against a precomputed optimum.
[[nodiscard]] PolicyLogGap log_gap_against(const StochasticPolicy& pi_next,
                                           const StochasticPolicy& pi_star, const Matrix& q_star,
                                           double tau);

struct IpmdIterate {
    double dual_obj = 0.0;
    double grad_norm = 0.0;
    double policy_log_gap = 0.0;
    double log_gap_bound = 0.0;
    double reward_span_err = 0.0; // NaN when the true reward is unknown
    std::uint64_t theta_hash = 0;
};

struct IpmdTrace {
    std::vector<IpmdIterate> iterations;
    std::uint64_t seed = 0;
    int cost_clip_events = 0;
};

struct IpmdOptions {
    CriticSpec inner_critic;       // exact by default
    double inner_eta = 1.0;        // step size of the inner KL actor step
    int n_inner = 1;               // actor steps per dual iteration
    int agent_samples = 0;         // 0 = exact d^{pi_k}; otherwise sampled
    int expert_batch = 0;          // 0 = full demonstration set per iteration
    double regularization_weight = 0.05;
    double cost_clip = 1e6;        // ergodicity guard on |c(s,a;theta)|
    Vector theta0;                 // empty = zero initialization
    std::optional<RewardModel> true_reward; // enables reward_span_err in the trace
    bool record_trace = true;
};

struct IpmdResult {
    RewardModel reward;
    StochasticPolicy policy;
    IpmdTrace trace;
};

/**
 * Algorithm: K iterations of cost evaluation under theta_k, a critic step,
 * n_inner KL actor steps, and the dual update theta <- theta - alpha g with
 * alpha = alpha0 / sqrt(K). Deterministic under a fixed seed.
 */
[[nodiscard]] IpmdResult run_ipmd(const TabularAmdp& mdp, const FeatureTable& features,
                                  const Demonstrations& expert, double tau, int iterations,
                                  double alpha0, const IpmdOptions& options, std::uint64_t seed);

/// FNV-1a over the raw bytes of theta; the trace's snapshot fingerprint.
[[nodiscard]] std::uint64_t hash_theta(const Eigen::Ref<const Vector>& theta);

/**
 * Minimal-l2-norm cost table whose tau-soft-optimal policy equals pi_expert.
 *
 * The rewards explaining a fixed expert policy form an affine class
 * (per-state potentials plus a constant); this returns the representative
 * the norm-regularized dual flow targets, which makes it the natural ground
 * truth for recovery benchmarks.
 */
[[nodiscard]] Matrix min_norm_matching_cost(const TabularAmdp& mdp,
                                            const StochasticPolicy& pi_expert, double tau);

} // namespace amdp
