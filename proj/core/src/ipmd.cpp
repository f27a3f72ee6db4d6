#include "amdp/ipmd.hpp"

#include <cmath>
#include <cstring>

namespace amdp {

double RewardModel::regularizer_value() const {
    if (regularization_weight == 0.0) return 0.0;
    return regularization_weight * (features.phi * theta).norm();
}

Vector RewardModel::regularizer_gradient() const {
    if (regularization_weight == 0.0) return Vector::Zero(theta.size());
    const Vector flat = features.phi * theta;
    const double norm = flat.norm();
    if (norm < 1e-30) return Vector::Zero(theta.size());
    return regularization_weight * (features.phi.transpose() * flat) / norm;
}

Matrix state_action_distribution(const TabularAmdp& mdp, const StochasticPolicy& pi) {
    const auto stat = stationary_distribution(mdp, pi);
    return stat.kappa.asDiagonal() * pi.probs();
}

std::pair<StochasticPolicy, Demonstrations> generate_expert(const TabularAmdp& mdp,
                                                            const RewardModel& true_reward,
                                                            double tau, int n_samples,
                                                            std::uint64_t rng_seed) {
    if (!(tau > 0.0)) throw ConfigError("expert generation needs tau > 0");
    if (n_samples <= 0) throw ConfigError("expert needs a positive sample count");
    const TabularAmdp expert_mdp = mdp.with_cost(true_reward.cost_table());
    const RegularizerSpec h = RegularizerSpec::negative_entropy(tau);
    Reference ref = reference_solution(expert_mdp, h, BregmanGeometry::kl());

    constexpr int kBurnIn = 1000;
    Rng rng = make_rng(rng_seed, /*stream=*/20);
    const auto trajectory =
        sample_trajectory(expert_mdp, ref.pi_star, kBurnIn + n_samples, rng);

    Demonstrations demos;
    demos.pairs.reserve(static_cast<size_t>(n_samples));
    for (int t = kBurnIn; t < kBurnIn + n_samples; ++t)
        demos.pairs.emplace_back(trajectory[static_cast<size_t>(t)].s,
                                 trajectory[static_cast<size_t>(t)].a);
    demos.source = DemoSource{"theta_hash:" + std::to_string(hash_theta(true_reward.theta)),
                              1e-13, rng_seed};
    demos.empirical_features = feature_mean(true_reward.features, demos.pairs);
    return {std::move(ref.pi_star), std::move(demos)};
}

Vector dual_gradient(const RewardModel& reward, const Demonstrations& expert,
                     const Demonstrations& agent) {
    if (expert.pairs.empty() || agent.pairs.empty())
        throw DataError("dual gradient needs nonempty expert and agent sample sets");
    const Vector mean_e = feature_mean(reward.features, expert.pairs);
    const Vector mean_pi = feature_mean(reward.features, agent.pairs);
    return mean_e - mean_pi + reward.regularizer_gradient();
}

namespace {

Vector distribution_feature_mean(const FeatureTable& features, const Matrix& d) {
    if (d.rows() != features.n_states || d.cols() != features.n_actions)
        throw DimensionError("state-action distribution shape does not match features");
    Vector mean = Vector::Zero(features.dim());
    for (int s = 0; s < features.n_states; ++s)
        for (int a = 0; a < features.n_actions; ++a) mean += d(s, a) * features.row(s, a);
    return mean;
}

} // namespace

Vector dual_gradient_exact(const RewardModel& reward, const Matrix& d_expert,
                           const Matrix& d_agent) {
    return distribution_feature_mean(reward.features, d_expert) -
           distribution_feature_mean(reward.features, d_agent) + reward.regularizer_gradient();
}

double dual_objective_exact(const TabularAmdp& mdp, const RewardModel& reward,
                            const Eigen::Ref<const Vector>& expert_feature_mean, double tau) {
    if (!(tau > 0.0)) throw ConfigError("the dual objective needs tau > 0");
    const TabularAmdp themed = mdp.with_cost(reward.cost_table());
    const RegularizerSpec h = RegularizerSpec::negative_entropy(tau);
    // Called inside finite-difference loops; the value-iteration path alone
    // keeps the oracle cheap and is itself validated against the
    // mirror-descent route by reference_solution's users.
    const Reference ref = soft_optimum_rvi(themed, h);
    return expert_feature_mean.dot(reward.theta) - ref.rho_star + reward.regularizer_value();
}

double reward_recovery_error(const RewardModel& learned, const RewardModel& truth) {
    const Matrix diff = learned.cost_table() - truth.cost_table();
    return span_seminorm(diff);
}

PolicyLogGap log_gap_against(const StochasticPolicy& pi_next, const StochasticPolicy& pi_star,
                             const Matrix& q_star, double tau) {
    const int S = pi_next.n_states();
    const int A = pi_next.n_actions();
    // Q generating pi_next as its Boltzmann policy.
    Matrix q_hat(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            q_hat(s, a) = -tau * std::log(std::max(pi_next(s, a), 1e-300));

    PolicyLogGap out;
    double worst_state_span = 0.0;
    for (int s = 0; s < S; ++s) {
        Vector log_diff(A);
        for (int a = 0; a < A; ++a)
            log_diff[a] = std::log(std::max(pi_next(s, a), 1e-300)) -
                          std::log(std::max(pi_star(s, a), 1e-300));
        worst_state_span = std::max(worst_state_span, span_seminorm(log_diff));
    }
    out.gap = 0.5 * worst_state_span;
    out.bound = span_seminorm(Matrix(q_hat - q_star)) / (2.0 * tau);
    return out;
}

PolicyLogGap policy_log_gap(const TabularAmdp& mdp, const StochasticPolicy& pi_next,
                            const RewardModel& reward, double tau) {
    if (!(tau > 0.0)) throw ConfigError("policy_log_gap needs tau > 0");
    const TabularAmdp themed = mdp.with_cost(reward.cost_table());
    const RegularizerSpec h = RegularizerSpec::negative_entropy(tau);
    const Reference ref = reference_solution(themed, h, BregmanGeometry::kl());
    const DifferentialValues dv_star = differential_values(themed, ref.pi_star, h);
    return log_gap_against(pi_next, ref.pi_star, dv_star.q, tau);
}

Matrix min_norm_matching_cost(const TabularAmdp& mdp, const StochasticPolicy& pi_expert,
                              double tau) {
    if (!(tau > 0.0)) throw ConfigError("min_norm_matching_cost needs tau > 0");
    if (!pi_expert.strictly_positive())
        throw ModelError("the expert policy must be strictly positive");
    const int S = mdp.n_states();
    const int A = mdp.n_actions();

    // Every cost with soft-optimal policy pi_expert takes the form
    //   c(s,a) = b(s,a) + g(s) - sum_s' P(s'|s,a) g(s') + r,
    // where b comes from Q = -tau log pi_expert + g and the evaluation
    // identities. Minimize ||c||_2 over (g, r).
    Vector entropy(S);
    for (int s = 0; s < S; ++s) {
        double h = 0.0;
        for (int a = 0; a < A; ++a) h -= pi_expert(s, a) * std::log(pi_expert(s, a));
        entropy[s] = h;
    }
    Matrix base(S, A);
    for (int a = 0; a < A; ++a)
        for (int s = 0; s < S; ++s)
            base(s, a) = -tau * std::log(pi_expert(s, a)) + tau * entropy[s] -
                         tau * mdp.transition(a).row(s).dot(entropy);

    Matrix design(S * A, S + 1);
    Vector rhs(S * A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const int row = s * A + a;
            for (int sn = 0; sn < S; ++sn)
                design(row, sn) = (sn == s ? 1.0 : 0.0) - mdp.transition(a)(s, sn);
            design(row, S) = 1.0;
            rhs[row] = -base(s, a);
        }
    }
    const Vector solution = design.colPivHouseholderQr().solve(rhs);
    Matrix cost(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            cost(s, a) = base(s, a) + design.row(s * A + a).dot(solution);
    return cost;
}

std::uint64_t hash_theta(const Eigen::Ref<const Vector>& theta) {
    std::uint64_t hash = 14695981039346656037ull;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        std::uint64_t bits = 0;
        const double value = theta[i];
        std::memcpy(&bits, &value, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            hash ^= (bits >> (8 * b)) & 0xffull;
            hash *= 1099511628211ull;
        }
    }
    return hash;
}

IpmdResult run_ipmd(const TabularAmdp& mdp, const FeatureTable& features,
                    const Demonstrations& expert, double tau, int iterations, double alpha0,
                    const IpmdOptions& options, std::uint64_t seed) {
    if (!(tau > 0.0)) throw ConfigError("IPMD needs tau > 0");
    if (!(alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
    if (iterations <= 0) throw ConfigError("IPMD needs a positive iteration count");
    if (expert.pairs.empty()) throw DataError("IPMD received an empty demonstration set");
    if (features.n_states != mdp.n_states() || features.n_actions != mdp.n_actions())
        throw DimensionError("feature table shape does not match the MDP");

    const RegularizerSpec h = RegularizerSpec::negative_entropy(tau);
    const double alpha = alpha0 / std::sqrt(static_cast<double>(iterations));

    RewardModel reward{options.theta0.size() > 0 ? options.theta0 : Vector::Zero(features.dim()),
                       features, options.regularization_weight};
    if (reward.theta.size() != features.dim())
        throw DimensionError("theta0 length does not match the feature dimension");
    StochasticPolicy pi = StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions());

    const Vector expert_mean = feature_mean(features, expert.pairs);
    Rng batch_rng = make_rng(seed, /*stream=*/30);
    Rng agent_rng = make_rng(seed, /*stream=*/31);

    IpmdTrace trace;
    trace.seed = seed;
    trace.iterations.reserve(static_cast<size_t>(iterations));

    for (int k = 0; k < iterations; ++k) {
        // Cost evaluation under theta_k, clipped to preserve solvability.
        Matrix cost_k = reward.cost_table();
        int clipped = 0;
        for (int s = 0; s < mdp.n_states(); ++s) {
            for (int a = 0; a < mdp.n_actions(); ++a) {
                if (std::abs(cost_k(s, a)) > options.cost_clip) {
                    cost_k(s, a) = std::copysign(options.cost_clip, cost_k(s, a));
                    ++clipped;
                }
            }
        }
        trace.cost_clip_events += clipped;
        const TabularAmdp themed = mdp.with_cost(cost_k);

        // Critic + inner actor step(s).
        CriticOutput critic;
        StochasticPolicy pi_next = pi;
        for (int inner = 0; inner < std::max(options.n_inner, 1); ++inner) {
            switch (options.inner_critic.type) {
            case CriticSpec::Type::exact:
                critic = exact_critic(themed, pi_next, h);
                break;
            case CriticSpec::Type::noisy:
                critic = noisy_critic(themed, pi_next, h, options.inner_critic.bias_bound,
                                      options.inner_critic.noise_std,
                                      mix64(seed) + static_cast<std::uint64_t>(k));
                break;
            case CriticSpec::Type::td:
                critic = td_critic(themed, pi_next, h, options.inner_critic.td,
                                   mix64(seed) + static_cast<std::uint64_t>(k));
                break;
            }
            Matrix next(pi.n_states(), pi.n_actions());
            for (int s = 0; s < mdp.n_states(); ++s) {
                ProxProblem prox{critic.q.row(s).transpose(), pi_next.row(s), options.inner_eta,
                                 h};
                next.row(s) = actor_prox_closed_form(prox).transpose();
            }
            pi_next = StochasticPolicy(std::move(next));
        }

        // Dual gradient from expert and agent feature means.
        Vector mean_e;
        if (options.expert_batch > 0 &&
            options.expert_batch < static_cast<int>(expert.pairs.size())) {
            std::vector<std::pair<int, int>> batch;
            batch.reserve(static_cast<size_t>(options.expert_batch));
            for (int i = 0; i < options.expert_batch; ++i) {
                const size_t idx = static_cast<size_t>(uniform01(batch_rng) *
                                                       static_cast<double>(expert.pairs.size()));
                batch.push_back(expert.pairs[std::min(idx, expert.pairs.size() - 1)]);
            }
            mean_e = feature_mean(features, batch);
        } else {
            mean_e = expert_mean;
        }

        Vector mean_pi;
        if (options.agent_samples > 0) {
            constexpr int kAgentBurnIn = 100;
            const auto traj = sample_trajectory(themed, pi_next,
                                                kAgentBurnIn + options.agent_samples, agent_rng);
            std::vector<std::pair<int, int>> pairs;
            pairs.reserve(static_cast<size_t>(options.agent_samples));
            for (int t = kAgentBurnIn; t < kAgentBurnIn + options.agent_samples; ++t)
                pairs.emplace_back(traj[static_cast<size_t>(t)].s, traj[static_cast<size_t>(t)].a);
            mean_pi = feature_mean(features, pairs);
        } else {
            mean_pi = distribution_feature_mean(features, state_action_distribution(mdp, pi_next));
        }

        const Vector g = mean_e - mean_pi + reward.regularizer_gradient();

        if (options.record_trace) {
            // One value-iteration solve per iteration feeds all diagnostics;
            // the cross-checked reference pair is exercised by the callers
            // that fix a reference once (generate_expert, the test suites).
            const Reference ref_k = soft_optimum_rvi(themed, h);
            const DifferentialValues dv_star = differential_values(themed, ref_k.pi_star, h);
            IpmdIterate it;
            it.grad_norm = g.norm();
            it.dual_obj = expert_mean.dot(reward.theta) - ref_k.rho_star +
                          reward.regularizer_value();
            const PolicyLogGap gap = log_gap_against(pi_next, ref_k.pi_star, dv_star.q, tau);
            it.policy_log_gap = gap.gap;
            it.log_gap_bound = gap.bound;
            it.reward_span_err = options.true_reward
                                     ? reward_recovery_error(reward, *options.true_reward)
                                     : std::numeric_limits<double>::quiet_NaN();
            it.theta_hash = hash_theta(reward.theta);
            trace.iterations.push_back(it);
        }

        reward.theta -= alpha * g;
        pi = std::move(pi_next);
    }

    return IpmdResult{std::move(reward), std::move(pi), std::move(trace)};
}

} // namespace amdp
