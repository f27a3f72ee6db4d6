#include "amdp/policy_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace amdp {

double span_seminorm(const Vector& v) {
    if (v.size() == 0) throw DimensionError("span of an empty vector");
    if (!v.allFinite()) throw NumericalError("span of a non-finite vector");
    return v.maxCoeff() - v.minCoeff();
}

double span_seminorm(const Matrix& table) {
    if (table.size() == 0) throw DimensionError("span of an empty table");
    if (!table.allFinite()) throw NumericalError("span of a non-finite table");
    return table.maxCoeff() - table.minCoeff();
}

CriticOutput exact_critic(const TabularAmdp& mdp, const StochasticPolicy& pi,
                          const RegularizerSpec& h) {
    auto dv = differential_values(mdp, pi, h);
    return CriticOutput{std::move(dv.q), dv.rho, std::nullopt};
}

CriticOutput noisy_critic(const TabularAmdp& mdp, const StochasticPolicy& pi,
                          const RegularizerSpec& h, double bias_bound, double noise_std,
                          std::uint64_t rng_seed) {
    if (bias_bound < 0.0 || noise_std < 0.0)
        throw ConfigError("noise magnitudes must be nonnegative");
    CriticOutput out = exact_critic(mdp, pi, h);
    const int S = mdp.n_states();
    const int A = mdp.n_actions();

    if (bias_bound > 0.0) {
        // Fixed pattern with zero midrange and unit span, scaled to the bound.
        Rng pattern_rng = make_rng(rng_seed, /*stream=*/1);
        Matrix pattern(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) pattern(s, a) = 2.0 * uniform01(pattern_rng) - 1.0;
        const double lo = pattern.minCoeff();
        const double hi = pattern.maxCoeff();
        if (hi > lo) {
            pattern.array() -= 0.5 * (hi + lo);
            pattern.array() /= (hi - lo);
        }
        out.q += bias_bound * pattern;
    }
    if (noise_std > 0.0) {
        Rng noise_rng = make_rng(rng_seed, /*stream=*/2);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) out.q(s, a) += noise_std * normal(noise_rng);
    }
    out.noise = NoiseSpec{bias_bound, noise_std};
    return out;
}

CriticOutput td_critic(const TabularAmdp& mdp, const StochasticPolicy& pi,
                       const RegularizerSpec& h, const TdConfig& config, std::uint64_t rng_seed) {
    if (config.n_samples <= 1 || config.batch_size <= 0 || config.epochs <= 0)
        throw ConfigError("TD critic needs positive sample, batch, and epoch counts");
    if (!(config.learning_rate > 0.0)) throw ConfigError("TD learning rate must be positive");

    const double tau = h.is_zero() ? 0.0 : h.weight;
    Rng traj_rng = make_rng(rng_seed, /*stream=*/3);
    const auto trajectory = sample_trajectory(mdp, pi, config.n_samples, traj_rng);

    // SARSA tuples: next action comes from the following trajectory entry.
    const int n_tuples = config.n_samples - 1;
    std::vector<double> reg_cost(static_cast<size_t>(n_tuples));
    for (int t = 0; t < n_tuples; ++t) {
        const auto& tr = trajectory[static_cast<size_t>(t)];
        const double h_sample = tau > 0.0 ? tau * std::log(std::max(pi(tr.s, tr.a), 1e-300)) : 0.0;
        reg_cost[static_cast<size_t>(t)] = tr.c + h_sample;
    }

    Matrix q = Matrix::Zero(mdp.n_states(), mdp.n_actions());
    Matrix q_avg = Matrix::Zero(mdp.n_states(), mdp.n_actions());
    long averaged_updates = 0;
    Rng shuffle_rng = make_rng(rng_seed, /*stream=*/4);
    std::vector<int> order(static_cast<size_t>(n_tuples));
    std::iota(order.begin(), order.end(), 0);

    const long total_updates = static_cast<long>(config.epochs) * n_tuples;
    long update = 0;
    double first_epoch_error = -1.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Fisher-Yates with our own uniform draws keeps runs reproducible.
        for (int i = n_tuples - 1; i > 0; --i) {
            const int j = static_cast<int>(uniform01(shuffle_rng) * (i + 1));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(std::min(j, i))]);
        }
        double abs_error_sum = 0.0;
        int count = 0;
        for (int begin = 0; begin < n_tuples; begin += config.batch_size) {
            const int end = std::min(begin + config.batch_size, n_tuples);
            double rho_batch = 0.0;
            for (int i = begin; i < end; ++i)
                rho_batch += reg_cost[static_cast<size_t>(order[static_cast<size_t>(i)])];
            rho_batch /= static_cast<double>(end - begin);
            for (int i = begin; i < end; ++i) {
                const int t = order[static_cast<size_t>(i)];
                const auto& tr = trajectory[static_cast<size_t>(t)];
                const auto& next = trajectory[static_cast<size_t>(t) + 1];
                const double target =
                    reg_cost[static_cast<size_t>(t)] - rho_batch + q(next.s, next.a);
                const double delta = target - q(tr.s, tr.a);
                const double lr = config.learning_rate /
                                  (1.0 + 3.0 * static_cast<double>(update) / total_updates);
                q(tr.s, tr.a) += lr * delta;
                abs_error_sum += std::abs(delta);
                ++count;
                ++update;
                // Polyak tail average over the second half of the schedule
                // strips the constant-step noise floor.
                if (2 * update >= total_updates) {
                    q_avg += q;
                    ++averaged_updates;
                }
            }
        }
        const double epoch_error = abs_error_sum / std::max(count, 1);
        if (epoch == 0) {
            first_epoch_error = epoch_error;
        } else if (epoch_error > 10.0 * first_epoch_error && epoch_error > 1e-6) {
            throw NumericalError("TD critic diverged (epoch mean |delta| grew tenfold); "
                                 "try a smaller learning rate");
        }
    }
    if (averaged_updates > 0) q = q_avg / static_cast<double>(averaged_updates);

    // Achieved residual against the one-step operator with the buffer-average rho.
    const double rho_hat =
        std::accumulate(reg_cost.begin(), reg_cost.end(), 0.0) / static_cast<double>(n_tuples);
    const Vector h_vals = regularizer_values(pi, h);
    Matrix tq(mdp.n_states(), mdp.n_actions());
    const Vector v_of_q = (q.array() * pi.probs().array()).rowwise().sum();
    for (int a = 0; a < mdp.n_actions(); ++a)
        tq.col(a) = mdp.cost().col(a) + h_vals - Vector::Constant(mdp.n_states(), rho_hat) +
                    mdp.transition(a) * v_of_q;
    const double residual = span_seminorm(Matrix(tq - q));

    CriticOutput out;
    out.q = std::move(q);
    out.rho = rho_hat;
    out.noise = NoiseSpec{residual, 0.0};
    return out;
}

namespace {

Matrix build_state_action_kernel(const TabularAmdp& mdp, const StochasticPolicy& pi) {
    const int S = mdp.n_states();
    const int A = mdp.n_actions();
    Matrix kernel(S * A, S * A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int sn = 0; sn < S; ++sn)
                for (int an = 0; an < A; ++an)
                    kernel(s * A + a, sn * A + an) = mdp.transition(a)(s, sn) * pi(sn, an);
    return kernel;
}

} // namespace

SpanOperator::SpanOperator(const TabularAmdp& mdp, const StochasticPolicy& pi,
                           const RegularizerSpec& h, int j_steps)
    : n_states_(mdp.n_states()), n_actions_(mdp.n_actions()), j_steps_(j_steps) {
    if (j_steps < 1) throw ConfigError("j_steps must be >= 1");
    const double rho = average_cost(mdp, pi, h);
    const Vector h_vals = regularizer_values(pi, h);
    cost_term_ = mdp.cost();
    cost_term_.colwise() += h_vals;
    cost_term_.array() -= rho;
    kernel_ = build_state_action_kernel(mdp, pi);
}

Matrix SpanOperator::apply(const Matrix& q) const {
    if (q.rows() != n_states_ || q.cols() != n_actions_)
        throw DimensionError("q table shape does not match the operator");
    // Matrix storage is column-major; the kernel uses flat index s*A + a, so
    // work on an explicit row-major flattening instead.
    Vector flat(n_states_ * n_actions_);
    for (int s = 0; s < n_states_; ++s)
        for (int a = 0; a < n_actions_; ++a) flat[s * n_actions_ + a] = q(s, a);
    for (int j = 0; j < j_steps_; ++j) {
        Vector next = kernel_ * flat;
        for (int s = 0; s < n_states_; ++s)
            for (int a = 0; a < n_actions_; ++a) next[s * n_actions_ + a] += cost_term_(s, a);
        flat = std::move(next);
    }
    Matrix out(n_states_, n_actions_);
    for (int s = 0; s < n_states_; ++s)
        for (int a = 0; a < n_actions_; ++a) out(s, a) = flat[s * n_actions_ + a];
    return out;
}

Matrix bellman_operator_apply(const SpanOperator& op, const Matrix& q) { return op.apply(q); }

double contraction_coefficient(const Matrix& one_step_kernel, int j_steps) {
    if (j_steps < 1) throw ConfigError("j_steps must be >= 1");
    if (one_step_kernel.rows() != one_step_kernel.cols())
        throw DimensionError("kernel must be square");
    Matrix kj = one_step_kernel;
    for (int j = 1; j < j_steps; ++j) kj = kj * one_step_kernel;
    const Eigen::Index n = kj.rows();
    double min_overlap = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double overlap = 0.0;
            for (Eigen::Index t = 0; t < n; ++t) overlap += std::min(kj(i, t), kj(j, t));
            min_overlap = std::min(min_overlap, overlap);
        }
    }
    return std::clamp(1.0 - min_overlap, 0.0, 1.0);
}

double contraction_coefficient(const TabularAmdp& mdp, const StochasticPolicy& pi, int j_steps) {
    return contraction_coefficient(build_state_action_kernel(mdp, pi), j_steps);
}

int find_contractive_j(const TabularAmdp& mdp, const StochasticPolicy& pi, double threshold) {
    const Matrix kernel = build_state_action_kernel(mdp, pi);
    const int cap = mdp.n_states() * mdp.n_actions();
    for (int j = 1; j <= cap; ++j) {
        if (contraction_coefficient(kernel, j) <= threshold) return j;
    }
    throw NumericalError("no J <= " + std::to_string(cap) + " achieves a span contraction of " +
                         std::to_string(threshold));
}

} // namespace amdp
