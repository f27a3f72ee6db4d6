#include "amdp/amdp_core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace amdp {

namespace {

void check_probability_rows(const Matrix& rows, const std::string& what) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            const double p = rows(r, c);
            if (!std::isfinite(p) || p < 0.0)
                throw ModelError(what + " row " + std::to_string(r) +
                                 " has a negative or non-finite entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            throw ModelError(what + " row " + std::to_string(r) + " sums to " +
                             std::to_string(sum) + ", not 1");
    }
}

} // namespace

double RegularizerSpec::evaluate(const Eigen::Ref<const Vector>& policy_row) const {
    if (is_zero()) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < policy_row.size(); ++i) {
        const double p = policy_row[i];
        if (p > 0.0) acc += p * std::log(p);
    }
    return weight * acc;
}

StochasticPolicy::StochasticPolicy(Matrix probs) : probs_(std::move(probs)) {
    if (probs_.rows() == 0 || probs_.cols() == 0)
        throw DimensionError("policy table must be nonempty");
    check_probability_rows(probs_, "policy");
}

StochasticPolicy StochasticPolicy::uniform(int n_states, int n_actions) {
    if (n_states <= 0 || n_actions <= 0) throw DimensionError("policy shape must be positive");
    return StochasticPolicy(Matrix::Constant(n_states, n_actions, 1.0 / n_actions));
}

StochasticPolicy StochasticPolicy::deterministic(int n_states, int n_actions,
                                                 const std::vector<int>& actions) {
    if (static_cast<int>(actions.size()) != n_states)
        throw DimensionError("need one action per state");
    Matrix probs = Matrix::Zero(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        if (actions[static_cast<size_t>(s)] < 0 || actions[static_cast<size_t>(s)] >= n_actions)
            throw DimensionError("action index out of range at state " + std::to_string(s));
        probs(s, actions[static_cast<size_t>(s)]) = 1.0;
    }
    return StochasticPolicy(std::move(probs));
}

StochasticPolicy StochasticPolicy::random(int n_states, int n_actions, Rng& rng) {
    Matrix probs(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            // Exponential draws normalize to a flat Dirichlet row.
            probs(s, a) = -std::log(std::max(uniform01(rng), 1e-300));
            sum += probs(s, a);
        }
        probs.row(s) /= sum;
    }
    return StochasticPolicy(std::move(probs));
}

TabularAmdp::TabularAmdp(std::vector<Matrix> transition, Matrix cost)
    : transition_(std::move(transition)), cost_(std::move(cost)) {
    const int n_states = static_cast<int>(cost_.rows());
    const int n_actions = static_cast<int>(cost_.cols());
    if (n_states <= 0 || n_actions <= 0) throw DimensionError("MDP shape must be positive");
    if (static_cast<int>(transition_.size()) != n_actions)
        throw DimensionError("transition tensor must have one matrix per action");
    for (int a = 0; a < n_actions; ++a) {
        const Matrix& pa = transition_[static_cast<size_t>(a)];
        if (pa.rows() != n_states || pa.cols() != n_states)
            throw DimensionError("transition matrix for action " + std::to_string(a) +
                                 " has wrong shape");
        check_probability_rows(pa, "transition (action " + std::to_string(a) + ")");
    }
    if (!cost_.allFinite()) throw ModelError("cost table has non-finite entries");
}

TabularAmdp TabularAmdp::with_cost(Matrix cost) const {
    if (cost.rows() != cost_.rows() || cost.cols() != cost_.cols())
        throw DimensionError("replacement cost table has wrong shape");
    return TabularAmdp(transition_, std::move(cost));
}

Matrix policy_transition_matrix(const TabularAmdp& mdp, const StochasticPolicy& pi) {
    if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions())
        throw DimensionError("policy shape does not match the MDP");
    const int n = mdp.n_states();
    Matrix p = Matrix::Zero(n, n);
    for (int a = 0; a < mdp.n_actions(); ++a)
        p += pi.probs().col(a).asDiagonal() * mdp.transition(a);
    return p;
}

namespace {

/// Strong connectivity of the support graph; returns an offending state pair
/// when the chain is reducible.
std::optional<std::pair<int, int>> reducible_witness(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    auto reach = [&](bool forward) {
        std::vector<char> seen(static_cast<size_t>(n), 0);
        std::deque<int> queue{0};
        seen[0] = 1;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int w = 0; w < n; ++w) {
                const double edge = forward ? p(u, w) : p(w, u);
                if (edge > 0.0 && !seen[static_cast<size_t>(w)]) {
                    seen[static_cast<size_t>(w)] = 1;
                    queue.push_back(w);
                }
            }
        }
        return seen;
    };
    const auto fwd = reach(true);
    const auto bwd = reach(false);
    for (int s = 0; s < n; ++s) {
        if (!fwd[static_cast<size_t>(s)]) return std::make_pair(0, s);
        if (!bwd[static_cast<size_t>(s)]) return std::make_pair(s, 0);
    }
    return std::nullopt;
}

std::optional<Vector> stationary_power_iteration(const Matrix& p) {
    const int n = static_cast<int>(p.rows());
    Vector x = Vector::Constant(n, 1.0 / n);
    constexpr int kCap = 100000;
    constexpr double kTol = 1e-12;
    for (int it = 0; it < kCap; ++it) {
        Vector next = p.transpose() * x;
        next /= next.sum();
        if ((next - x).lpNorm<Eigen::Infinity>() <= kTol) return next;
        x = std::move(next);
    }
    return std::nullopt;
}

} // namespace

StationaryDistribution stationary_distribution(const Matrix& p_pi) {
    if (p_pi.rows() != p_pi.cols() || p_pi.rows() == 0)
        throw DimensionError("transition matrix must be square and nonempty");
    check_probability_rows(p_pi, "transition");

    if (auto witness = reducible_witness(p_pi))
        throw ErgodicityError("chain is reducible: state " + std::to_string(witness->second) +
                              " and state " + std::to_string(witness->first) +
                              " do not communicate");

    const int n = static_cast<int>(p_pi.rows());
    Matrix lhs(n + 1, n);
    lhs.topRows(n) = p_pi.transpose() - Matrix::Identity(n, n);
    lhs.row(n).setOnes();
    Vector rhs = Vector::Zero(n + 1);
    rhs[n] = 1.0;
    Vector kappa = lhs.colPivHouseholderQr().solve(rhs);

    auto sanitize = [&](Vector& k) {
        for (int s = 0; s < n; ++s)
            if (k[s] < 0.0 && k[s] > -1e-12) k[s] = 0.0;
        k /= k.sum();
    };
    sanitize(kappa);

    const double residual = (p_pi.transpose() * kappa - kappa).lpNorm<Eigen::Infinity>();
    if (residual > kStationaryTol || kappa.minCoeff() < 0.0) {
        auto fallback = stationary_power_iteration(p_pi);
        if (!fallback)
            throw ErgodicityError(
                "power iteration failed to converge within 1e5 iterations; "
                "the chain appears periodic or numerically degenerate");
        kappa = *fallback;
        sanitize(kappa);
    }

    if (kappa.minCoeff() < 1e-14) {
        int s_min = 0;
        kappa.minCoeff(&s_min);
        throw ErgodicityError("stationary mass at state " + std::to_string(s_min) +
                              " is numerically zero; chain is not ergodic");
    }

    StationaryDistribution out;
    out.kappa = std::move(kappa);
    out.gamma_gap = 1.0 - out.kappa.minCoeff();
    return out;
}

StationaryDistribution stationary_distribution(const TabularAmdp& mdp, const StochasticPolicy& pi) {
    return stationary_distribution(policy_transition_matrix(mdp, pi));
}

Vector regularizer_values(const StochasticPolicy& pi, const RegularizerSpec& h) {
    Vector out = Vector::Zero(pi.n_states());
    if (h.is_zero()) return out;
    for (int s = 0; s < pi.n_states(); ++s) out[s] = h.evaluate(pi.probs().row(s).transpose());
    return out;
}

double average_cost(const TabularAmdp& mdp, const StochasticPolicy& pi, const RegularizerSpec& h) {
    const auto stat = stationary_distribution(mdp, pi);
    const Vector expected_cost = (mdp.cost().array() * pi.probs().array()).rowwise().sum();
    return stat.kappa.dot(expected_cost + regularizer_values(pi, h));
}

DifferentialValues differential_values(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                       const RegularizerSpec& h) {
    const int n_states = mdp.n_states();
    const int n_actions = mdp.n_actions();
    const Matrix p_pi = policy_transition_matrix(mdp, pi);
    const auto stat = stationary_distribution(p_pi);

    const Vector h_vals = regularizer_values(pi, h);
    const Vector reg_cost =
        (mdp.cost().array() * pi.probs().array()).rowwise().sum().matrix() + h_vals;
    const double rho = stat.kappa.dot(reg_cost);

    // Poisson equation (I - P_pi) v = reg_cost - rho, pinned by kappa' v = 0.
    Matrix lhs(n_states + 1, n_states);
    lhs.topRows(n_states) = Matrix::Identity(n_states, n_states) - p_pi;
    lhs.row(n_states) = stat.kappa.transpose();
    Vector rhs(n_states + 1);
    rhs.head(n_states) = reg_cost - Vector::Constant(n_states, rho);
    rhs[n_states] = 0.0;
    Vector v = lhs.colPivHouseholderQr().solve(rhs);

    const double poisson_residual =
        ((Matrix::Identity(n_states, n_states) - p_pi) * v - rhs.head(n_states))
            .lpNorm<Eigen::Infinity>();
    const double mean_residual = std::abs(stat.kappa.dot(v));
    if (poisson_residual > kBellmanTol || mean_residual > kBellmanTol)
        throw NumericalError("Poisson system is singular beyond the one-dimensional nullspace "
                             "(residual " +
                             std::to_string(poisson_residual) + ")");

    Matrix q(n_states, n_actions);
    for (int a = 0; a < n_actions; ++a)
        q.col(a) = mdp.cost().col(a) + h_vals - Vector::Constant(n_states, rho) +
                   mdp.transition(a) * v;

    return DifferentialValues{std::move(v), std::move(q), rho};
}

Vector advantage_from(const DifferentialValues& dv, const StochasticPolicy& pi,
                      const StochasticPolicy& pi_next, const RegularizerSpec& h) {
    if (pi_next.n_states() != pi.n_states() || pi_next.n_actions() != pi.n_actions())
        throw DimensionError("policies have mismatched shapes");
    const Vector h_pi = regularizer_values(pi, h);
    const Vector h_next = regularizer_values(pi_next, h);
    Vector psi = (dv.q.array() * pi_next.probs().array()).rowwise().sum();
    return psi - dv.v + h_next - h_pi;
}

Vector advantage(const TabularAmdp& mdp, const StochasticPolicy& pi,
                 const StochasticPolicy& pi_next, const RegularizerSpec& h) {
    return advantage_from(differential_values(mdp, pi, h), pi, pi_next, h);
}

double performance_difference_check(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                    const StochasticPolicy& pi_next, const RegularizerSpec& h) {
    const double rho = average_cost(mdp, pi, h);
    const double rho_next = average_cost(mdp, pi_next, h);
    const auto stat_next = stationary_distribution(mdp, pi_next);
    const Vector psi = advantage(mdp, pi, pi_next, h);
    return std::abs(rho_next - rho - stat_next.kappa.dot(psi));
}

std::vector<TransitionSample> sample_trajectory(const TabularAmdp& mdp, const StochasticPolicy& pi,
                                                int n, Rng& rng, int start) {
    if (start < 0 || start >= mdp.n_states()) throw DimensionError("start state out of range");
    std::vector<TransitionSample> out;
    out.reserve(static_cast<size_t>(std::max(n, 0)));
    int s = start;
    for (int t = 0; t < n; ++t) {
        const int a = sample_index(pi.probs().row(s).transpose(), rng);
        const int s_next = sample_index(mdp.transition(a).row(s).transpose(), rng);
        out.push_back({s, a, mdp.cost(s, a), s_next});
        s = s_next;
    }
    return out;
}

} // namespace amdp
