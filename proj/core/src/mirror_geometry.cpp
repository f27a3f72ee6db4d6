#include "amdp/mirror_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace amdp {

namespace {

constexpr double kTinyProb = 1e-300;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_simplex_point(const Eigen::Ref<const Vector>& p, const char* what) {
    if (p.size() == 0) throw DimensionError("empty probability vector");
    if (p.minCoeff() < -1e-12 || std::abs(p.sum() - 1.0) > 1e-9)
        throw ModelError(std::string(what) + " is not a point on the simplex");
}

double entropy_omega(const Eigen::Ref<const Vector>& p) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) acc += p[i] * std::log(p[i]);
    return acc;
}

} // namespace

double bregman_distance(const BregmanGeometry& geometry, const Eigen::Ref<const Vector>& a2,
                        const Eigen::Ref<const Vector>& a1) {
    if (a1.size() != a2.size()) throw DimensionError("Bregman arguments have mismatched sizes");
    check_simplex_point(a1, "a1");
    check_simplex_point(a2, "a2");
    if (geometry.kind == BregmanGeometry::Kind::squared_euclidean)
        return 0.5 * (a1 - a2).squaredNorm();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a1.size(); ++i) {
        if (a1[i] <= 0.0) continue;
        if (a2[i] <= 0.0) return kInf;
        acc += a1[i] * std::log(a1[i] / a2[i]);
    }
    // Rounding can make a KL of near-identical rows dip a hair below zero.
    return std::max(acc, 0.0);
}

double prox_objective(const ProxProblem& p, const BregmanGeometry& geometry,
                      const Eigen::Ref<const Vector>& point) {
    const double tau = p.regularizer.is_zero() ? 0.0 : p.regularizer.weight;
    double value = p.q_row.dot(point) + tau * entropy_omega(point);
    if (std::isinf(p.eta)) return value;
    return value + bregman_distance(geometry, p.prev_policy_row, point) / p.eta;
}

Vector actor_prox_closed_form(const ProxProblem& p) {
    if (!(p.eta > 0.0)) throw ConfigError("prox step size eta must be positive");
    if (p.q_row.size() != p.prev_policy_row.size())
        throw DimensionError("q row and policy row have mismatched sizes");
    if (p.regularizer.kind == RegularizerSpec::Kind::negative_entropy && p.regularizer.weight < 0.0)
        throw ConfigError("negative entropy weight must be >= 0");
    const double tau = p.regularizer.is_zero() ? 0.0 : p.regularizer.weight;
    if (std::isinf(p.eta) && tau <= 0.0)
        throw ConfigError("eta = infinity requires a strictly positive entropy weight");

    const Eigen::Index n = p.q_row.size();
    Vector log_next(n);
    if (std::isinf(p.eta)) {
        log_next = -p.q_row / tau;
    } else {
        for (Eigen::Index a = 0; a < n; ++a) {
            const double prev = std::max(p.prev_policy_row[a], kTinyProb);
            log_next[a] = (std::log(prev) - p.eta * p.q_row[a]) / (1.0 + p.eta * tau);
        }
    }
    log_next.array() -= log_next.maxCoeff();
    Vector next = log_next.array().exp();
    next = next.cwiseMax(kTinyProb); // never emit exact zeros
    next /= next.sum();
    return next;
}

Vector project_to_simplex(const Eigen::Ref<const Vector>& x) {
    const Eigen::Index n = x.size();
    if (n == 0) throw DimensionError("cannot project an empty vector");
    std::vector<double> sorted(x.data(), x.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cum = 0.0;
    double theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cum += sorted[static_cast<size_t>(i)];
        const double candidate = (cum - 1.0) / static_cast<double>(i + 1);
        if (sorted[static_cast<size_t>(i)] - candidate > 0.0) theta = candidate;
    }
    return (x.array() - theta).cwiseMax(0.0);
}

namespace {

/// Gradient of the smooth subproblem (entropy terms present).
Vector prox_gradient(const ProxProblem& p, const BregmanGeometry& geometry, const Vector& point,
                     double tau) {
    Vector g = p.q_row;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        const double pi = std::max(point[i], kTinyProb);
        if (tau > 0.0) g[i] += tau * (1.0 + std::log(pi));
        if (geometry.kind == BregmanGeometry::Kind::negative_entropy) {
            const double prev = std::max(p.prev_policy_row[i], kTinyProb);
            g[i] += (std::log(pi / prev) + 1.0) / p.eta;
        } else {
            g[i] += (point[i] - p.prev_policy_row[i]) / p.eta;
        }
    }
    return g;
}

/// Diagonal of the subproblem Hessian.
Vector prox_hessian_diag(const ProxProblem& p, const BregmanGeometry& geometry,
                         const Vector& point, double tau) {
    Vector h(point.size());
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        const double pi = std::max(point[i], kTinyProb);
        double hi = tau / pi;
        hi += (geometry.kind == BregmanGeometry::Kind::negative_entropy) ? 1.0 / (p.eta * pi)
                                                                         : 1.0 / p.eta;
        h[i] = hi;
    }
    return h;
}

/**
 * Damped Newton in the n-1 free coordinates (last coordinate eliminated).
 * The reduced Hessian is diag(h_i) + h_n 11', inverted by Sherman-Morrison.
 * Steps are clipped to keep the iterate strictly inside the simplex.
 */
Vector reduced_newton(const ProxProblem& p, const BregmanGeometry& geometry, double tau) {
    const Eigen::Index n = p.q_row.size();
    Vector point = p.prev_policy_row.cwiseMax(1e-12);
    point /= point.sum();
    if (n == 1) return Vector::Ones(1);

    double f = prox_objective(p, geometry, point);
    constexpr int kMaxIter = 400;
    for (int iter = 0; iter < kMaxIter; ++iter) {
        const Vector g_full = prox_gradient(p, geometry, point, tau);
        const Vector h_full = prox_hessian_diag(p, geometry, point, tau);

        Vector g(n - 1);
        for (Eigen::Index i = 0; i + 1 < n; ++i) g[i] = g_full[i] - g_full[n - 1];

        // Solve (diag(h_i) + h_n 11') d = -g via Sherman-Morrison.
        Vector inv_h(n - 1);
        for (Eigen::Index i = 0; i + 1 < n; ++i) inv_h[i] = 1.0 / h_full[i];
        const Vector w = -g.cwiseProduct(inv_h);
        const double hn = h_full[n - 1];
        const double denom = 1.0 + hn * inv_h.sum();
        const double correction = hn * w.sum() / denom;
        Vector d = w - correction * inv_h;

        // Largest step keeping every coordinate strictly positive.
        double t_max = 1.0;
        double d_last = -d.sum();
        for (Eigen::Index i = 0; i + 1 < n; ++i)
            if (d[i] < 0.0) t_max = std::min(t_max, -0.995 * point[i] / d[i]);
        if (d_last < 0.0) t_max = std::min(t_max, -0.995 * point[n - 1] / d_last);

        const double step_scale = std::max(std::abs(d_last), d.lpNorm<Eigen::Infinity>());
        double t = t_max;
        Vector trial = point;
        double f_trial = f;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            trial = point;
            for (Eigen::Index i = 0; i + 1 < n; ++i) trial[i] += t * d[i];
            trial[n - 1] += t * d_last;
            trial = trial.cwiseMax(kTinyProb);
            trial /= trial.sum();
            f_trial = prox_objective(p, geometry, trial);
            // Near the optimum f-comparisons drown in rounding; a full Newton
            // step of vanishing length is a pure contraction and always taken.
            if (f_trial <= f + 1e-15 * (1.0 + std::abs(f)) ||
                (bt == 0 && t * step_scale < 1e-8)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;
        point = trial;
        f = f_trial;
        if (t * step_scale < 1e-14 && iter > 1) break;
    }
    return point;
}

} // namespace

Vector actor_prox_numeric(const ProxProblem& p, const BregmanGeometry& geometry) {
    if (p.q_row.size() != p.prev_policy_row.size())
        throw DimensionError("q row and policy row have mismatched sizes");
    if (!(p.eta > 0.0)) throw ConfigError("prox step size eta must be positive");
    const double tau = p.regularizer.is_zero() ? 0.0 : p.regularizer.weight;

    if (std::isinf(p.eta)) {
        if (tau > 0.0) return actor_prox_closed_form(p);
        // Distance term vanishes: point mass on the smallest q, lowest index
        // winning ties.
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < p.q_row.size(); ++i)
            if (p.q_row[i] < p.q_row[best]) best = i;
        Vector out = Vector::Zero(p.q_row.size());
        out[best] = 1.0;
        return out;
    }

    if (geometry.kind == BregmanGeometry::Kind::squared_euclidean && tau == 0.0) {
        // Quadratic objective: exact minimizer is a euclidean projection.
        return project_to_simplex(p.prev_policy_row - p.eta * p.q_row);
    }

    if (geometry.kind == BregmanGeometry::Kind::negative_entropy &&
        p.prev_policy_row.minCoeff() <= 0.0)
        throw ModelError("KL prox requires a strictly positive previous policy row");

    const double modulus = tau + 1.0 / p.eta;
    if (!(modulus > 0.0))
        throw ConfigError("prox subproblem is not strongly convex (tau + 1/eta <= 0)");

    return reduced_newton(p, geometry, tau);
}

double three_point_check(const ProxProblem& p, const BregmanGeometry& geometry,
                         const Eigen::Ref<const Vector>& solution,
                         const Eigen::Ref<const Vector>& comparator) {
    const double tau = p.regularizer.is_zero() ? 0.0 : p.regularizer.weight;
    const double mu_d = tau; // exact tabular critic: mu_Q = 0
    const double inv_eta = std::isinf(p.eta) ? 0.0 : 1.0 / p.eta;

    auto h = [&](const Eigen::Ref<const Vector>& x) { return p.regularizer.evaluate(x); };
    const double lhs = p.q_row.dot(solution) + h(solution) +
                       inv_eta * bregman_distance(geometry, p.prev_policy_row, solution) +
                       (mu_d + inv_eta) * bregman_distance(geometry, solution, comparator);
    const double rhs = p.q_row.dot(comparator) + h(comparator) +
                       inv_eta * bregman_distance(geometry, p.prev_policy_row, comparator);
    return lhs - rhs;
}

} // namespace amdp
