#include "amdp/features.hpp"

namespace amdp {

Matrix FeatureTable::cost_table(const Eigen::Ref<const Vector>& theta) const {
    if (theta.size() != phi.cols()) throw DimensionError("theta length does not match phi");
    const Vector flat = phi * theta;
    Matrix cost(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) cost(s, a) = flat[s * n_actions + a];
    return cost;
}

FeatureTable FeatureTable::one_hot(int n_states, int n_actions) {
    if (n_states <= 0 || n_actions <= 0) throw DimensionError("feature shape must be positive");
    FeatureTable out;
    out.n_states = n_states;
    out.n_actions = n_actions;
    out.phi = Matrix::Identity(n_states * n_actions, n_states * n_actions);
    return out;
}

FeatureTable FeatureTable::tiled(int n_states, int n_actions, int tiles) {
    if (tiles <= 0 || tiles > n_states) throw ConfigError("tiles must be in [1, n_states]");
    FeatureTable out;
    out.n_states = n_states;
    out.n_actions = n_actions;
    out.phi = Matrix::Zero(n_states * n_actions, tiles * n_actions);
    for (int s = 0; s < n_states; ++s) {
        const int tile = std::min(s * tiles / n_states, tiles - 1);
        for (int a = 0; a < n_actions; ++a) out.phi(s * n_actions + a, tile * n_actions + a) = 1.0;
    }
    return out;
}

FeatureTable FeatureTable::gaussian(int n_states, int n_actions, int dim, std::uint64_t seed) {
    if (dim <= 0) throw ConfigError("feature dimension must be positive");
    FeatureTable out;
    out.n_states = n_states;
    out.n_actions = n_actions;
    out.phi = Matrix(n_states * n_actions, dim);
    Rng rng = make_rng(seed, /*stream=*/7);
    for (Eigen::Index r = 0; r < out.phi.rows(); ++r)
        for (Eigen::Index c = 0; c < out.phi.cols(); ++c) out.phi(r, c) = normal(rng);
    return out;
}

Vector feature_mean(const FeatureTable& features, const std::vector<std::pair<int, int>>& pairs) {
    if (pairs.empty()) throw DataError("cannot average features over an empty sample set");
    Vector mean = Vector::Zero(features.dim());
    for (const auto& [s, a] : pairs) {
        if (s < 0 || s >= features.n_states || a < 0 || a >= features.n_actions)
            throw DimensionError("demonstration pair out of range");
        mean += features.row(s, a);
    }
    return mean / static_cast<double>(pairs.size());
}

} // namespace amdp
