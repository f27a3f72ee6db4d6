#pragma once

#include "amdp/amdp_core.hpp"

namespace amdp {

/**
 * State-action feature map phi(s,a) in R^d, stored as an (S*A) x d matrix
 * with flat row index s * n_actions + a.
 */
struct FeatureTable {
    int n_states = 0;
    int n_actions = 0;
    Matrix phi;

    [[nodiscard]] int dim() const { return static_cast<int>(phi.cols()); }
    [[nodiscard]] Vector row(int s, int a) const {
        return phi.row(s * n_actions + a).transpose();
    }

    /// max over (s,a) of ||phi(s,a)||_2; the constructive gradient bound L_r.
    [[nodiscard]] double gradient_bound() const { return phi.rowwise().norm().maxCoeff(); }

    /// c(s,a) = theta' phi(s,a) as an S x A table.
    [[nodiscard]] Matrix cost_table(const Eigen::Ref<const Vector>& theta) const;

    static FeatureTable one_hot(int n_states, int n_actions);
    /// Coarse tiling: states grouped into `tiles` contiguous bins, actions kept
    /// distinct; under-parameterized on purpose (d = tiles * n_actions).
    static FeatureTable tiled(int n_states, int n_actions, int tiles);
    static FeatureTable gaussian(int n_states, int n_actions, int dim, std::uint64_t seed);
};

/// Mean feature vector over a set of (s,a) pairs.
[[nodiscard]] Vector feature_mean(const FeatureTable& features,
                                  const std::vector<std::pair<int, int>>& pairs);

} // namespace amdp
