#pragma once

#include <optional>
#include <string>

#include "amdp/amdp_core.hpp"
#include "amdp/features.hpp"

namespace amdp {

/**
 * Recipe for a desk-scale ergodic benchmark AMDP. Every generated instance
 * mixes each transition row with the uniform distribution at weight
 * `mixing_floor`, so each entry is at least mixing_floor / n_states and the
 * chain is ergodic under every policy (Doeblin condition by construction).
 */
struct EnvSpec {
    enum class Family { random_dirichlet, gridworld_slip, two_state_analytic, chain_features };
    enum class FeatureKind { one_hot, tiled, gaussian };

    Family family = Family::random_dirichlet;
    int n_states = 4;
    int n_actions = 2;
    double mixing_floor = 0.05;
    double cost_scale = 1.0;
    std::uint64_t seed = 0;

    // gridworld_slip: n_states must be grid_side^2
    int grid_side = 0;
    double slip = 0.1;

    // two_state_analytic: stay probabilities of action 0 in each state
    double p = 0.9;
    double q = 0.5;

    // chain_features
    FeatureKind feature_kind = FeatureKind::one_hot;
    int feature_dim = 0; // gaussian only
    int tiles = 2;       // tiled only

    void validate() const; // throws ConfigError

    [[nodiscard]] std::string to_json() const;
    static EnvSpec from_json(const std::string& text);
};

struct GeneratedEnv {
    TabularAmdp mdp;
    std::optional<FeatureTable> features;
};

/// Deterministic instance for the spec; identical seeds give identical bytes.
[[nodiscard]] GeneratedEnv generate(const EnvSpec& spec);

/**
 * Exhaustive enumeration of all n_actions^n_states deterministic policies
 * (capacity error beyond 1e6); returns the unregularized average-cost
 * minimizer, lowest lexicographic policy winning ties.
 */
[[nodiscard]] std::pair<StochasticPolicy, double> enumerate_deterministic_optimum(
    const TabularAmdp& mdp);

/// Frozen 6-state, 3-action instance used by the rate and noise experiments.
[[nodiscard]] EnvSpec six_state_benchmark();

/// Frozen 5-state, 3-action chain with one-hot features for the IRL runs.
[[nodiscard]] EnvSpec five_state_chain_benchmark();

} // namespace amdp
