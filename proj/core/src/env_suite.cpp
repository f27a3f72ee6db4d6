#include "amdp/env_suite.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

namespace amdp {

using nlohmann::json;

void EnvSpec::validate() const {
    if (n_states <= 0 || n_actions <= 0) throw ConfigError("env sizes must be positive");
    if (!(mixing_floor > 0.0 && mixing_floor < 1.0))
        throw ConfigError("mixing_floor must lie in (0, 1)");
    if (!(cost_scale > 0.0) || !std::isfinite(cost_scale))
        throw ConfigError("cost_scale must be positive and finite");
    switch (family) {
    case Family::random_dirichlet:
        break;
    case Family::gridworld_slip: {
        const int side = grid_side > 0 ? grid_side : static_cast<int>(std::lround(std::sqrt(n_states)));
        if (side * side != n_states)
            throw ConfigError("gridworld_slip needs n_states = side^2");
        if (n_actions != 4) throw ConfigError("gridworld_slip uses exactly 4 actions");
        if (!(slip >= 0.0 && slip <= 1.0)) throw ConfigError("slip must lie in [0, 1]");
        break;
    }
    case Family::two_state_analytic: {
        if (n_states != 2 || n_actions != 2)
            throw ConfigError("two_state_analytic is a 2-state, 2-action family");
        const double floor = mixing_floor / 2.0;
        if (p < floor || p > 1.0 - floor || q < floor || q > 1.0 - floor)
            throw ConfigError("two_state_analytic needs p, q in [floor, 1-floor]");
        break;
    }
    case Family::chain_features:
        if (n_actions != 3) throw ConfigError("chain_features uses exactly 3 actions");
        if (feature_kind == FeatureKind::gaussian && feature_dim <= 0)
            throw ConfigError("gaussian features need feature_dim > 0");
        if (feature_kind == FeatureKind::tiled && (tiles <= 0 || tiles > n_states))
            throw ConfigError("tiles must lie in [1, n_states]");
        break;
    }
}

namespace {

/// Mixes every row with the uniform distribution so each entry is at least
/// mixing_floor / n_states.
void apply_mixing_floor(std::vector<Matrix>& transition, double mixing_floor) {
    const double eps = mixing_floor;
    for (auto& pa : transition) {
        const int n = static_cast<int>(pa.rows());
        pa = (1.0 - eps) * pa + Matrix::Constant(n, n, eps / n);
        for (int s = 0; s < n; ++s) pa.row(s) /= pa.row(s).sum();
    }
}

GeneratedEnv generate_random_dirichlet(const EnvSpec& spec) {
    Rng rng = make_rng(spec.seed, /*stream=*/10);
    const int S = spec.n_states;
    const int A = spec.n_actions;
    std::vector<Matrix> transition(static_cast<size_t>(A), Matrix::Zero(S, S));
    for (int a = 0; a < A; ++a) {
        for (int s = 0; s < S; ++s) {
            double sum = 0.0;
            for (int sn = 0; sn < S; ++sn) {
                const double e = -std::log(std::max(uniform01(rng), 1e-300));
                transition[static_cast<size_t>(a)](s, sn) = e;
                sum += e;
            }
            transition[static_cast<size_t>(a)].row(s) /= sum;
        }
    }
    apply_mixing_floor(transition, spec.mixing_floor);
    Matrix cost(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) cost(s, a) = spec.cost_scale * uniform01(rng);
    return GeneratedEnv{TabularAmdp(std::move(transition), std::move(cost)), std::nullopt};
}

GeneratedEnv generate_gridworld(const EnvSpec& spec) {
    const int side = spec.grid_side > 0 ? spec.grid_side
                                        : static_cast<int>(std::lround(std::sqrt(spec.n_states)));
    const int S = side * side;
    const int A = 4;
    const int dr[4] = {-1, 1, 0, 0};
    const int dc[4] = {0, 0, -1, 1};
    auto cell = [&](int r, int c) { return ((r + side) % side) * side + ((c + side) % side); };

    std::vector<Matrix> transition(4, Matrix::Zero(S, S));
    for (int s = 0; s < S; ++s) {
        const int r = s / side;
        const int c = s % side;
        for (int a = 0; a < A; ++a) {
            for (int dir = 0; dir < 4; ++dir) {
                const double w = (dir == a) ? (1.0 - spec.slip) + spec.slip / 4.0 : spec.slip / 4.0;
                transition[static_cast<size_t>(a)](s, cell(r + dr[dir], c + dc[dir])) += w;
            }
        }
    }
    apply_mixing_floor(transition, spec.mixing_floor);

    // Goal in the corner; cost grows with torus distance and a mild action tax.
    Matrix cost(S, A);
    const double max_dist = static_cast<double>(side); // two half-side torus legs
    for (int s = 0; s < S; ++s) {
        const int r = s / side;
        const int c = s % side;
        const double dist = std::min(r, side - r) + std::min(c, side - c);
        for (int a = 0; a < A; ++a)
            cost(s, a) = spec.cost_scale * (dist / max_dist + 0.05 * a / 3.0);
    }
    return GeneratedEnv{TabularAmdp(std::move(transition), std::move(cost)), std::nullopt};
}

GeneratedEnv generate_two_state(const EnvSpec& spec) {
    std::vector<Matrix> transition(2, Matrix::Zero(2, 2));
    transition[0] << spec.p, 1.0 - spec.p, spec.q, 1.0 - spec.q;
    transition[1] << 1.0 - spec.p, spec.p, 1.0 - spec.q, spec.q;
    Matrix cost(2, 2);
    cost << 0.0, 1.0, 6.0, 2.0;
    cost *= spec.cost_scale;
    return GeneratedEnv{TabularAmdp(std::move(transition), std::move(cost)), std::nullopt};
}

GeneratedEnv generate_chain(const EnvSpec& spec) {
    Rng rng = make_rng(spec.seed, /*stream=*/11);
    const int S = spec.n_states;
    std::vector<Matrix> transition(3, Matrix::Zero(S, S));
    auto wrap = [&](int s) { return (s + S) % S; };
    for (int s = 0; s < S; ++s) {
        transition[0](s, wrap(s - 1)) = 0.9; // left
        transition[0](s, s) = 0.1;
        transition[1](s, s) = 0.9; // stay
        transition[1](s, wrap(s - 1)) = 0.05;
        transition[1](s, wrap(s + 1)) = 0.05;
        transition[2](s, wrap(s + 1)) = 0.9; // right
        transition[2](s, s) = 0.1;
    }
    apply_mixing_floor(transition, spec.mixing_floor);
    Matrix cost(S, 3);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < 3; ++a) cost(s, a) = spec.cost_scale * uniform01(rng);

    FeatureTable features;
    switch (spec.feature_kind) {
    case EnvSpec::FeatureKind::one_hot:
        features = FeatureTable::one_hot(S, 3);
        break;
    case EnvSpec::FeatureKind::tiled:
        features = FeatureTable::tiled(S, 3, spec.tiles);
        break;
    case EnvSpec::FeatureKind::gaussian:
        features = FeatureTable::gaussian(S, 3, spec.feature_dim, spec.seed);
        break;
    }
    return GeneratedEnv{TabularAmdp(std::move(transition), std::move(cost)), std::move(features)};
}

} // namespace

GeneratedEnv generate(const EnvSpec& spec) {
    spec.validate();
    switch (spec.family) {
    case EnvSpec::Family::random_dirichlet:
        return generate_random_dirichlet(spec);
    case EnvSpec::Family::gridworld_slip:
        return generate_gridworld(spec);
    case EnvSpec::Family::two_state_analytic:
        return generate_two_state(spec);
    case EnvSpec::Family::chain_features:
        return generate_chain(spec);
    }
    throw ConfigError("unknown environment family");
}

std::pair<StochasticPolicy, double> enumerate_deterministic_optimum(const TabularAmdp& mdp) {
    const int S = mdp.n_states();
    const int A = mdp.n_actions();
    const double count = std::pow(static_cast<double>(A), static_cast<double>(S));
    if (count > 1e6)
        throw CapacityError("deterministic policy space has " + std::to_string(count) +
                            " elements; enumeration is capped at 1e6");

    std::vector<int> actions(static_cast<size_t>(S), 0);
    std::vector<int> best = actions;
    double best_rho = std::numeric_limits<double>::infinity();
    const RegularizerSpec h = RegularizerSpec::zero();
    while (true) {
        const auto pi = StochasticPolicy::deterministic(S, A, actions);
        const double rho = average_cost(mdp, pi, h);
        // Solver rounding (~1e-15) must not steal a tie from the
        // lexicographically first policy.
        if (!std::isfinite(best_rho) || rho < best_rho - 1e-12 * (1.0 + std::abs(best_rho))) {
            best_rho = rho;
            best = actions;
        }
        int pos = S - 1;
        while (pos >= 0) {
            if (++actions[static_cast<size_t>(pos)] < A) break;
            actions[static_cast<size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return {StochasticPolicy::deterministic(S, A, best), best_rho};
}

EnvSpec six_state_benchmark() {
    // Frozen instance for the rate and noise experiments. The cost scale is
    // small so the K = 200..400 horizons of the pinned experiments land well
    // inside the 1e-4 policy-accuracy regime of the 1/(mu k) schedule
    // (policy error empirically tracks 1.4e-3 * cost_scale * 200/K here).
    EnvSpec spec;
    spec.family = EnvSpec::Family::random_dirichlet;
    spec.n_states = 6;
    spec.n_actions = 3;
    spec.mixing_floor = 0.1;
    spec.cost_scale = 0.04;
    spec.seed = 777;
    return spec;
}

EnvSpec five_state_chain_benchmark() {
    EnvSpec spec;
    spec.family = EnvSpec::Family::chain_features;
    spec.n_states = 5;
    spec.n_actions = 3;
    spec.mixing_floor = 0.05;
    spec.cost_scale = 1.0;
    spec.seed = 5005;
    spec.feature_kind = EnvSpec::FeatureKind::one_hot;
    return spec;
}

namespace {

const char* family_name(EnvSpec::Family f) {
    switch (f) {
    case EnvSpec::Family::random_dirichlet: return "random_dirichlet";
    case EnvSpec::Family::gridworld_slip: return "gridworld_slip";
    case EnvSpec::Family::two_state_analytic: return "two_state_analytic";
    case EnvSpec::Family::chain_features: return "chain_features";
    }
    return "?";
}

const char* feature_name(EnvSpec::FeatureKind k) {
    switch (k) {
    case EnvSpec::FeatureKind::one_hot: return "one_hot";
    case EnvSpec::FeatureKind::tiled: return "tiled";
    case EnvSpec::FeatureKind::gaussian: return "gaussian";
    }
    return "?";
}

} // namespace

std::string EnvSpec::to_json() const {
    json doc;
    doc["family"] = family_name(family);
    doc["n_states"] = n_states;
    doc["n_actions"] = n_actions;
    doc["mixing_floor"] = mixing_floor;
    doc["cost_scale"] = cost_scale;
    doc["seed"] = seed;
    if (family == Family::gridworld_slip) {
        doc["grid_side"] = grid_side;
        doc["slip"] = slip;
    }
    if (family == Family::two_state_analytic) {
        doc["p"] = p;
        doc["q"] = q;
    }
    if (family == Family::chain_features) {
        doc["features"] = feature_name(feature_kind);
        if (feature_kind == FeatureKind::gaussian) doc["feature_dim"] = feature_dim;
        if (feature_kind == FeatureKind::tiled) doc["tiles"] = tiles;
    }
    return doc.dump(2);
}

EnvSpec EnvSpec::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid env spec JSON: ") + e.what());
    }
    static const std::set<std::string> known = {"family", "n_states",    "n_actions", "mixing_floor",
                                                "cost_scale", "seed",    "grid_side", "slip",
                                                "p",      "q",           "features",  "feature_dim",
                                                "tiles"};
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (!known.count(key)) throw ConfigError("env spec: unknown key \"" + key + "\"");
    }
    EnvSpec spec;
    try {
        const std::string fam = doc.at("family").get<std::string>();
        if (fam == "random_dirichlet") spec.family = Family::random_dirichlet;
        else if (fam == "gridworld_slip") spec.family = Family::gridworld_slip;
        else if (fam == "two_state_analytic") spec.family = Family::two_state_analytic;
        else if (fam == "chain_features") spec.family = Family::chain_features;
        else throw ConfigError("env spec: unknown family \"" + fam + "\"");
        spec.n_states = doc.value("n_states", spec.n_states);
        spec.n_actions = doc.value("n_actions", spec.n_actions);
        spec.mixing_floor = doc.value("mixing_floor", spec.mixing_floor);
        spec.cost_scale = doc.value("cost_scale", spec.cost_scale);
        spec.seed = doc.value("seed", spec.seed);
        spec.grid_side = doc.value("grid_side", spec.grid_side);
        spec.slip = doc.value("slip", spec.slip);
        spec.p = doc.value("p", spec.p);
        spec.q = doc.value("q", spec.q);
        if (doc.contains("features")) {
            const std::string fk = doc["features"].get<std::string>();
            if (fk == "one_hot") spec.feature_kind = FeatureKind::one_hot;
            else if (fk == "tiled") spec.feature_kind = FeatureKind::tiled;
            else if (fk == "gaussian") spec.feature_kind = FeatureKind::gaussian;
            else throw ConfigError("env spec: unknown feature kind \"" + fk + "\"");
        }
        spec.feature_dim = doc.value("feature_dim", spec.feature_dim);
        spec.tiles = doc.value("tiles", spec.tiles);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid env spec JSON: ") + e.what());
    }
    spec.validate();
    return spec;
}

} // namespace amdp
