#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <json.hpp>

#include "amdp/env_suite.hpp"
#include "amdp/io.hpp"
#include "amdp/ipmd.hpp"
#include "amdp/spmd.hpp"
#include "log.hpp"

namespace amdp::cli {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

json load_config(const std::filesystem::path& path) {
    if (path.empty()) throw ConfigError("missing --config <path>");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

void reject_unknown_keys(const json& doc, const std::set<std::string>& allowed,
                         const std::string& context) {
    if (!doc.is_object()) throw ConfigError(context + " must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError(context + ": unknown key \"" + key + "\"");
    }
}

std::filesystem::path resolve_out(const CommonFlags& flags, const json& config) {
    std::filesystem::path out;
    if (config.contains("out")) out = config["out"].get<std::string>();
    if (flags.out) out = *flags.out;
    if (out.empty()) throw ConfigError("no output directory: pass --out or set \"out\"");
    std::filesystem::create_directories(out);
    return out;
}

struct ResolvedEnv {
    TabularAmdp mdp;
    std::optional<FeatureTable> features;
    std::string origin;
};

ResolvedEnv resolve_env(const json& config) {
    const bool has_path = config.contains("env_path");
    const bool has_spec = config.contains("env_spec");
    if (has_path == has_spec)
        throw ConfigError("config needs exactly one of \"env_path\" or \"env_spec\"");
    if (has_path) {
        const std::string path = config["env_path"].get<std::string>();
        return ResolvedEnv{load_amdp(path), std::nullopt, path};
    }
    const EnvSpec spec = EnvSpec::from_json(config["env_spec"].dump());
    GeneratedEnv env = generate(spec);
    return ResolvedEnv{std::move(env.mdp), std::move(env.features), "inline env_spec"};
}

RegularizerSpec parse_regularizer(const json& doc) {
    reject_unknown_keys(doc, {"kind", "weight"}, "regularizer");
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "zero") return RegularizerSpec::zero();
    if (kind == "negative_entropy")
        return RegularizerSpec::negative_entropy(doc.at("weight").get<double>());
    throw ConfigError("regularizer kind must be \"zero\" or \"negative_entropy\"");
}

BregmanGeometry parse_geometry(const json& config) {
    const std::string name = config.value("geometry", std::string("negative_entropy"));
    if (name == "negative_entropy") return BregmanGeometry::kl();
    if (name == "squared_euclidean") return BregmanGeometry::euclidean();
    throw ConfigError("geometry must be \"negative_entropy\" or \"squared_euclidean\"");
}

StepSchedule parse_schedule(const json& doc) {
    reject_unknown_keys(
        doc, {"kind", "mu", "distance_estimate", "lipschitz_aggregate", "sigma_omega"},
        "schedule");
    StepSchedule schedule;
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "constant_optimized") schedule.kind = StepSchedule::Kind::constant_optimized;
    else if (kind == "inv_mu_k") schedule.kind = StepSchedule::Kind::inv_mu_k;
    else if (kind == "weighted_2_over_mu_k")
        schedule.kind = StepSchedule::Kind::weighted_2_over_mu_k;
    else if (kind == "nonconvex_min") schedule.kind = StepSchedule::Kind::nonconvex_min;
    else throw ConfigError("unknown schedule kind \"" + kind + "\"");
    schedule.mu = doc.value("mu", 0.0);
    schedule.distance_estimate = doc.value("distance_estimate", 0.0);
    schedule.lipschitz_aggregate = doc.value("lipschitz_aggregate", 0.0);
    schedule.sigma_omega = doc.value("sigma_omega", 0.0);
    return schedule;
}

CriticSpec parse_critic(const json& doc) {
    reject_unknown_keys(doc,
                        {"type", "bias_bound", "noise_std", "n_samples", "batch_size",
                         "learning_rate", "epochs"},
                        "critic");
    CriticSpec critic;
    const std::string type = doc.at("type").get<std::string>();
    if (type == "exact") {
        critic.type = CriticSpec::Type::exact;
    } else if (type == "noisy") {
        critic.type = CriticSpec::Type::noisy;
        critic.bias_bound = doc.value("bias_bound", 0.0);
        critic.noise_std = doc.value("noise_std", 0.0);
    } else if (type == "td") {
        critic.type = CriticSpec::Type::td;
        critic.td.n_samples = doc.value("n_samples", critic.td.n_samples);
        critic.td.batch_size = doc.value("batch_size", critic.td.batch_size);
        critic.td.learning_rate = doc.value("learning_rate", critic.td.learning_rate);
        critic.td.epochs = doc.value("epochs", critic.td.epochs);
    } else {
        throw ConfigError("critic type must be \"exact\", \"noisy\", or \"td\"");
    }
    return critic;
}

std::vector<int> parse_horizons(const json& config) {
    const bool has_k = config.contains("K");
    const bool has_h = config.contains("horizons");
    if (has_k == has_h) throw ConfigError("config needs exactly one of \"K\" or \"horizons\"");
    std::vector<int> horizons;
    if (has_k) {
        horizons.push_back(config["K"].get<int>());
    } else {
        for (const auto& k : config["horizons"]) horizons.push_back(k.get<int>());
    }
    for (int k : horizons)
        if (k < 0) throw ConfigError("horizons must be nonnegative");
    if (horizons.empty()) throw ConfigError("horizons list is empty");
    return horizons;
}

std::vector<std::uint64_t> parse_seeds(const json& config, const CommonFlags& flags) {
    std::vector<std::uint64_t> seeds;
    if (config.contains("seeds"))
        for (const auto& s : config["seeds"]) seeds.push_back(s.get<std::uint64_t>());
    if (flags.seed) seeds = {*flags.seed};
    if (seeds.empty()) throw ConfigError("no seeds: set \"seeds\" or pass --seed");
    return seeds;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double quartile_range(std::vector<double> values) {
    if (values.size() < 2) return 0.0;
    std::sort(values.begin(), values.end());
    const auto at = [&](double q) {
        const double pos = q * (values.size() - 1);
        const size_t lo = static_cast<size_t>(pos);
        const size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - lo) * (values[hi] - values[lo]);
    };
    return at(0.75) - at(0.25);
}

/// Runs jobs with at most `workers` in flight; results land in job order.
template <typename Result, typename Fn>
std::vector<Result> run_jobs(int n_jobs, int workers, Fn&& fn) {
    std::vector<Result> results(static_cast<size_t>(n_jobs));
    const int cap = std::max(1, workers);
    for (int begin = 0; begin < n_jobs; begin += cap) {
        const int end = std::min(begin + cap, n_jobs);
        std::vector<std::future<Result>> batch;
        batch.reserve(static_cast<size_t>(end - begin));
        for (int i = begin; i < end; ++i)
            batch.push_back(std::async(std::launch::async, fn, i));
        for (int i = begin; i < end; ++i)
            results[static_cast<size_t>(i)] = batch[static_cast<size_t>(i - begin)].get();
    }
    return results;
}

} // namespace

int cmd_gen_env(const CommonFlags& flags) {
    json config = load_config(flags.config);
    reject_unknown_keys(config, {"env_spec", "out"}, "gen-env config");
    if (!config.contains("env_spec")) throw ConfigError("gen-env config needs \"env_spec\"");
    EnvSpec spec = EnvSpec::from_json(config["env_spec"].dump());
    if (flags.seed) spec.seed = *flags.seed;

    const auto out_dir = resolve_out(flags, config);
    const auto env_path = out_dir / "env.json";
    if (std::filesystem::exists(env_path) && !flags.force)
        throw DataError(env_path.string() + " exists; pass --force to overwrite");

    const GeneratedEnv env = generate(spec);
    save_amdp(env.mdp, env_path);
    std::ofstream manifest(out_dir / "env_spec.json", std::ios::binary);
    manifest << spec.to_json() << '\n';
    log_info("wrote " + env_path.string());
    return kExitOk;
}

namespace {

struct SolveJobResult {
    double final_gap = std::numeric_limits<double>::quiet_NaN();
    double running_avg_gap = std::numeric_limits<double>::quiet_NaN();
    bool empty = false;
};

void write_spmd_trace(const SpmdTrace& trace, const std::filesystem::path& path) {
    CsvWriter csv({"k", "rho", "gap", "bregman_to_star", "psi_stationarity", "d_iterates",
                   "eta_k"});
    for (size_t k = 0; k < trace.iterations.size(); ++k) {
        const auto& it = trace.iterations[k];
        csv.add_row({static_cast<double>(k), it.rho, it.gap, it.bregman_to_star, it.psi_abs_max,
                     it.d_iter_max, it.eta});
    }
    csv.write(path);
}

} // namespace

int cmd_solve(const CommonFlags& flags) {
    json config = load_config(flags.config);
    reject_unknown_keys(config,
                        {"env_path", "env_spec", "regularizer", "geometry", "schedule", "critic",
                         "K", "horizons", "seeds", "out"},
                        "solve config");
    const ResolvedEnv env = resolve_env(config);
    const RegularizerSpec h = config.contains("regularizer")
                                  ? parse_regularizer(config["regularizer"])
                                  : RegularizerSpec::negative_entropy(1.0);
    const BregmanGeometry geometry = parse_geometry(config);
    const StepSchedule schedule = parse_schedule(config.at("schedule"));
    const CriticSpec critic = config.contains("critic") ? parse_critic(config["critic"])
                                                        : CriticSpec{};
    const auto horizons = parse_horizons(config);
    const auto seeds = parse_seeds(config, flags);
    const auto out_dir = resolve_out(flags, config);

    log_info("solve: computing the reference optimum");
    const Reference reference = reference_solution(env.mdp, h, geometry);

    struct Job {
        int horizon;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (int k : horizons)
        for (auto seed : seeds) jobs.push_back({k, seed});

    auto results = run_jobs<SolveJobResult>(
        static_cast<int>(jobs.size()), flags.workers, [&](int i) {
            const auto& job = jobs[static_cast<size_t>(i)];
            SpmdOptions options;
            options.reference = reference;
            auto [pi, trace] = run_spmd(env.mdp, h, geometry, schedule, critic, job.horizon,
                                        job.seed, options);
            const auto path = out_dir / ("trace_K" + std::to_string(job.horizon) + "_seed" +
                                         std::to_string(job.seed) + ".csv");
            write_spmd_trace(trace, path);
            SolveJobResult res;
            if (trace.iterations.empty()) {
                res.empty = true;
            } else {
                res.final_gap = trace.iterations.back().gap;
                res.running_avg_gap = running_average_gap(trace);
            }
            return res;
        });

    ordered_json summary;
    summary["command"] = "solve";
    summary["env"] = env.origin;
    summary["rho_star"] = reference.rho_star;
    summary["seeds"] = seeds;
    summary["horizons"] = horizons;

    ordered_json per_horizon = ordered_json::array();
    std::vector<double> ha;
    std::vector<double> hk;
    size_t idx = 0;
    for (int k : horizons) {
        std::vector<double> final_gaps;
        std::vector<double> avg_gaps;
        bool any_empty = false;
        for (size_t s = 0; s < seeds.size(); ++s, ++idx) {
            const auto& res = results[idx];
            if (res.empty) {
                any_empty = true;
                continue;
            }
            final_gaps.push_back(res.final_gap);
            avg_gaps.push_back(res.running_avg_gap);
        }
        ordered_json entry;
        entry["K"] = k;
        if (any_empty || final_gaps.empty()) {
            entry["note"] = "no iterations";
        } else {
            entry["final_gap_median"] = median(final_gaps);
            entry["final_gap_iqr"] = quartile_range(final_gaps);
            entry["running_avg_gap_median"] = median(avg_gaps);
            ha.push_back(median(avg_gaps));
            hk.push_back(static_cast<double>(k));
        }
        per_horizon.push_back(entry);
    }
    summary["per_horizon"] = per_horizon;

    if (critic.type == CriticSpec::Type::noisy && !results.empty()) {
        std::vector<double> final_gaps;
        for (const auto& res : results)
            if (!res.empty) final_gaps.push_back(res.final_gap);
        if (!final_gaps.empty()) summary["plateau_level"] = median(final_gaps);
    }

    if (hk.size() >= 3) {
        ordered_json fits;
        const auto add_fit = [&](const char* name, RateModel model) {
            const RateFit fit = fit_rate(hk, ha, model);
            ordered_json f;
            f["coefficient"] = fit.coefficient;
            f["intercept"] = fit.intercept;
            f["r_squared"] = fit.r_squared;
            fits[name] = f;
        };
        add_fit("inv_k", RateModel::inv_k);
        add_fit("log_k_over_k", RateModel::log_k_over_k);
        add_fit("inv_sqrt_k", RateModel::inv_sqrt_k);
        summary["rate_fit"] = fits;
    }

    std::ofstream out(out_dir / "summary.json", std::ios::binary);
    out << summary.dump(2) << '\n';
    log_info("solve: wrote summary to " + (out_dir / "summary.json").string());
    return kExitOk;
}

namespace {

struct IrlJobResult {
    double final_grad_norm = std::numeric_limits<double>::quiet_NaN();
    double reward_span_err = std::numeric_limits<double>::quiet_NaN();
    double policy_tv = std::numeric_limits<double>::quiet_NaN();
    double mean_sq_grad = std::numeric_limits<double>::quiet_NaN();
};

double policy_tv_max(const StochasticPolicy& a, const StochasticPolicy& b) {
    double worst = 0.0;
    for (int s = 0; s < a.n_states(); ++s)
        worst = std::max(worst, 0.5 * (a.probs().row(s) - b.probs().row(s)).lpNorm<1>());
    return worst;
}

void write_ipmd_trace(const IpmdTrace& trace, const std::filesystem::path& path) {
    CsvWriter csv({"k", "dual_obj", "grad_norm", "policy_log_gap", "reward_span_err"});
    for (size_t k = 0; k < trace.iterations.size(); ++k) {
        const auto& it = trace.iterations[k];
        csv.add_row({static_cast<double>(k), it.dual_obj, it.grad_norm, it.policy_log_gap,
                     it.reward_span_err});
    }
    csv.write(path);
}

FeatureTable parse_features(const json& doc, int n_states, int n_actions) {
    reject_unknown_keys(doc, {"kind", "dim", "tiles", "seed"}, "features");
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "one_hot") return FeatureTable::one_hot(n_states, n_actions);
    if (kind == "tiled") return FeatureTable::tiled(n_states, n_actions, doc.value("tiles", 2));
    if (kind == "gaussian")
        return FeatureTable::gaussian(n_states, n_actions, doc.at("dim").get<int>(),
                                      doc.value("seed", static_cast<std::uint64_t>(0)));
    throw ConfigError("feature kind must be \"one_hot\", \"tiled\", or \"gaussian\"");
}

} // namespace

int cmd_irl(const CommonFlags& flags) {
    json config = load_config(flags.config);
    reject_unknown_keys(config,
                        {"env_path", "env_spec", "features", "tau", "expert", "K", "horizons",
                         "alpha0", "reg_weight", "inner", "seeds", "out"},
                        "irl config");
    const ResolvedEnv env = resolve_env(config);
    const double tau = config.value("tau", 1.0);
    const double alpha0 = config.value("alpha0", 1.0);

    FeatureTable features = [&] {
        if (config.contains("features"))
            return parse_features(config["features"], env.mdp.n_states(), env.mdp.n_actions());
        if (env.features) return *env.features;
        throw ConfigError("irl config needs \"features\" (or a chain_features env)");
    }();

    if (!config.contains("expert")) throw ConfigError("irl config needs \"expert\"");
    const json& expert_cfg = config["expert"];
    reject_unknown_keys(expert_cfg, {"demos_path", "theta_true", "n_samples", "seed"}, "expert");

    IpmdOptions options;
    options.regularization_weight = config.value("reg_weight", 0.05);
    if (config.contains("inner")) {
        const json& inner = config["inner"];
        reject_unknown_keys(inner, {"critic", "eta", "n_inner", "agent_samples", "expert_batch"},
                            "inner");
        if (inner.contains("critic")) options.inner_critic = parse_critic(inner["critic"]);
        options.inner_eta = inner.value("eta", options.inner_eta);
        options.n_inner = inner.value("n_inner", options.n_inner);
        options.agent_samples = inner.value("agent_samples", options.agent_samples);
        options.expert_batch = inner.value("expert_batch", options.expert_batch);
    }

    Demonstrations expert_demos;
    std::optional<StochasticPolicy> expert_policy;
    if (expert_cfg.contains("demos_path")) {
        const std::string path = expert_cfg["demos_path"].get<std::string>();
        if (!std::filesystem::exists(path))
            throw DataError("demonstrations file not found: " + path);
        expert_demos = load_demonstrations(path);
        expert_demos.empirical_features = feature_mean(features, expert_demos.pairs);
    } else {
        if (!expert_cfg.contains("theta_true"))
            throw ConfigError("expert needs \"demos_path\" or \"theta_true\"");
        Vector theta_true(expert_cfg["theta_true"].size());
        for (Eigen::Index i = 0; i < theta_true.size(); ++i)
            theta_true[i] = expert_cfg["theta_true"][static_cast<size_t>(i)].get<double>();
        RewardModel truth{theta_true, features, 0.0};
        const int n_samples = expert_cfg.value("n_samples", 100000);
        const std::uint64_t expert_seed =
            expert_cfg.value("seed", static_cast<std::uint64_t>(0));
        auto [pi_e, demos] = generate_expert(env.mdp, truth, tau, n_samples, expert_seed);
        expert_policy = std::move(pi_e);
        expert_demos = std::move(demos);
        options.true_reward = RewardModel{theta_true, features, 0.0};
    }

    const auto horizons = parse_horizons(config);
    const auto seeds = parse_seeds(config, flags);
    const auto out_dir = resolve_out(flags, config);

    struct Job {
        int horizon;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (int k : horizons)
        for (auto seed : seeds) jobs.push_back({k, seed});

    auto results = run_jobs<IrlJobResult>(
        static_cast<int>(jobs.size()), flags.workers, [&](int i) {
            const auto& job = jobs[static_cast<size_t>(i)];
            const IpmdResult run = run_ipmd(env.mdp, features, expert_demos, tau, job.horizon,
                                            alpha0, options, job.seed);
            const std::string tag =
                "K" + std::to_string(job.horizon) + "_seed" + std::to_string(job.seed);
            write_ipmd_trace(run.trace, out_dir / ("irl_trace_" + tag + ".csv"));

            ordered_json reward_doc;
            reward_doc["theta"] = std::vector<double>(
                run.reward.theta.data(), run.reward.theta.data() + run.reward.theta.size());
            reward_doc["regularization_weight"] = run.reward.regularization_weight;
            std::ofstream rout(out_dir / ("learned_reward_" + tag + ".json"), std::ios::binary);
            rout << reward_doc.dump(2) << '\n';

            IrlJobResult res;
            if (!run.trace.iterations.empty()) {
                res.final_grad_norm = run.trace.iterations.back().grad_norm;
                res.reward_span_err = run.trace.iterations.back().reward_span_err;
                double acc = 0.0;
                for (const auto& it : run.trace.iterations) acc += it.grad_norm * it.grad_norm;
                res.mean_sq_grad = acc / static_cast<double>(run.trace.iterations.size());
            }
            if (expert_policy) res.policy_tv = policy_tv_max(run.policy, *expert_policy);
            return res;
        });

    ordered_json summary;
    summary["command"] = "irl";
    summary["env"] = env.origin;
    summary["tau"] = tau;
    summary["alpha0"] = alpha0;
    summary["seeds"] = seeds;
    summary["horizons"] = horizons;

    ordered_json per_horizon = ordered_json::array();
    size_t idx = 0;
    for (int k : horizons) {
        std::vector<double> grads, spans, tvs, mean_sq;
        for (size_t s = 0; s < seeds.size(); ++s, ++idx) {
            const auto& res = results[idx];
            if (std::isfinite(res.final_grad_norm)) grads.push_back(res.final_grad_norm);
            if (std::isfinite(res.reward_span_err)) spans.push_back(res.reward_span_err);
            if (std::isfinite(res.policy_tv)) tvs.push_back(res.policy_tv);
            if (std::isfinite(res.mean_sq_grad)) mean_sq.push_back(res.mean_sq_grad);
        }
        ordered_json entry;
        entry["K"] = k;
        if (!grads.empty()) entry["final_grad_norm_median"] = median(grads);
        if (!mean_sq.empty()) entry["mean_sq_grad_median"] = median(mean_sq);
        if (!spans.empty()) entry["reward_span_err_median"] = median(spans);
        if (!tvs.empty()) entry["policy_tv_median"] = median(tvs);
        per_horizon.push_back(entry);
    }
    summary["per_horizon"] = per_horizon;

    std::ofstream out(out_dir / "summary.json", std::ios::binary);
    out << summary.dump(2) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify: the aggregated invariant battery
// ---------------------------------------------------------------------------

namespace {

struct CheckResult {
    std::string name;
    bool pass = false;
    double residual = 0.0;
    std::string detail;
};

TabularAmdp verify_instance(Rng& rng, int n_states, int n_actions, bool corrupt) {
    std::vector<Matrix> transition(static_cast<size_t>(n_actions),
                                   Matrix::Zero(n_states, n_states));
    for (int a = 0; a < n_actions; ++a) {
        for (int s = 0; s < n_states; ++s) {
            double sum = 0.0;
            for (int sn = 0; sn < n_states; ++sn) {
                const double e = -std::log(std::max(uniform01(rng), 1e-300));
                transition[static_cast<size_t>(a)](s, sn) = e;
                sum += e;
            }
            transition[static_cast<size_t>(a)].row(s) /= sum;
        }
        transition[static_cast<size_t>(a)] = 0.95 * transition[static_cast<size_t>(a)] +
                                             Matrix::Constant(n_states, n_states, 0.05 / n_states);
        for (int s = 0; s < n_states; ++s)
            transition[static_cast<size_t>(a)].row(s) /=
                transition[static_cast<size_t>(a)].row(s).sum();
    }
    if (corrupt) {
        // Test mode: make state 0 absorbing under every action, which breaks
        // irreducibility and must trip the battery.
        for (int a = 0; a < n_actions; ++a) {
            transition[static_cast<size_t>(a)].row(0).setZero();
            transition[static_cast<size_t>(a)](0, 0) = 1.0;
        }
    }
    Matrix cost(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) cost(s, a) = uniform01(rng);
    return TabularAmdp(std::move(transition), std::move(cost));
}

template <typename Fn>
CheckResult run_check(const std::string& name, Fn&& fn) {
    CheckResult result;
    result.name = name;
    try {
        const auto [pass, residual] = fn();
        result.pass = pass;
        result.residual = residual;
        if (!pass) result.detail = "residual above threshold";
    } catch (const Error& e) {
        result.pass = false;
        result.residual = std::numeric_limits<double>::quiet_NaN();
        result.detail = e.what();
    }
    return result;
}

} // namespace

int cmd_verify(const CommonFlags& flags) {
    json config = json::object();
    if (!flags.config.empty()) config = load_config(flags.config);
    reject_unknown_keys(config, {"seed", "corrupt", "out"}, "verify config");
    const std::uint64_t seed =
        flags.seed ? *flags.seed : config.value("seed", static_cast<std::uint64_t>(20250101));
    const bool corrupt = config.value("corrupt", false);

    std::vector<CheckResult> checks;
    Rng rng = make_rng(seed);

    checks.push_back(run_check("performance_difference_identity", [&]() {
        double worst = 0.0;
        for (int trial = 0; trial < 40; ++trial) {
            const TabularAmdp mdp = verify_instance(rng, 3 + trial % 6, 2 + trial % 3, corrupt);
            const auto pi = StochasticPolicy::random(mdp.n_states(), mdp.n_actions(), rng);
            const auto pi_next = StochasticPolicy::random(mdp.n_states(), mdp.n_actions(), rng);
            const auto h = trial % 2 ? RegularizerSpec::negative_entropy(1.0)
                                     : RegularizerSpec::zero();
            worst = std::max(worst, performance_difference_check(mdp, pi, pi_next, h));
        }
        return std::make_pair(worst <= 1e-9, worst);
    }));

    checks.push_back(run_check("stationary_fixed_point", [&]() {
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const TabularAmdp mdp = verify_instance(rng, 4 + trial % 5, 3, corrupt);
            const auto pi = StochasticPolicy::random(mdp.n_states(), 3, rng);
            const Matrix p_pi = policy_transition_matrix(mdp, pi);
            const auto stat = stationary_distribution(p_pi);
            worst = std::max(
                worst, (p_pi.transpose() * stat.kappa - stat.kappa).lpNorm<Eigen::Infinity>());
        }
        return std::make_pair(worst <= 1e-10, worst);
    }));

    checks.push_back(run_check("prox_closed_form_vs_numeric", [&]() {
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            const int n = 2 + trial % 5;
            ProxProblem prox;
            prox.q_row = Vector(n);
            for (int i = 0; i < n; ++i) prox.q_row[i] = 2.0 * uniform01(rng) - 1.0;
            prox.prev_policy_row = random_simplex_point(n, rng);
            prox.eta = 0.05 + 3.0 * uniform01(rng);
            prox.regularizer = trial % 2 ? RegularizerSpec::negative_entropy(uniform01(rng))
                                         : RegularizerSpec::zero();
            const Vector closed = actor_prox_closed_form(prox);
            const Vector numeric = actor_prox_numeric(prox, BregmanGeometry::kl());
            worst = std::max(worst, (closed - numeric).lpNorm<1>());
        }
        return std::make_pair(worst <= 1e-8, worst);
    }));

    checks.push_back(run_check("three_point_inequality", [&]() {
        double worst = -std::numeric_limits<double>::infinity();
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 2 + trial % 4;
            ProxProblem prox;
            prox.q_row = Vector(n);
            for (int i = 0; i < n; ++i) prox.q_row[i] = 2.0 * uniform01(rng) - 1.0;
            prox.prev_policy_row = random_simplex_point(n, rng);
            prox.eta = 0.1 + 2.0 * uniform01(rng);
            prox.regularizer = RegularizerSpec::negative_entropy(0.5);
            const Vector solution = actor_prox_closed_form(prox);
            for (int c = 0; c < 10; ++c) {
                const Vector cmp = random_simplex_point(n, rng);
                worst = std::max(worst,
                                 three_point_check(prox, BregmanGeometry::kl(), solution, cmp));
            }
        }
        return std::make_pair(worst <= 1e-9, worst);
    }));

    checks.push_back(run_check("span_contraction_certificate", [&]() {
        double worst_violation = -1.0;
        for (int cfg = 0; cfg < 5; ++cfg) {
            const TabularAmdp mdp = verify_instance(rng, 3 + cfg, 2, corrupt);
            const auto pi = StochasticPolicy::random(mdp.n_states(), 2, rng);
            const int j = 1 + cfg % 2;
            const double gamma = contraction_coefficient(mdp, pi, j);
            SpanOperator op(mdp, pi, RegularizerSpec::zero(), j);
            for (int pair = 0; pair < 200; ++pair) {
                Matrix p(mdp.n_states(), 2), q(mdp.n_states(), 2);
                for (int s = 0; s < mdp.n_states(); ++s)
                    for (int a = 0; a < 2; ++a) {
                        p(s, a) = 2.0 * uniform01(rng) - 1.0;
                        q(s, a) = 2.0 * uniform01(rng) - 1.0;
                    }
                const double before = span_seminorm(Matrix(p - q));
                if (before < 1e-12) continue;
                const double after = span_seminorm(Matrix(op.apply(p) - op.apply(q)));
                worst_violation = std::max(worst_violation, after - gamma * before);
            }
        }
        return std::make_pair(worst_violation <= 1e-12, worst_violation);
    }));

    checks.push_back(run_check("spmd_monotone_decrease", [&]() {
        const TabularAmdp mdp = verify_instance(rng, 5, 3, corrupt);
        StepSchedule schedule;
        schedule.kind = StepSchedule::Kind::inv_mu_k;
        auto [pi, trace] = run_spmd(mdp, RegularizerSpec::negative_entropy(1.0),
                                    BregmanGeometry::kl(), schedule, CriticSpec{}, 60, seed);
        const auto report = monotonicity_check(trace);
        return std::make_pair(report.applicable && report.ok,
                              std::max(report.max_rho_increase, report.max_psi));
    }));

    checks.push_back(run_check("dual_gradient_finite_difference", [&]() {
        const TabularAmdp mdp = verify_instance(rng, 4, 3, corrupt);
        const FeatureTable features = FeatureTable::one_hot(4, 3);
        const Matrix d_expert =
            state_action_distribution(mdp, StochasticPolicy::random(4, 3, rng));
        Vector expert_mean = Vector::Zero(features.dim());
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) expert_mean += d_expert(s, a) * features.row(s, a);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            Vector theta(features.dim());
            for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = 2.0 * uniform01(rng) - 1.0;
            RewardModel reward{theta, features, 0.05};
            const TabularAmdp themed = mdp.with_cost(reward.cost_table());
            const auto ref = soft_optimum_rvi(themed, RegularizerSpec::negative_entropy(1.0));
            const Matrix d_agent = state_action_distribution(mdp, ref.pi_star);
            const Vector g = dual_gradient_exact(reward, d_expert, d_agent);
            const double eps = 1e-5;
            for (Eigen::Index i = 0; i < theta.size(); ++i) {
                RewardModel plus{theta, features, 0.05};
                plus.theta[i] += eps;
                RewardModel minus{theta, features, 0.05};
                minus.theta[i] -= eps;
                const double fd = (dual_objective_exact(mdp, plus, expert_mean, 1.0) -
                                   dual_objective_exact(mdp, minus, expert_mean, 1.0)) /
                                  (2.0 * eps);
                worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
            }
        }
        return std::make_pair(worst <= 1e-4, worst);
    }));

    checks.push_back(run_check("schedule_telescoping", [&]() {
        StepSchedule a;
        a.kind = StepSchedule::Kind::constant_optimized;
        a.distance_estimate = 1.0;
        a.lipschitz_aggregate = 1.0;
        a.horizon = 100;
        StepSchedule b;
        b.kind = StepSchedule::Kind::inv_mu_k;
        b.mu = 1.0;
        b.horizon = 100;
        StepSchedule c;
        c.kind = StepSchedule::Kind::weighted_2_over_mu_k;
        c.mu = 1.0;
        c.horizon = 100;
        const bool ok = a.telescoping_holds() && b.telescoping_holds() && c.telescoping_holds();
        return std::make_pair(ok, 0.0);
    }));

    bool all_pass = true;
    for (const auto& check : checks) all_pass = all_pass && check.pass;

    ordered_json report;
    report["seed"] = seed;
    report["corrupt"] = corrupt;
    report["all_pass"] = all_pass;
    ordered_json items = ordered_json::array();
    for (const auto& check : checks) {
        ordered_json item;
        item["name"] = check.name;
        item["pass"] = check.pass;
        if (std::isfinite(check.residual)) item["residual"] = check.residual;
        else item["residual"] = nullptr;
        if (!check.detail.empty()) item["detail"] = check.detail;
        items.push_back(item);
    }
    report["checks"] = items;

    if (flags.out) {
        std::filesystem::create_directories(*flags.out);
        std::ofstream out(*flags.out / "verify_report.json", std::ios::binary);
        out << report.dump(2) << '\n';
    }
    std::cout << report.dump(2) << '\n';

    return all_pass ? kExitOk : kExitInvariant;
}

} // namespace amdp::cli
