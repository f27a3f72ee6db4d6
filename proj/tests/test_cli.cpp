#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "amdp/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string binary_path() {
    const char* env = std::getenv("AMDP_MIRROR_BIN");
    REQUIRE_MESSAGE(env != nullptr, "AMDP_MIRROR_BIN must point at the amdp-mirror binary");
    return env;
}

int run_cli(const std::string& args) {
    const std::string cmd = binary_path() + " " + args + " 2>/dev/null >/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("amdp_mirror_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), ("missing file: " + path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const std::string kTwoStateSpec = R"({"env_spec": {"family": "two_state_analytic",
  "n_states": 2, "n_actions": 2, "p": 0.9, "q": 0.5, "seed": 3}})";

} // namespace

TEST_CASE("gen-env writes a loadable environment and respects --force") {
    const fs::path dir = fresh_dir("gen_env");
    const fs::path config = dir / "config.json";
    write_file(config, kTwoStateSpec);

    CHECK(run_cli("gen-env --config " + config.string() + " --out " + dir.string()) == 0);
    const amdp::TabularAmdp mdp = amdp::load_amdp(dir / "env.json");
    CHECK(mdp.n_states() == 2);

    SUBCASE("overwrite without --force exits with the data code") {
        CHECK(run_cli("gen-env --config " + config.string() + " --out " + dir.string()) == 4);
        CHECK(run_cli("gen-env --config " + config.string() + " --out " + dir.string() +
                      " --force") == 0);
    }

    SUBCASE("same seed produces byte-identical files") {
        const std::string first = read_file(dir / "env.json");
        CHECK(run_cli("gen-env --config " + config.string() + " --out " + dir.string() +
                      " --force") == 0);
        CHECK(read_file(dir / "env.json") == first);
    }

    SUBCASE("invalid sizes exit with the config code") {
        const fs::path bad = dir / "bad.json";
        write_file(bad, R"({"env_spec": {"family": "random_dirichlet", "n_states": 0,
                           "n_actions": 2}})");
        CHECK(run_cli("gen-env --config " + bad.string() + " --out " + dir.string()) == 2);
    }

    SUBCASE("unknown keys exit with the config code") {
        const fs::path bad = dir / "unknown.json";
        write_file(bad, R"({"env_spec": {"family": "random_dirichlet", "n_states": 3,
                           "n_actions": 2}, "bogus": true})");
        CHECK(run_cli("gen-env --config " + bad.string() + " --out " + dir.string()) == 2);
    }
}

TEST_CASE("solve emits traces and a summary") {
    const fs::path dir = fresh_dir("solve");
    const fs::path config = dir / "config.json";
    write_file(config, R"({
      "env_spec": {"family": "random_dirichlet", "n_states": 4, "n_actions": 2,
                   "mixing_floor": 0.1, "seed": 9},
      "regularizer": {"kind": "negative_entropy", "weight": 1.0},
      "schedule": {"kind": "inv_mu_k"},
      "critic": {"type": "exact"},
      "K": 30,
      "seeds": [1, 2]
    })");

    REQUIRE(run_cli("solve --config " + config.string() + " --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "trace_K30_seed1.csv"));
    CHECK(fs::exists(dir / "trace_K30_seed2.csv"));
    const json summary = json::parse(read_file(dir / "summary.json"));
    CHECK(summary["command"] == "solve");
    CHECK(summary["per_horizon"][0].contains("final_gap_median"));

    SUBCASE("reruns are byte-identical") {
        const std::string trace = read_file(dir / "trace_K30_seed1.csv");
        const std::string summary_text = read_file(dir / "summary.json");
        REQUIRE(run_cli("solve --config " + config.string() + " --out " + dir.string()) == 0);
        CHECK(read_file(dir / "trace_K30_seed1.csv") == trace);
        CHECK(read_file(dir / "summary.json") == summary_text);
    }

    SUBCASE("workers do not change the bytes") {
        const std::string trace = read_file(dir / "trace_K30_seed2.csv");
        REQUIRE(run_cli("solve --config " + config.string() + " --out " + dir.string() +
                        " --workers 2") == 0);
        CHECK(read_file(dir / "trace_K30_seed2.csv") == trace);
    }
}

TEST_CASE("solve with K = 0 marks the empty run") {
    const fs::path dir = fresh_dir("solve_k0");
    const fs::path config = dir / "config.json";
    write_file(config, R"({
      "env_spec": {"family": "random_dirichlet", "n_states": 3, "n_actions": 2, "seed": 1},
      "regularizer": {"kind": "negative_entropy", "weight": 1.0},
      "schedule": {"kind": "inv_mu_k"},
      "K": 0,
      "seeds": [1]
    })");
    REQUIRE(run_cli("solve --config " + config.string() + " --out " + dir.string()) == 0);
    const json summary = json::parse(read_file(dir / "summary.json"));
    CHECK(summary["per_horizon"][0]["note"] == "no iterations");
    // Header-only trace.
    const std::string trace = read_file(dir / "trace_K0_seed1.csv");
    CHECK(trace.find("k,rho,gap") == 0);
    CHECK(trace.find('\n') == trace.size() - 1);
}

TEST_CASE("solve records the plateau for noisy critics") {
    const fs::path dir = fresh_dir("solve_noisy");
    const fs::path config = dir / "config.json";
    write_file(config, R"({
      "env_spec": {"family": "random_dirichlet", "n_states": 4, "n_actions": 2,
                   "mixing_floor": 0.1, "seed": 9},
      "regularizer": {"kind": "negative_entropy", "weight": 1.0},
      "schedule": {"kind": "inv_mu_k"},
      "critic": {"type": "noisy", "bias_bound": 0.1},
      "K": 40,
      "seeds": [1, 2, 3]
    })");
    REQUIRE(run_cli("solve --config " + config.string() + " --out " + dir.string()) == 0);
    const json summary = json::parse(read_file(dir / "summary.json"));
    CHECK(summary.contains("plateau_level"));
    CHECK(summary["plateau_level"].get<double>() > 0.0);
}

TEST_CASE("irl command") {
    const fs::path dir = fresh_dir("irl");
    const fs::path config = dir / "config.json";
    write_file(config, R"({
      "env_spec": {"family": "chain_features", "n_states": 4, "n_actions": 3,
                   "features": "one_hot", "seed": 5},
      "tau": 1.0,
      "expert": {"theta_true": [0.2, 0.9, 0.1, 0.8, 0.3, 0.4, 0.7, 0.2, 0.5, 0.6, 0.1, 0.9],
                 "n_samples": 4000, "seed": 2},
      "K": 15,
      "alpha0": 1.0,
      "seeds": [1, 2]
    })");

    REQUIRE(run_cli("irl --config " + config.string() + " --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "irl_trace_K15_seed1.csv"));
    CHECK(fs::exists(dir / "irl_trace_K15_seed2.csv"));
    CHECK(fs::exists(dir / "learned_reward_K15_seed1.json"));
    const json summary = json::parse(read_file(dir / "summary.json"));
    CHECK(summary["command"] == "irl");
    CHECK(summary["per_horizon"][0].contains("policy_tv_median"));

    SUBCASE("trace header matches the export contract") {
        const std::string trace = read_file(dir / "irl_trace_K15_seed1.csv");
        CHECK(trace.rfind("k,dual_obj,grad_norm,policy_log_gap,reward_span_err\n", 0) == 0);
    }

    SUBCASE("reruns are byte-identical") {
        const std::string trace = read_file(dir / "irl_trace_K15_seed1.csv");
        REQUIRE(run_cli("irl --config " + config.string() + " --out " + dir.string()) == 0);
        CHECK(read_file(dir / "irl_trace_K15_seed1.csv") == trace);
    }
}

TEST_CASE("irl demonstrations failure modes") {
    const fs::path dir = fresh_dir("irl_data");
    const fs::path config = dir / "config.json";

    SUBCASE("missing demonstrations file exits with the data code") {
        write_file(config, R"({
          "env_spec": {"family": "chain_features", "n_states": 4, "n_actions": 3,
                       "features": "one_hot", "seed": 5},
          "expert": {"demos_path": ")" + (dir / "missing.jsonl").string() + R"("},
          "K": 5, "seeds": [1]
        })");
        CHECK(run_cli("irl --config " + config.string() + " --out " + dir.string()) == 4);
    }

    SUBCASE("empty demonstrations file exits with the data code") {
        const fs::path demos = dir / "empty.jsonl";
        write_file(demos, R"({"type":"header","true_reward_id":"x","solver_tolerance":0,"seed":0,"n_pairs":0}
)");
        write_file(config, R"({
          "env_spec": {"family": "chain_features", "n_states": 4, "n_actions": 3,
                       "features": "one_hot", "seed": 5},
          "expert": {"demos_path": ")" + demos.string() + R"("},
          "K": 5, "seeds": [1]
        })");
        CHECK(run_cli("irl --config " + config.string() + " --out " + dir.string()) == 4);
    }
}

TEST_CASE("demonstrations round trip through the JSONL format") {
    const fs::path dir = fresh_dir("demos");
    amdp::Demonstrations demos;
    demos.pairs = {{0, 1}, {2, 0}, {1, 2}};
    demos.source = {"true-reward-7", 1e-13, 42};
    amdp::save_demonstrations(demos, dir / "demos.jsonl");
    const amdp::Demonstrations back = amdp::load_demonstrations(dir / "demos.jsonl");
    CHECK(back.pairs == demos.pairs);
    CHECK(back.source.true_reward_id == demos.source.true_reward_id);
    CHECK(back.source.seed == demos.source.seed);
}

TEST_CASE("verify command") {
    const fs::path dir = fresh_dir("verify");

    SUBCASE("default battery passes and emits a schema-conforming report") {
        CHECK(run_cli("verify --seed 20250101 --out " + dir.string()) == 0);
        const json report = json::parse(read_file(dir / "verify_report.json"));
        CHECK(report["all_pass"] == true);

        // Validate against the published schema by hand: required keys, types,
        // no extras beyond the schema's properties.
        const fs::path schema_path =
            fs::path(__FILE__).parent_path().parent_path() / "tools/schema/verify_report.schema.json";
        const json schema = json::parse(read_file(schema_path));
        for (const auto& key : schema["required"]) CHECK(report.contains(key.get<std::string>()));
        const auto& props = schema["properties"];
        for (const auto& [key, value] : report.items()) {
            (void)value;
            CHECK(props.contains(key));
        }
        REQUIRE(report["checks"].is_array());
        CHECK(report["checks"].size() >= 5);
        for (const auto& check : report["checks"]) {
            CHECK(check.contains("name"));
            CHECK(check.contains("pass"));
            CHECK(check.contains("residual"));
            CHECK(check["pass"].is_boolean());
        }
    }

    SUBCASE("injected corruption trips the battery with exit 5") {
        const fs::path config = dir / "corrupt.json";
        write_file(config, R"({"seed": 20250101, "corrupt": true})");
        CHECK(run_cli("verify --config " + config.string() + " --out " + dir.string()) == 5);
        const json report = json::parse(read_file(dir / "verify_report.json"));
        CHECK(report["all_pass"] == false);
    }
}
