#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "amdp/amdp_core.hpp"

namespace amdp {

/**
 * JSON document for an AMDP:
 *   {"n_states": S, "n_actions": A,
 *    "transition": [[[P(s'|s,a) ...] ...] ...],   // indexed [s][a][s']
 *    "cost": [[c(s,a) ...] ...]}
 * Doubles round-trip bitwise (shortest-round-trip formatting).
 */
[[nodiscard]] std::string amdp_to_json(const TabularAmdp& mdp);
[[nodiscard]] TabularAmdp amdp_from_json(const std::string& text);

void save_amdp(const TabularAmdp& mdp, const std::filesystem::path& path);
[[nodiscard]] TabularAmdp load_amdp(const std::filesystem::path& path);

/// Provenance of a demonstration set.
struct DemoSource {
    std::string true_reward_id;
    double solver_tolerance = 0.0;
    std::uint64_t seed = 0;
};

/**
 * Expert state-action samples. `empirical_features` is the mean feature
 * vector over the pairs; it is empty until a feature map has been attached
 * (generate_expert fills it from the true reward's features).
 */
struct Demonstrations {
    std::vector<std::pair<int, int>> pairs;
    DemoSource source;
    Vector empirical_features;
};

/**
 * JSON-lines file: a header record
 *   {"type":"header","true_reward_id":...,"solver_tolerance":...,"seed":...,"n_pairs":...}
 * followed by one {"s": int, "a": int} record per pair.
 */
void save_demonstrations(const Demonstrations& demos, const std::filesystem::path& path);
[[nodiscard]] Demonstrations load_demonstrations(const std::filesystem::path& path);

/**
 * Deterministic CSV writer. Doubles are printed with %.17g so equal inputs
 * produce byte-identical files.
 */
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(const std::vector<double>& values);
    void write(const std::filesystem::path& path) const;
    [[nodiscard]] std::string str() const;

    static std::string format_double(double x);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

} // namespace amdp
