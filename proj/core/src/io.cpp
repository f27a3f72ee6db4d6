#include "amdp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace amdp {

using nlohmann::json;

std::string amdp_to_json(const TabularAmdp& mdp) {
    json doc;
    doc["n_states"] = mdp.n_states();
    doc["n_actions"] = mdp.n_actions();
    json transition = json::array();
    for (int s = 0; s < mdp.n_states(); ++s) {
        json per_action = json::array();
        for (int a = 0; a < mdp.n_actions(); ++a) {
            json row = json::array();
            for (int sn = 0; sn < mdp.n_states(); ++sn) row.push_back(mdp.transition(a)(s, sn));
            per_action.push_back(std::move(row));
        }
        transition.push_back(std::move(per_action));
    }
    doc["transition"] = std::move(transition);
    json cost = json::array();
    for (int s = 0; s < mdp.n_states(); ++s) {
        json row = json::array();
        for (int a = 0; a < mdp.n_actions(); ++a) row.push_back(mdp.cost(s, a));
        cost.push_back(std::move(row));
    }
    doc["cost"] = std::move(cost);
    return doc.dump(2);
}

TabularAmdp amdp_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid AMDP JSON: ") + e.what());
    }
    try {
        const int n_states = doc.at("n_states").get<int>();
        const int n_actions = doc.at("n_actions").get<int>();
        if (n_states <= 0 || n_actions <= 0)
            throw DataError("AMDP JSON: n_states and n_actions must be positive");
        const auto& transition = doc.at("transition");
        const auto& cost = doc.at("cost");
        if (static_cast<int>(transition.size()) != n_states ||
            static_cast<int>(cost.size()) != n_states)
            throw DataError("AMDP JSON: outer dimensions do not match n_states");

        std::vector<Matrix> p(static_cast<size_t>(n_actions),
                              Matrix::Zero(n_states, n_states));
        Matrix c(n_states, n_actions);
        for (int s = 0; s < n_states; ++s) {
            if (static_cast<int>(transition.at(s).size()) != n_actions ||
                static_cast<int>(cost.at(s).size()) != n_actions)
                throw DataError("AMDP JSON: action dimension mismatch at state " +
                                std::to_string(s));
            for (int a = 0; a < n_actions; ++a) {
                const auto& row = transition.at(s).at(a);
                if (static_cast<int>(row.size()) != n_states)
                    throw DataError("AMDP JSON: transition row length mismatch");
                for (int sn = 0; sn < n_states; ++sn)
                    p[static_cast<size_t>(a)](s, sn) = row.at(sn).get<double>();
                c(s, a) = cost.at(s).at(a).get<double>();
            }
        }
        return TabularAmdp(std::move(p), std::move(c));
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid AMDP JSON: ") + e.what());
    }
}

void save_amdp(const TabularAmdp& mdp, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << amdp_to_json(mdp) << '\n';
}

TabularAmdp load_amdp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return amdp_from_json(buf.str());
}

void save_demonstrations(const Demonstrations& demos, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    json header;
    header["type"] = "header";
    header["true_reward_id"] = demos.source.true_reward_id;
    header["solver_tolerance"] = demos.source.solver_tolerance;
    header["seed"] = demos.source.seed;
    header["n_pairs"] = demos.pairs.size();
    out << header.dump() << '\n';
    for (const auto& [s, a] : demos.pairs) {
        json rec;
        rec["s"] = s;
        rec["a"] = a;
        out << rec.dump() << '\n';
    }
}

Demonstrations load_demonstrations(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open demonstrations file " + path.string());
    Demonstrations demos;
    std::string line;
    bool have_header = false;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("demonstrations line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!have_header) {
            if (!rec.contains("type") || rec["type"] != "header")
                throw DataError("demonstrations file must start with a header record");
            demos.source.true_reward_id = rec.value("true_reward_id", std::string());
            demos.source.solver_tolerance = rec.value("solver_tolerance", 0.0);
            demos.source.seed = rec.value("seed", static_cast<std::uint64_t>(0));
            have_header = true;
            continue;
        }
        if (!rec.contains("s") || !rec.contains("a"))
            throw DataError("demonstrations line " + std::to_string(line_no) +
                            ": expected {\"s\": int, \"a\": int}");
        demos.pairs.emplace_back(rec["s"].get<int>(), rec["a"].get<int>());
    }
    if (!have_header) throw DataError("demonstrations file " + path.string() + " is empty");
    if (demos.pairs.empty())
        throw DataError("demonstrations file " + path.string() + " contains no pairs");
    return demos;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(const std::vector<double>& values) {
    if (values.size() != header_.size())
        throw DimensionError("CSV row width does not match the header");
    rows_.push_back(values);
}

std::string CsvWriter::format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string CsvWriter::str() const {
    std::string out;
    for (size_t i = 0; i < header_.size(); ++i) {
        if (i) out += ',';
        out += header_[i];
    }
    out += '\n';
    for (const auto& row : rows_) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            // Integer-valued columns (iteration counters) print without exponent.
            if (row[i] == static_cast<long long>(row[i]) && std::abs(row[i]) < 1e15)
                out += std::to_string(static_cast<long long>(row[i]));
            else
                out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

void CsvWriter::write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << str();
}

} // namespace amdp
