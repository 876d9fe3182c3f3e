#include "tarl/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tarl/error.hpp"

namespace tarl {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& path, int line, const std::string& message) {
    throw ConfigError(path + ":" + std::to_string(line) + ": " + message);
}

double parse_number(const std::string& text, const std::string& path, int line) {
    const std::string t = trim(text);
    if (t.empty()) fail(path, line, "expected a number");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE)
        fail(path, line, "invalid number '" + t + "'");
    return v;
}

long long parse_integer(const std::string& text, const std::string& path, int line) {
    const std::string t = trim(text);
    if (t.empty() || t.find_first_of(".eE") != std::string::npos)
        fail(path, line, "expected an integer, got '" + t + "'");
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || errno == ERANGE)
        fail(path, line, "invalid integer '" + t + "'");
    return v;
}

std::uint64_t parse_seed(const std::string& text, const std::string& path, int line) {
    const std::string t = trim(text);
    if (t.empty() || t[0] == '-' || t.find_first_of(".eE") != std::string::npos)
        fail(path, line, "seed must be a non-negative integer");
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size() || errno == ERANGE)
        fail(path, line, "invalid seed '" + t + "'");
    return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& text, const std::string& path, int line) {
    const std::string t = trim(text);
    if (t == "true") return true;
    if (t == "false") return false;
    fail(path, line, "expected true or false, got '" + t + "'");
}

std::vector<double> parse_array(const std::string& text, const std::string& path, int line) {
    const std::string t = trim(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
        fail(path, line, "expected a bracketed number array");
    std::vector<double> out;
    std::string inner = t.substr(1, t.size() - 2);
    size_t start = 0;
    while (true) {
        size_t comma = inner.find(',', start);
        std::string item = inner.substr(start, comma == std::string::npos ? std::string::npos
                                                                          : comma - start);
        if (!trim(item).empty()) out.push_back(parse_number(item, path, line));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) fail(path, line, "array must not be empty");
    return out;
}

std::array<double, 2> parse_pair(const std::string& text, const std::string& path, int line) {
    std::vector<double> v = parse_array(text, path, line);
    if (v.size() != 2) fail(path, line, "expected exactly two numbers");
    return {v[0], v[1]};
}

// Strips a trailing # comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        else if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

int checked_count(long long v, const std::string& what, const std::string& path, int line) {
    if (v < 0 || v > 100000000) fail(path, line, what + " out of range");
    return static_cast<int>(v);
}

}  // namespace

void EnvConfig::validate() const {
    auto bad = [](const std::string& m) { throw ConfigError("world: " + m); };
    if (!(epsilon_spec > 0)) bad("epsilon_spec must be positive");
    if (!(dt > 0)) bad("dt must be positive");
    if (!(t_max > 0)) bad("t_max must be positive");
    if (!(mud_factor > 0 && mud_factor <= 1)) bad("mud_factor must be in (0, 1]");
    if (!(mud_prob >= 0 && mud_prob <= 1)) bad("mud_prob must be in [0, 1]");
    if (!(odometry_bins >= 2)) bad("odometry_bins must be at least 2");
    if (!(odometry_range[0] < odometry_range[1])) bad("odometry_range must be increasing");
    if (!(mud_region[0] <= mud_region[1])) bad("mud_region must be ordered");
    if (mud_region[0] < odometry_range[0] || mud_region[1] > odometry_range[1])
        bad("mud_region must lie within odometry_range");
}

EnvConfig offline_variant(EnvConfig config) {
    config.mud_factor = 1.0;
    return config;
}

void LearnParams::validate() const {
    auto bad = [](const std::string& m) { throw ConfigError("rl: " + m); };
    if (!(alpha > 0 && alpha <= 1)) bad("alpha must be in (0, 1]");
    if (!(gamma >= 0 && gamma < 1)) bad("gamma must be in [0, 1)");
    if (!(kappa >= 0)) bad("kappa must be non-negative");
    if (episodes < 0) bad("episodes must be non-negative");
    if (block < 1) bad("block must be positive");
    if (!(tol > 0)) bad("tol must be positive");
}

void RepairParams::validate() const {
    auto bad = [](const std::string& m) { throw ConfigError("repair: " + m); };
    if (mutation_factors.empty()) bad("mutation_factors must not be empty");
    for (double f : mutation_factors)
        if (!(f > 0)) bad("mutation factors must be positive");
    if (!(epsilon_min >= 0 && epsilon_min <= epsilon0 && epsilon0 <= 1))
        bad("need 0 <= epsilon_min <= epsilon0 <= 1");
    if (!(epsilon_decay > 0 && epsilon_decay <= 1)) bad("epsilon_decay must be in (0, 1]");
    if (search_episodes < 0) bad("search_episodes must be non-negative");
    if (eval_episodes < 0) bad("eval_episodes must be non-negative");
}

Config parse_config(const std::string& text, const std::string& path) {
    Config cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(path, lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "world" && section != "rl" && section != "repair")
                fail(path, lineno, "unknown section [" + section + "]");
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) fail(path, lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(path, lineno, "empty key");
        if (value.empty()) fail(path, lineno, "empty value for '" + key + "'");
        if (section.empty()) fail(path, lineno, "key '" + key + "' outside any section");

        if (section == "world") {
            EnvConfig& w = cfg.world;
            if (key == "g1") w.g1 = parse_number(value, path, lineno);
            else if (key == "g2") w.g2 = parse_number(value, path, lineno);
            else if (key == "epsilon_spec") w.epsilon_spec = parse_number(value, path, lineno);
            else if (key == "dt") w.dt = parse_number(value, path, lineno);
            else if (key == "t_max") w.t_max = parse_number(value, path, lineno);
            else if (key == "mud_enabled") w.mud_enabled = parse_bool(value, path, lineno);
            else if (key == "mud_prob") w.mud_prob = parse_number(value, path, lineno);
            else if (key == "mud_region") w.mud_region = parse_pair(value, path, lineno);
            else if (key == "mud_factor") w.mud_factor = parse_number(value, path, lineno);
            else if (key == "odometry_bins")
                w.odometry_bins = checked_count(parse_integer(value, path, lineno),
                                               "odometry_bins", path, lineno);
            else if (key == "odometry_range") w.odometry_range = parse_pair(value, path, lineno);
            else if (key == "reward_success") w.reward_success = parse_number(value, path, lineno);
            else if (key == "reward_failure") w.reward_failure = parse_number(value, path, lineno);
            else if (key == "step_penalty") w.step_penalty = parse_number(value, path, lineno);
            else fail(path, lineno, "unknown key '" + key + "' in [world]");
        } else if (section == "rl") {
            LearnParams& r = cfg.rl;
            if (key == "alpha") r.alpha = parse_number(value, path, lineno);
            else if (key == "gamma") r.gamma = parse_number(value, path, lineno);
            else if (key == "kappa") r.kappa = parse_number(value, path, lineno);
            else if (key == "episodes")
                r.episodes = checked_count(parse_integer(value, path, lineno), "episodes",
                                           path, lineno);
            else if (key == "block")
                r.block = checked_count(parse_integer(value, path, lineno), "block", path, lineno);
            else if (key == "tol") r.tol = parse_number(value, path, lineno);
            else if (key == "seed") r.seed = parse_seed(value, path, lineno);
            else fail(path, lineno, "unknown key '" + key + "' in [rl]");
        } else {
            RepairParams& m = cfg.repair;
            if (key == "mutation_factors") m.mutation_factors = parse_array(value, path, lineno);
            else if (key == "epsilon0") m.epsilon0 = parse_number(value, path, lineno);
            else if (key == "epsilon_min") m.epsilon_min = parse_number(value, path, lineno);
            else if (key == "epsilon_decay") m.epsilon_decay = parse_number(value, path, lineno);
            else if (key == "search_episodes")
                m.search_episodes = checked_count(parse_integer(value, path, lineno),
                                                  "search_episodes", path, lineno);
            else if (key == "eval_episodes")
                m.eval_episodes = checked_count(parse_integer(value, path, lineno),
                                                "eval_episodes", path, lineno);
            else if (key == "seed") m.seed = parse_seed(value, path, lineno);
            else fail(path, lineno, "unknown key '" + key + "' in [repair]");
        }
    }
    cfg.world.validate();
    cfg.rl.validate();
    cfg.repair.validate();
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace tarl
