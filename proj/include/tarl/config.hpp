#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tarl {

// 1D shuttle environment parameters.  Distances in meters, times in
// seconds; one actuator publish advances the world by dt.
struct EnvConfig {
    double g1 = 0.0;
    double g2 = 10.0;
    double epsilon_spec = 0.05;   // goal precision
    double dt = 0.01;
    double t_max = 1.2;           // monitor time bound
    bool mud_enabled = true;
    double mud_prob = 0.5;        // per-episode chance the mud is active
    std::array<double, 2> mud_region{4.0, 6.0};
    double mud_factor = 0.2;      // velocity multiplier inside mud
    int odometry_bins = 20;
    std::array<double, 2> odometry_range{0.0, 10.0};
    double reward_success = 100.0;
    double reward_failure = -100.0;
    double step_penalty = 0.0;    // per-publish reward

    void validate() const;  // throws ConfigError
};

// Returns the same environment with the mud's dynamic effect removed
// (factor 1) while the terrain sensor still varies; used as the
// expected-conditions baseline.
EnvConfig offline_variant(EnvConfig config);

// Temporal-difference learner parameters.
struct LearnParams {
    double alpha = 0.1;
    double gamma = 0.9995;
    double kappa = 0.5;    // flow-scaling coefficient
    int episodes = 3000;
    int block = 200;       // episodes per convergence block
    double tol = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

// Guarded-mutation search parameters.
struct RepairParams {
    std::vector<double> mutation_factors{0.25, 0.5, 2.0, 4.0, 8.0};
    double epsilon0 = 0.3;
    double epsilon_min = 0.05;
    double epsilon_decay = 0.995;
    int search_episodes = 400;
    int eval_episodes = 200;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Config {
    EnvConfig world;
    LearnParams rl;
    RepairParams repair;
};

// Strict reader for a flat TOML subset: [world]/[rl]/[repair] sections,
// keys named exactly as the struct fields, values restricted to
// integers, floats, booleans, and bracketed number arrays.  Unknown
// sections or keys are rejected (ConfigError), as are invalid values.
Config parse_config(const std::string& text, const std::string& path = "<config>");
Config load_config(const std::string& path);

}  // namespace tarl
