#pragma once

#include <array>
#include <optional>

#include "tarl/config.hpp"
#include "tarl/rng.hpp"

namespace tarl {

// Plant state for one episode.  sim_time is maintained as steps * dt so
// the monitor's time-bound comparison is exact at block boundaries.
struct WorldState {
    double position = 0.0;
    double sim_time = 0.0;
    int steps = 0;
    bool terrain = false;  // inside the active mud interval
    std::optional<std::array<double, 2>> episode_mud;
};

enum class VerdictReason { ReachedWithinBounds, Timeout };

struct MonitorVerdict {
    bool success = false;
    double reward_total = 0.0;
    VerdictReason reason = VerdictReason::Timeout;
};

// Places the shuttle at g1 and draws this episode's mud activation.
WorldState reset(const EnvConfig& config, Rng& rng);

// Advances one dt step under commanded velocity v; the mud factor uses
// the terrain at the pre-step position.
WorldState apply_velocity(const WorldState& state, double v, const EnvConfig& config);

struct SensorReading {
    double odometry = 0.0;
    bool terrain = false;
    int odometry_bin = 0;
};

SensorReading read_sensors(const WorldState& state, const EnvConfig& config);

// Success once within epsilon_spec of the goal inside the time bound;
// failure once the time bound is exceeded; absent while in transit.
std::optional<MonitorVerdict> judge(const WorldState& state, double goal,
                                    const EnvConfig& config);

}  // namespace tarl
