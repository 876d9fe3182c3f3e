#include "tarl/world.hpp"

#include <cmath>

namespace tarl {

namespace {

bool in_mud(double position, const std::optional<std::array<double, 2>>& mud) {
    return mud && position >= (*mud)[0] && position <= (*mud)[1];
}

}  // namespace

WorldState reset(const EnvConfig& config, Rng& rng) {
    WorldState s;
    s.position = config.g1;
    s.sim_time = 0.0;
    s.steps = 0;
    if (config.mud_enabled && rng.next_double() < config.mud_prob)
        s.episode_mud = config.mud_region;
    s.terrain = in_mud(s.position, s.episode_mud);
    return s;
}

WorldState apply_velocity(const WorldState& state, double v, const EnvConfig& config) {
    WorldState s = state;
    double factor = state.terrain ? config.mud_factor : 1.0;
    s.position = state.position + v * factor * config.dt;
    s.steps = state.steps + 1;
    s.sim_time = s.steps * config.dt;
    s.terrain = in_mud(s.position, s.episode_mud);
    return s;
}

SensorReading read_sensors(const WorldState& state, const EnvConfig& config) {
    SensorReading r;
    r.odometry = state.position;
    r.terrain = state.terrain;
    double lo = config.odometry_range[0];
    double hi = config.odometry_range[1];
    int bin = static_cast<int>(std::floor((state.position - lo) / (hi - lo) *
                                          config.odometry_bins));
    if (bin < 0) bin = 0;
    if (bin > config.odometry_bins - 1) bin = config.odometry_bins - 1;
    r.odometry_bin = bin;
    return r;
}

std::optional<MonitorVerdict> judge(const WorldState& state, double goal,
                                    const EnvConfig& config) {
    if (std::fabs(state.position - goal) <= config.epsilon_spec &&
        state.sim_time <= config.t_max) {
        MonitorVerdict v;
        v.success = true;
        v.reward_total = config.reward_success;
        v.reason = VerdictReason::ReachedWithinBounds;
        return v;
    }
    if (state.sim_time > config.t_max) {
        MonitorVerdict v;
        v.success = false;
        v.reward_total = config.reward_failure;
        v.reason = VerdictReason::Timeout;
        return v;
    }
    return std::nullopt;
}

}  // namespace tarl
