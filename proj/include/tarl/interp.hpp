#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "tarl/ast.hpp"
#include "tarl/config.hpp"
#include "tarl/taint.hpp"
#include "tarl/world.hpp"

namespace tarl::exec {

// Sensor-state sample recorded each time an instrumented statement runs.
struct HookEvent {
    int line = 0;
    int stmt_index = 0;  // position of the line in the instrumented sequence
    bool terrain = false;
    int odometry_bin = 0;
    double flow_value = 0.0;
};

struct EpisodeTrace {
    std::vector<HookEvent> events;
    // Parallel to events; the terminal verdict reward is folded into the
    // last entry, per-publish penalties into the publish's own entry.
    std::vector<double> step_rewards;
    MonitorVerdict verdict;
    int publish_count = 0;  // monitored-leg publishes only
};

// A program clone plus its bound hook sites.  site_index references the
// embedded clone's statements, so the struct is move-only like Program.
struct InstrumentedProgram {
    lang::Program program;
    std::string source_topic;
    std::string sink_topic;
    std::vector<int> lines;  // hook lines, report order; index = stmt_index
    std::unordered_map<const lang::Stmt*, int> site_index;
};

// Topic whose deliveries carry the binary terrain sensor; the odometry
// topic is the one named by the taint report.
inline constexpr const char* kTerrainTopic = "Terrain";

// Binds hook sites named by the report onto a fresh clone.  Every report
// entry must still match the program: same line, same canonical text
// (the source-binding entry must match its registration); otherwise
// InstrumentError.
InstrumentedProgram instrument(const lang::Program& program,
                               const taint::TaintReport& report);

// Runs one monitored transit toward `goal`.  Each publish advances the
// world by dt and synchronously re-delivers sensor callbacks; the
// monitored leg is the first user-function call with a positional
// argument equal to `goal`, and the episode ends when the monitor issues
// a verdict or that call returns.  Throws RuntimeFault on interpreter
// errors, DivergenceFault past the publish or statement budget, and
// NoVerdictError when execution finishes without a verdict.
EpisodeTrace run_episode(const InstrumentedProgram& iprog, const EnvConfig& config,
                         double goal, std::uint64_t seed);

// One JSON object per event: {"line":..,"stmt_index":..,"m":..,"p":..,"v":..}.
std::string trace_jsonl(const EpisodeTrace& trace);

}  // namespace tarl::exec
