#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tarl/config.hpp"
#include "tarl/interp.hpp"

namespace tarl::rl {

// Dense tabular utility q(m, p, n) over terrain m, odometry bin p, and
// instrumented line n, plus the per-line running flow maxima used to
// normalize flow values.
struct UtilityTable {
    int bins = 0;
    std::vector<int> lines;                   // ascending
    std::unordered_map<int, int> line_index;  // line -> stmt_index
    std::vector<double> q;                    // (m * bins + p) * lines.size() + slot
    std::unordered_map<int, double> flow_norm;
    double global_flow_norm = 0.0;

    static UtilityTable make(const exec::InstrumentedProgram& iprog, int bins);

    int slot(int line) const;  // -1 if the line is not tracked
    double& at(int m, int p, int line);
    double at(int m, int p, int line) const;
    double max_abs_q() const;
    void observe_flow(int line, double v);
};

struct State {
    int m = 0;
    int p = 0;
    int line = 0;
};

// One backup: v is normalized by the global flow maximum and clamped to
// [-1, 1]; the target adds the flow credit kappa * r_flow * v~ and the
// discounted next-state utility when present.  r_flow is the episode's
// terminal reward (the caller passes r_flow = r at the terminal itself),
// so flow credit discounts backward exactly like any other reward.
void td_update(UtilityTable& table, const State& s, double v, double r, double r_flow,
               const std::optional<State>& next, const LearnParams& params);

// Applies one episode's updates in event order after refreshing the flow
// maxima from the whole trace; returns the episode's max |delta q|.
double apply_episode(UtilityTable& table, const exec::EpisodeTrace& trace,
                     const LearnParams& params);

struct LearnStats {
    int episodes = 0;
    double success_rate = 0.0;
    std::vector<double> block_deltas;  // per-block max |delta q|
};

struct LearnResult {
    UtilityTable table;
    LearnStats stats;
};

// Runs params.episodes monitored transits with per-episode seeds drawn
// from params.seed and folds every trace into the table.  Executor
// faults are rethrown annotated with the episode index.
LearnResult learn(const exec::InstrumentedProgram& iprog, const EnvConfig& config,
                  const LearnParams& params);

// True when the last block settled: its max |delta q| is zero or below
// tol * max_abs_q.  Needs at least two blocks (InsufficientDataError).
bool converged(const std::vector<double>& block_deltas, double tol, double max_abs_q);

// CSV columns: terrain,odometry_bin,line,stmt_index,q — dense, sorted by
// (terrain, bin, line), q printed with %.17g.  Flow maxima are learning
// state and are not serialized.
std::string save_csv(const UtilityTable& table);
UtilityTable load_csv(const std::string& text);

}  // namespace tarl::rl
