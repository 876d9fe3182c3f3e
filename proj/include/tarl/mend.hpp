#pragma once

#include <string>
#include <vector>

#include "tarl/config.hpp"
#include "tarl/localize.hpp"
#include "tarl/taint.hpp"

namespace tarl::mend {

// One candidate patch: the culprit statement guarded so the mutated copy
// runs only inside the localized region, plus a terrain subscription
// feeding the guard.  The identity arm is the unmodified program.
struct Arm {
    int id = 0;
    bool identity = false;
    int literal_ordinal = 0;  // which literal of the culprit was scaled
    double factor = 1.0;
    double constant = 0.0;  // literal value after scaling
    std::string source_topic;
    std::string sink_topic;
    lang::Program program;
};

// Adds the guard's sensor plumbing: a top-level callback writing the
// global __tarl_terrain, plus its subscription right after the last
// subscriber registration.  The registration's immediate delivery binds
// the global before any guard can read it.  NameCollisionError when the
// program already uses the reserved names.
void inject_sensor_binding(lang::Program& program);

// One arm per (culprit literal, factor), identity arm last.
// NoConstantsError when the culprit statement has no numeric literal.
std::vector<Arm> generate_mutants(const lang::Program& program, const taint::TaintReport& report,
                                  const loc::LocalizationReport& where, const EnvConfig& config,
                                  const RepairParams& params);

struct PullStats {
    int pulls = 0;
    double total = 0.0;
    double mean() const { return pulls ? total / pulls : 0.0; }
};

struct SearchEntry {
    int episode = 0;
    int arm = 0;
    double reward = 0.0;
    double atr = 0.0;  // mean reward over episodes 0..episode
};

struct SearchResult {
    std::vector<SearchEntry> log;
    std::vector<PullStats> stats;  // indexed by arm id
    double final_epsilon = 0.0;
};

// Epsilon-greedy over the arms: explore uniformly with probability
// epsilon (decayed each episode down to the floor), otherwise pull the
// best mean with ties to the lower id; unpulled arms count as mean 0.
// A runtime fault in a mutant scores the failure reward instead of
// aborting the search.
SearchResult epsilon_greedy_search(const std::vector<Arm>& arms, const EnvConfig& config,
                                   const RepairParams& params);

// Best mean among arms pulled at least max(3, episodes / (4 * arms))
// times, ties to the lower id.  InsufficientDataError when no arm
// qualifies.
int select_arm(const SearchResult& result, const RepairParams& params);

struct EvalStats {
    int episodes = 0;
    double atr = 0.0;
    double success_rate = 0.0;
};

// Fresh-seed validation of one arm.
EvalStats evaluate_arm(const Arm& arm, const EnvConfig& config, const RepairParams& params);

// CSV columns: episode,arm,reward,atr.
std::string search_log_csv(const std::vector<SearchEntry>& log);

struct RepairOutcome {
    std::vector<Arm> arms;
    SearchResult search;
    int selected = 0;
    EvalStats eval;
};

// generate -> search -> select -> validate.
RepairOutcome repair(const lang::Program& program, const taint::TaintReport& report,
                     const loc::LocalizationReport& where, const EnvConfig& config,
                     const RepairParams& params);

}  // namespace tarl::mend
