#include "tarl/tarl.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>
#include <utility>

#include <json.hpp>

#include "tarl/config.hpp"
#include "tarl/error.hpp"
#include "tarl/interp.hpp"
#include "tarl/learner.hpp"
#include "tarl/localize.hpp"
#include "tarl/mend.hpp"
#include "tarl/parse.hpp"
#include "tarl/taint.hpp"
#include "tarl/version.hpp"

struct tarl_program {
    tarl::lang::Program program;
};

struct tarl_config {
    tarl::Config config;
};

namespace {

using ojson = nlohmann::ordered_json;

thread_local std::string t_error;

// Freed by the caller via tarl_string_free, so allocation goes through malloc.
char* dup_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, text.data(), text.size() + 1);
    return out;
}

void emit(char** slot, const std::string& text) {
    if (slot) *slot = dup_string(text);
}

void require(const void* value, const char* name) {
    if (!value) throw tarl::Error(tarl::Status::Invalid, std::string(name) + " must not be NULL");
}

template <typename Fn>
tarl_status wrap(Fn&& fn) {
    t_error.clear();
    try {
        fn();
        return TARL_OK;
    } catch (const tarl::Error& e) {
        t_error = e.what();
        return static_cast<tarl_status>(static_cast<int>(e.status()));
    } catch (const std::exception& e) {
        t_error = e.what();
        return TARL_INVALID;
    }
}

template <typename Fn>
tarl_status update_config(tarl_config* config, Fn&& mutate) {
    return wrap([&] {
        require(config, "config");
        tarl::Config next = config->config;
        mutate(next);
        next.world.validate();
        next.rl.validate();
        next.repair.validate();
        config->config = std::move(next);
    });
}

ojson eval_json(const tarl::mend::EvalStats& stats) {
    ojson j;
    j["episodes"] = stats.episodes;
    j["atr"] = stats.atr;
    j["success_rate"] = stats.success_rate;
    return j;
}

}  // namespace

extern "C" {

const char* tarl_version(void) { return tarl::kVersion; }

const char* tarl_status_name(tarl_status status) {
    switch (status) {
        case TARL_OK: return "ok";
        case TARL_IO: return "io";
        case TARL_PARSE: return "parse";
        case TARL_NO_FLOW: return "no-flow";
        case TARL_NOT_CONVERGED: return "not-converged";
        case TARL_DEGENERATE: return "degenerate";
        case TARL_NO_CONSTANTS: return "no-constants";
        case TARL_INSUFFICIENT_DATA: return "insufficient-data";
        case TARL_RUNTIME: return "runtime";
        case TARL_INVALID: return "invalid";
    }
    return "unknown";
}

const char* tarl_last_error(void) { return t_error.c_str(); }

void tarl_string_free(char* text) { std::free(text); }

tarl_status tarl_program_parse(const char* source, const char* path, tarl_program** out) {
    return wrap([&] {
        require(source, "source");
        auto program = tarl::lang::parse(source, path ? path : "<input>");
        if (out) *out = new tarl_program{std::move(program)};
    });
}

void tarl_program_free(tarl_program* program) { delete program; }

tarl_status tarl_program_unparse(const tarl_program* program, char** out) {
    return wrap([&] {
        require(program, "program");
        emit(out, tarl::lang::unparse(program->program));
    });
}

tarl_status tarl_config_default(tarl_config** out) {
    return wrap([&] {
        if (out) *out = new tarl_config{};
    });
}

tarl_status tarl_config_parse(const char* text, const char* path, tarl_config** out) {
    return wrap([&] {
        require(text, "text");
        auto config = tarl::parse_config(text, path ? path : "<config>");
        if (out) *out = new tarl_config{std::move(config)};
    });
}

tarl_status tarl_config_load(const char* path, tarl_config** out) {
    return wrap([&] {
        require(path, "path");
        auto config = tarl::load_config(path);
        if (out) *out = new tarl_config{std::move(config)};
    });
}

tarl_status tarl_config_clone(const tarl_config* config, tarl_config** out) {
    return wrap([&] {
        require(config, "config");
        if (out) *out = new tarl_config{config->config};
    });
}

void tarl_config_free(tarl_config* config) { delete config; }

tarl_status tarl_config_offline(tarl_config* config) {
    return update_config(config, [](tarl::Config& c) { c.world = tarl::offline_variant(c.world); });
}

tarl_status tarl_config_set_seed(tarl_config* config, uint64_t seed) {
    return update_config(config, [&](tarl::Config& c) {
        c.rl.seed = seed;
        c.repair.seed = seed;
    });
}

tarl_status tarl_config_set_learn_episodes(tarl_config* config, int episodes) {
    return update_config(config, [&](tarl::Config& c) { c.rl.episodes = episodes; });
}

tarl_status tarl_config_set_search_episodes(tarl_config* config, int episodes) {
    return update_config(config, [&](tarl::Config& c) { c.repair.search_episodes = episodes; });
}

tarl_status tarl_config_set_eval_episodes(tarl_config* config, int episodes) {
    return update_config(config, [&](tarl::Config& c) { c.repair.eval_episodes = episodes; });
}

tarl_status tarl_taint(const tarl_program* program, const char* source_topic,
                       const char* sink_topic, char** report_json) {
    return wrap([&] {
        require(program, "program");
        require(source_topic, "source_topic");
        require(sink_topic, "sink_topic");
        auto report = tarl::taint::taint_analyze(program->program, source_topic, sink_topic);
        emit(report_json, report.to_json());
    });
}

tarl_status tarl_learn(const tarl_program* program, const char* report_json,
                       const tarl_config* config, char** table_csv, char** stats_json) {
    return wrap([&] {
        require(program, "program");
        require(report_json, "report_json");
        require(config, "config");
        auto report = tarl::taint::TaintReport::from_json(report_json);
        auto iprog = tarl::exec::instrument(program->program, report);
        auto result = tarl::rl::learn(iprog, config->config.world, config->config.rl);
        emit(table_csv, tarl::rl::save_csv(result.table));
        ojson j;
        j["episodes"] = result.stats.episodes;
        j["success_rate"] = result.stats.success_rate;
        j["block_deltas"] = result.stats.block_deltas;
        j["max_abs_q"] = result.table.max_abs_q();
        try {
            j["converged"] = tarl::rl::converged(result.stats.block_deltas,
                                                 config->config.rl.tol, result.table.max_abs_q());
        } catch (const tarl::InsufficientDataError&) {
            j["converged"] = nullptr;
        }
        emit(stats_json, j.dump());
    });
}

tarl_status tarl_trace(const tarl_program* program, const char* report_json,
                       const tarl_config* config, uint64_t seed, char** events_jsonl,
                       char** verdict_json) {
    return wrap([&] {
        require(program, "program");
        require(report_json, "report_json");
        require(config, "config");
        auto report = tarl::taint::TaintReport::from_json(report_json);
        auto iprog = tarl::exec::instrument(program->program, report);
        auto trace = tarl::exec::run_episode(iprog, config->config.world,
                                             config->config.world.g2, seed);
        emit(events_jsonl, tarl::exec::trace_jsonl(trace));
        ojson j;
        j["success"] = trace.verdict.success;
        j["reward_total"] = trace.verdict.reward_total;
        j["reason"] = trace.verdict.reason == tarl::VerdictReason::ReachedWithinBounds
                          ? "reached-within-bounds"
                          : "timeout";
        j["publish_count"] = trace.publish_count;
        j["events"] = trace.events.size();
        emit(verdict_json, j.dump());
    });
}

tarl_status tarl_evaluate(const tarl_program* program, const char* report_json,
                          const tarl_config* config, char** stats_json) {
    return wrap([&] {
        require(program, "program");
        require(report_json, "report_json");
        require(config, "config");
        auto report = tarl::taint::TaintReport::from_json(report_json);
        tarl::mend::Arm arm;
        arm.identity = true;
        arm.source_topic = report.source_topic;
        arm.sink_topic = report.sink_topic;
        arm.program = program->program.clone();
        auto stats = tarl::mend::evaluate_arm(arm, config->config.world, config->config.repair);
        emit(stats_json, eval_json(stats).dump());
    });
}

tarl_status tarl_localize(const char* offline_csv, const char* online_csv,
                          const char* report_json, int width, char** localization_json) {
    return wrap([&] {
        require(offline_csv, "offline_csv");
        require(online_csv, "online_csv");
        require(report_json, "report_json");
        auto offline = tarl::rl::load_csv(offline_csv);
        auto online = tarl::rl::load_csv(online_csv);
        auto report = tarl::taint::TaintReport::from_json(report_json);
        auto where = tarl::loc::locate_culprit(offline, online, report, width);
        emit(localization_json, where.to_json());
    });
}

tarl_status tarl_repair(const tarl_program* program, const char* report_json,
                        const char* localization_json, const tarl_config* config,
                        char** patched_source, char** search_csv, char** summary_json) {
    return wrap([&] {
        require(program, "program");
        require(report_json, "report_json");
        require(localization_json, "localization_json");
        require(config, "config");
        auto report = tarl::taint::TaintReport::from_json(report_json);
        auto where = tarl::loc::LocalizationReport::from_json(localization_json);
        auto outcome = tarl::mend::repair(program->program, report, where, config->config.world,
                                          config->config.repair);
        const auto& chosen = outcome.arms[outcome.selected];
        emit(patched_source, tarl::lang::unparse(chosen.program));
        emit(search_csv, tarl::mend::search_log_csv(outcome.search.log));
        ojson arms = ojson::array();
        for (std::size_t i = 0; i < outcome.arms.size(); ++i) {
            const auto& arm = outcome.arms[i];
            const auto& pulls = outcome.search.stats[i];
            ojson a;
            a["id"] = arm.id;
            a["identity"] = arm.identity;
            a["literal_ordinal"] = arm.literal_ordinal;
            a["factor"] = arm.factor;
            a["constant"] = arm.constant;
            a["pulls"] = pulls.pulls;
            a["mean_reward"] = pulls.mean();
            arms.push_back(std::move(a));
        }
        ojson j;
        j["selected"] = outcome.selected;
        j["identity"] = chosen.identity;
        j["factor"] = chosen.factor;
        j["constant"] = chosen.constant;
        j["final_epsilon"] = outcome.search.final_epsilon;
        j["search_atr"] = outcome.search.log.empty() ? 0.0 : outcome.search.log.back().atr;
        j["eval"] = eval_json(outcome.eval);
        j["arms"] = std::move(arms);
        emit(summary_json, j.dump());
    });
}

}  // extern "C"
