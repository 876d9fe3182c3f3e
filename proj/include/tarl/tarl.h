#ifndef TARL_H
#define TARL_H

/* C interface to the taint-guided repair pipeline.  Handles are opaque;
 * every function returns a tarl_status and reports detail through
 * tarl_last_error().  Structured results travel as strings (JSON, JSONL,
 * or CSV) that the caller releases with tarl_string_free(). */

#include <stdint.h>

#ifndef TARL_API
#define TARL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Shared with the command-line tool's exit codes. */
typedef enum tarl_status {
    TARL_OK = 0,
    TARL_IO = 1,                /* missing/unreadable file, bad config */
    TARL_PARSE = 2,             /* source, report, or table malformed */
    TARL_NO_FLOW = 3,           /* no taint path from source to sink */
    TARL_NOT_CONVERGED = 4,     /* utility table did not settle */
    TARL_DEGENERATE = 5,        /* off-line and on-line utilities identical */
    TARL_NO_CONSTANTS = 6,      /* culprit statement has no numeric literals */
    TARL_INSUFFICIENT_DATA = 7, /* not enough evidence to pick a result */
    TARL_RUNTIME = 8,           /* interpreter fault, divergence, no verdict */
    TARL_INVALID = 9            /* bad arguments, stale inputs, name collision */
} tarl_status;

typedef struct tarl_program tarl_program;
typedef struct tarl_config tarl_config;

/* Library version, static storage. */
TARL_API const char* tarl_version(void);

/* Short lowercase name for a status code, static storage. */
TARL_API const char* tarl_status_name(tarl_status status);

/* Message for the calling thread's most recent failure; empty after a
 * success.  The pointer stays valid until the thread's next API call. */
TARL_API const char* tarl_last_error(void);

/* Releases any string an out-parameter produced.  NULL is a no-op. */
TARL_API void tarl_string_free(char* text);

/* Out-parameters may be NULL to discard that result; a NULL input or
 * handle argument fails with TARL_INVALID.  Handles are independent:
 * distinct handles may be used from distinct threads concurrently. */

TARL_API tarl_status tarl_program_parse(const char* source, const char* path,
                                        tarl_program** out);
TARL_API void tarl_program_free(tarl_program* program);

/* Canonical source text of the parsed program. */
TARL_API tarl_status tarl_program_unparse(const tarl_program* program, char** out);

TARL_API tarl_status tarl_config_default(tarl_config** out);
TARL_API tarl_status tarl_config_parse(const char* text, const char* path,
                                       tarl_config** out);
TARL_API tarl_status tarl_config_load(const char* path, tarl_config** out);
TARL_API tarl_status tarl_config_clone(const tarl_config* config, tarl_config** out);
TARL_API void tarl_config_free(tarl_config* config);

/* Removes the mud's dynamic effect while the terrain sensor keeps
 * varying: the expected-conditions baseline. */
TARL_API tarl_status tarl_config_offline(tarl_config* config);

/* Seeds both the learner and the repair search. */
TARL_API tarl_status tarl_config_set_seed(tarl_config* config, uint64_t seed);
TARL_API tarl_status tarl_config_set_learn_episodes(tarl_config* config, int episodes);
TARL_API tarl_status tarl_config_set_search_episodes(tarl_config* config, int episodes);
TARL_API tarl_status tarl_config_set_eval_episodes(tarl_config* config, int episodes);

/* Sensor-to-actuator flow between the two topics, as a JSON report with
 * the display chain and the full instrumented statement list. */
TARL_API tarl_status tarl_taint(const tarl_program* program, const char* source_topic,
                                const char* sink_topic, char** report_json);

/* Runs the configured number of monitored transits and learns the
 * per-(terrain, odometry bin, line) utility table.  table_csv receives
 * the dense table; stats_json receives {"episodes", "success_rate",
 * "block_deltas", "max_abs_q", "converged"} where "converged" is null
 * when there are too few blocks to judge. */
TARL_API tarl_status tarl_learn(const tarl_program* program, const char* report_json,
                                const tarl_config* config, char** table_csv,
                                char** stats_json);

/* One monitored transit under the given seed.  events_jsonl receives one
 * JSON object per instrumented-statement execution; verdict_json the
 * episode outcome. */
TARL_API tarl_status tarl_trace(const tarl_program* program, const char* report_json,
                                const tarl_config* config, uint64_t seed,
                                char** events_jsonl, char** verdict_json);

/* Fresh-seed average-total-reward evaluation of the program as-is. */
TARL_API tarl_status tarl_evaluate(const tarl_program* program, const char* report_json,
                                   const tarl_config* config, char** stats_json);

/* Compares two utility tables, finds the most divergent sensor region,
 * and names the culprit line.  width 0 picks the default window. */
TARL_API tarl_status tarl_localize(const char* offline_csv, const char* online_csv,
                                   const char* report_json, int width,
                                   char** localization_json);

/* Generates guarded constant mutations of the culprit, searches them
 * with the configured bandit, validates the winner on fresh seeds.
 * patched_source receives the winning program's source, search_csv the
 * per-episode search log, summary_json the arm table and eval stats. */
TARL_API tarl_status tarl_repair(const tarl_program* program, const char* report_json,
                                 const char* localization_json, const tarl_config* config,
                                 char** patched_source, char** search_csv,
                                 char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
