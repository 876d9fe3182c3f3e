// Command-line front end: every subcommand is a thin orchestration of the
// C API, reading artifact files, invoking one pipeline stage, and writing
// artifact files plus a manifest describing the run.  Exit codes are the
// tarl_status values.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tarl/tarl.h"

namespace {

using ojson = nlohmann::ordered_json;

struct CliError : std::runtime_error {
    int code;
    CliError(int code, std::string message) : std::runtime_error(std::move(message)), code(code) {}
};

// Raises the C API's thread-local message as a process-level failure.
void check(tarl_status status) {
    if (status != TARL_OK) throw CliError(status, tarl_last_error());
}

struct ProgramDeleter {
    void operator()(tarl_program* p) const { tarl_program_free(p); }
};
struct ConfigDeleter {
    void operator()(tarl_config* c) const { tarl_config_free(c); }
};
using ProgramPtr = std::unique_ptr<tarl_program, ProgramDeleter>;
using ConfigPtr = std::unique_ptr<tarl_config, ConfigDeleter>;

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { tarl_string_free(ptr); }
    char** out() { return &ptr; }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw CliError(TARL_IO, "cannot read " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw CliError(TARL_IO, "cannot write " + path);
    out << content;
    if (!out.good()) throw CliError(TARL_IO, "cannot write " + path);
}

std::string fnv1a64_hex(const std::string& content) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char byte : content) {
        hash ^= byte;
        hash *= 1099511628211ull;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

// Inputs and outputs of one run, accumulated while the subcommand executes
// and flushed as a manifest sitting beside the first file artifact.
struct Manifest {
    std::string command;
    ojson config = nullptr;
    ojson seeds = nullptr;
    ojson options = ojson::object();
    ojson inputs = ojson::object();
    std::vector<std::string> outputs;

    void add_input(const std::string& path, const std::string& content) {
        inputs[path] = fnv1a64_hex(content);
    }

    void emit(const std::string& path, const std::string& content) {
        write_file(path, content);
        outputs.push_back(path);
    }

    void flush() const {
        if (outputs.empty()) return;
        ojson j;
        j["command"] = command;
        j["version"] = tarl_version();
        j["config"] = config;
        j["seeds"] = seeds;
        j["options"] = options;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        write_file(outputs.front() + ".manifest.json", j.dump(2) + "\n");
    }
};

ProgramPtr parse_program(const std::string& source, const std::string& path) {
    tarl_program* raw = nullptr;
    check(tarl_program_parse(source.c_str(), path.c_str(), &raw));
    return ProgramPtr(raw);
}

ConfigPtr make_config(const std::string& config_path, Manifest& manifest) {
    tarl_config* raw = nullptr;
    if (config_path.empty()) {
        check(tarl_config_default(&raw));
    } else {
        manifest.add_input(config_path, read_file(config_path));
        manifest.config = config_path;
        check(tarl_config_load(config_path.c_str(), &raw));
    }
    return ConfigPtr(raw);
}

ConfigPtr clone_config(const tarl_config* config) {
    tarl_config* raw = nullptr;
    check(tarl_config_clone(config, &raw));
    return ConfigPtr(raw);
}

std::uint64_t parse_seed_text(const std::string& text, const std::string& what) {
    if (text.empty()) throw CliError(TARL_INVALID, what + " must be an unsigned integer");
    errno = 0;
    char* end = nullptr;
    unsigned long long value = std::strtoull(text.c_str(), &end, 10);
    if (errno != 0 || end != text.c_str() + text.size())
        throw CliError(TARL_INVALID, what + " must be an unsigned integer, got '" + text + "'");
    return value;
}

// Precedence: explicit flag, then TARL_SEED, then the config file's value.
std::optional<std::uint64_t> resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return flag;
    if (const char* env = std::getenv("TARL_SEED")) return parse_seed_text(env, "TARL_SEED");
    return std::nullopt;
}

void apply_env(tarl_config* config, const std::string& env) {
    if (env == "offline") check(tarl_config_offline(config));
}

// Derives the flow report from topics unless a report artifact is given.
std::string obtain_taint(const tarl_program* program, const std::string& taint_path,
                         const std::string& source_topic, const std::string& sink_topic,
                         Manifest& manifest) {
    if (!taint_path.empty()) {
        std::string text = read_file(taint_path);
        manifest.add_input(taint_path, text);
        return text;
    }
    OwnedString report;
    check(tarl_taint(program, source_topic.c_str(), sink_topic.c_str(), report.out()));
    return report.str();
}

std::string with_seed_suffix(const std::string& path, std::uint64_t seed) {
    std::string suffix = ".seed" + std::to_string(seed);
    auto slash = path.find_last_of('/');
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + suffix;
    return path.substr(0, dot) + suffix + path.substr(dot);
}

// The primary artifact goes to the --out file when given, stdout otherwise;
// a companion then goes to its own file, stdout when free, stderr last.
void emit_primary(Manifest& manifest, const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        manifest.emit(out_path, content);
}

void emit_companion(Manifest& manifest, const std::string& out_path, bool stdout_free,
                    const std::string& content) {
    if (!out_path.empty())
        manifest.emit(out_path, content);
    else if (stdout_free)
        std::cout << content;
    else
        std::cerr << content;
}

struct CommonArgs {
    std::string prog_path;
    std::string taint_path;
    std::string source_topic = "Odometry";
    std::string sink_topic = "Velocity";
    std::string config_path;
    std::string env = "online";
    std::optional<std::uint64_t> seed;
};

// Registers the flags shared by the subcommands that execute programs.
void add_common(CLI::App* cmd, CommonArgs& args, bool with_env = true) {
    cmd->add_option("prog", args.prog_path, "MiniBot source file")->required();
    cmd->add_option("--taint", args.taint_path,
                    "Flow report JSON (computed from --source/--sink when omitted)");
    cmd->add_option("--source", args.source_topic, "Sensor topic feeding the flow")
        ->capture_default_str();
    cmd->add_option("--sink", args.sink_topic, "Actuator topic ending the flow")
        ->capture_default_str();
    cmd->add_option("--config", args.config_path, "TOML configuration file");
    if (with_env)
        cmd->add_option("--env", args.env, "World variant to run in")
            ->check(CLI::IsMember({"offline", "online"}))
            ->capture_default_str();
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&args](std::uint64_t v) { args.seed = v; },
        "Base seed (TARL_SEED, then the config file, when omitted)");
}

ojson manifest_seeds(const std::optional<std::uint64_t>& seed) {
    if (!seed) return nullptr;
    return ojson::array({*seed});
}

int run_taint(const std::string& prog_path, const std::string& source_topic,
              const std::string& sink_topic, const std::string& out_path) {
    Manifest manifest;
    manifest.command = "taint";
    manifest.options["source"] = source_topic;
    manifest.options["sink"] = sink_topic;
    std::string source = read_file(prog_path);
    manifest.add_input(prog_path, source);
    ProgramPtr program = parse_program(source, prog_path);
    OwnedString report;
    check(tarl_taint(program.get(), source_topic.c_str(), sink_topic.c_str(), report.out()));
    emit_primary(manifest, out_path, report.str() + "\n");
    manifest.flush();
    return 0;
}

struct LearnRun {
    std::string table;
    ojson stats;
};

LearnRun learn_once(const std::string& source, const std::string& prog_path,
                    const std::string& report, const tarl_config* config) {
    ProgramPtr program = parse_program(source, prog_path);
    OwnedString table;
    OwnedString stats;
    check(tarl_learn(program.get(), report.c_str(), config, table.out(), stats.out()));
    return {table.str(), ojson::parse(stats.str())};
}

void require_converged_or_fail(const ojson& stats) {
    if (stats.at("converged") != true)
        throw CliError(TARL_NOT_CONVERGED, "utility table did not converge");
}

int run_learn(const CommonArgs& args, const std::optional<int>& episodes,
              const std::string& seeds_range, const std::string& out_path,
              const std::string& stats_path, bool require_converged) {
    Manifest manifest;
    manifest.command = "learn";
    manifest.options["env"] = args.env;
    if (episodes) manifest.options["episodes"] = *episodes;

    std::string source = read_file(args.prog_path);
    manifest.add_input(args.prog_path, source);
    ProgramPtr program = parse_program(source, args.prog_path);
    ConfigPtr config = make_config(args.config_path, manifest);
    apply_env(config.get(), args.env);
    if (episodes) check(tarl_config_set_learn_episodes(config.get(), *episodes));
    std::string report =
        obtain_taint(program.get(), args.taint_path, args.source_topic, args.sink_topic, manifest);

    if (seeds_range.empty()) {
        auto seed = resolve_seed(args.seed);
        if (seed) check(tarl_config_set_seed(config.get(), *seed));
        manifest.seeds = manifest_seeds(seed);
        LearnRun run = learn_once(source, args.prog_path, report, config.get());
        std::string stats_text = run.stats.dump() + "\n";
        emit_primary(manifest, out_path, run.table);
        emit_companion(manifest, stats_path, !out_path.empty(), stats_text);
        manifest.flush();
        if (require_converged) require_converged_or_fail(run.stats);
        return 0;
    }

    auto dots = seeds_range.find("..");
    if (dots == std::string::npos)
        throw CliError(TARL_INVALID, "--seeds expects the form A..B, got '" + seeds_range + "'");
    std::uint64_t first = parse_seed_text(seeds_range.substr(0, dots), "--seeds start");
    std::uint64_t last = parse_seed_text(seeds_range.substr(dots + 2), "--seeds end");
    if (first > last) throw CliError(TARL_INVALID, "--seeds range must be increasing");
    if (out_path.empty()) throw CliError(TARL_INVALID, "--seeds requires --out for per-seed tables");

    std::vector<std::future<LearnRun>> futures;
    ojson seeds = ojson::array();
    for (std::uint64_t s = first; s <= last; ++s) {
        seeds.push_back(s);
        ConfigPtr per_seed = clone_config(config.get());
        check(tarl_config_set_seed(per_seed.get(), s));
        futures.push_back(std::async(
            std::launch::async,
            [&source, &args, &report, cfg = std::move(per_seed)] {
                return learn_once(source, args.prog_path, report, cfg.get());
            }));
    }
    manifest.seeds = seeds;

    ojson runs = ojson::array();
    double rate_sum = 0.0;
    bool all_converged = true;
    for (std::size_t i = 0; i < futures.size(); ++i) {
        LearnRun run = futures[i].get();
        manifest.emit(with_seed_suffix(out_path, first + i), run.table);
        rate_sum += run.stats.at("success_rate").get<double>();
        all_converged = all_converged && run.stats.at("converged") == true;
        ojson entry;
        entry["seed"] = first + i;
        entry["stats"] = run.stats;
        runs.push_back(std::move(entry));
    }
    ojson merged;
    merged["seeds"] = seeds;
    merged["mean_success_rate"] = rate_sum / static_cast<double>(futures.size());
    merged["runs"] = runs;
    emit_companion(manifest, stats_path, true, merged.dump() + "\n");
    manifest.flush();
    if (require_converged && !all_converged)
        throw CliError(TARL_NOT_CONVERGED, "utility table did not converge for every seed");
    return 0;
}

int run_trace(const CommonArgs& args, const std::string& out_path,
              const std::string& verdict_path) {
    Manifest manifest;
    manifest.command = "trace";
    manifest.options["env"] = args.env;
    std::string source = read_file(args.prog_path);
    manifest.add_input(args.prog_path, source);
    ProgramPtr program = parse_program(source, args.prog_path);
    ConfigPtr config = make_config(args.config_path, manifest);
    apply_env(config.get(), args.env);
    std::uint64_t seed = resolve_seed(args.seed).value_or(0);
    manifest.seeds = ojson::array({seed});
    std::string report =
        obtain_taint(program.get(), args.taint_path, args.source_topic, args.sink_topic, manifest);

    OwnedString events;
    OwnedString verdict;
    check(tarl_trace(program.get(), report.c_str(), config.get(), seed, events.out(),
                     verdict.out()));
    emit_primary(manifest, out_path, events.str());
    emit_companion(manifest, verdict_path, !out_path.empty(), verdict.str() + "\n");
    manifest.flush();
    return 0;
}

int run_eval(const CommonArgs& args, const std::optional<int>& episodes,
             const std::string& out_path) {
    Manifest manifest;
    manifest.command = "eval";
    manifest.options["env"] = args.env;
    if (episodes) manifest.options["episodes"] = *episodes;
    std::string source = read_file(args.prog_path);
    manifest.add_input(args.prog_path, source);
    ProgramPtr program = parse_program(source, args.prog_path);
    ConfigPtr config = make_config(args.config_path, manifest);
    apply_env(config.get(), args.env);
    if (episodes) check(tarl_config_set_eval_episodes(config.get(), *episodes));
    auto seed = resolve_seed(args.seed);
    if (seed) check(tarl_config_set_seed(config.get(), *seed));
    manifest.seeds = manifest_seeds(seed);
    std::string report =
        obtain_taint(program.get(), args.taint_path, args.source_topic, args.sink_topic, manifest);

    OwnedString stats;
    check(tarl_evaluate(program.get(), report.c_str(), config.get(), stats.out()));
    emit_primary(manifest, out_path, stats.str() + "\n");
    manifest.flush();
    return 0;
}

int run_localize(const std::string& offline_path, const std::string& online_path,
                 const std::string& taint_path, int window, const std::string& out_path) {
    Manifest manifest;
    manifest.command = "localize";
    manifest.options["window"] = window;
    std::string offline_csv = read_file(offline_path);
    manifest.add_input(offline_path, offline_csv);
    std::string online_csv = read_file(online_path);
    manifest.add_input(online_path, online_csv);
    std::string report = read_file(taint_path);
    manifest.add_input(taint_path, report);

    OwnedString localization;
    check(tarl_localize(offline_csv.c_str(), online_csv.c_str(), report.c_str(), window,
                        localization.out()));
    emit_primary(manifest, out_path, localization.str() + "\n");
    manifest.flush();
    return 0;
}

int run_repair(const CommonArgs& args, const std::string& report_path,
               const std::optional<int>& search_episodes, const std::optional<int>& eval_episodes,
               const std::string& patch_path, const std::string& log_path,
               const std::string& summary_path) {
    Manifest manifest;
    manifest.command = "repair";
    if (search_episodes) manifest.options["search_episodes"] = *search_episodes;
    if (eval_episodes) manifest.options["eval_episodes"] = *eval_episodes;
    std::string source = read_file(args.prog_path);
    manifest.add_input(args.prog_path, source);
    ProgramPtr program = parse_program(source, args.prog_path);
    ConfigPtr config = make_config(args.config_path, manifest);
    if (search_episodes) check(tarl_config_set_search_episodes(config.get(), *search_episodes));
    if (eval_episodes) check(tarl_config_set_eval_episodes(config.get(), *eval_episodes));
    auto seed = resolve_seed(args.seed);
    if (seed) check(tarl_config_set_seed(config.get(), *seed));
    manifest.seeds = manifest_seeds(seed);
    std::string report =
        obtain_taint(program.get(), args.taint_path, args.source_topic, args.sink_topic, manifest);
    std::string localization = read_file(report_path);
    manifest.add_input(report_path, localization);

    OwnedString patched;
    OwnedString search_log;
    OwnedString summary;
    check(tarl_repair(program.get(), report.c_str(), localization.c_str(), config.get(),
                      patched.out(), search_log.out(), summary.out()));
    emit_primary(manifest, patch_path, patched.str());
    if (!log_path.empty()) manifest.emit(log_path, search_log.str());
    emit_companion(manifest, summary_path, !patch_path.empty(), summary.str() + "\n");
    manifest.flush();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Taint-guided learning, localization, and repair for MiniBot programs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tarl_version()));

    auto* taint_cmd = app.add_subcommand("taint", "Extract the sensor-to-actuator flow report");
    std::string taint_prog, taint_source = "Odometry", taint_sink = "Velocity", taint_out;
    taint_cmd->add_option("prog", taint_prog, "MiniBot source file")->required();
    taint_cmd->add_option("--source", taint_source, "Sensor topic feeding the flow")
        ->capture_default_str();
    taint_cmd->add_option("--sink", taint_sink, "Actuator topic ending the flow")
        ->capture_default_str();
    taint_cmd->add_option("--json", taint_out, "Write the report here instead of stdout");

    auto* learn_cmd = app.add_subcommand("learn", "Learn the utility table from monitored runs");
    CommonArgs learn_args;
    add_common(learn_cmd, learn_args);
    std::optional<int> learn_episodes;
    std::string learn_seeds, learn_out, learn_stats;
    bool learn_require_converged = false;
    learn_cmd
        ->add_option_function<int>(
            "--episodes", [&learn_episodes](int v) { learn_episodes = v; },
            "Override the configured episode count")
        ->check(CLI::NonNegativeNumber);
    learn_cmd->add_option("--seeds", learn_seeds, "Run seeds A..B concurrently, one table each")
        ->excludes("--seed");
    learn_cmd->add_option("--out", learn_out, "Utility table CSV path");
    learn_cmd->add_option("--stats", learn_stats, "Stats JSON path");
    learn_cmd->add_flag("--require-converged", learn_require_converged,
                        "Fail unless the table settled");

    auto* trace_cmd = app.add_subcommand("trace", "Replay one monitored transit as JSONL events");
    CommonArgs trace_args;
    add_common(trace_cmd, trace_args);
    std::string trace_out, trace_verdict;
    trace_cmd->add_option("--out", trace_out, "Events JSONL path");
    trace_cmd->add_option("--verdict", trace_verdict, "Verdict JSON path");

    auto* eval_cmd = app.add_subcommand("eval", "Score the program's average total reward");
    CommonArgs eval_args;
    add_common(eval_cmd, eval_args);
    std::optional<int> eval_episodes;
    std::string eval_out;
    eval_cmd
        ->add_option_function<int>(
            "--episodes", [&eval_episodes](int v) { eval_episodes = v; },
            "Override the configured evaluation episode count")
        ->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--out", eval_out, "Stats JSON path");

    auto* loc_cmd = app.add_subcommand("localize", "Name the culprit line from two tables");
    std::string loc_offline, loc_online, loc_taint, loc_out;
    int loc_window = 0;
    loc_cmd->add_option("--offline", loc_offline, "Expected-conditions utility CSV")->required();
    loc_cmd->add_option("--online", loc_online, "Deployed-conditions utility CSV")->required();
    loc_cmd->add_option("--taint", loc_taint, "Flow report JSON")->required();
    loc_cmd->add_option("--window", loc_window, "Region width in bins (0 picks the default)")
        ->check(CLI::NonNegativeNumber);
    loc_cmd->add_option("--out", loc_out, "Localization JSON path");

    auto* repair_cmd = app.add_subcommand("repair", "Search guarded mutations of the culprit");
    CommonArgs repair_args;
    add_common(repair_cmd, repair_args, /*with_env=*/false);
    std::string repair_report, repair_patch, repair_log, repair_summary;
    std::optional<int> repair_search, repair_eval;
    repair_cmd->add_option("--report", repair_report, "Localization JSON path")->required();
    repair_cmd
        ->add_option_function<int>(
            "--search-episodes", [&repair_search](int v) { repair_search = v; },
            "Override the configured search episode count")
        ->check(CLI::NonNegativeNumber);
    repair_cmd
        ->add_option_function<int>(
            "--eval-episodes", [&repair_eval](int v) { repair_eval = v; },
            "Override the configured validation episode count")
        ->check(CLI::NonNegativeNumber);
    repair_cmd->add_option("--out-patch", repair_patch, "Patched source path");
    repair_cmd->add_option("--out-log", repair_log, "Search log CSV path");
    repair_cmd->add_option("--summary", repair_summary, "Search summary JSON path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : TARL_INVALID;
    }

    try {
        if (*taint_cmd) return run_taint(taint_prog, taint_source, taint_sink, taint_out);
        if (*learn_cmd)
            return run_learn(learn_args, learn_episodes, learn_seeds, learn_out, learn_stats,
                             learn_require_converged);
        if (*trace_cmd) return run_trace(trace_args, trace_out, trace_verdict);
        if (*eval_cmd) return run_eval(eval_args, eval_episodes, eval_out);
        if (*loc_cmd) return run_localize(loc_offline, loc_online, loc_taint, loc_window, loc_out);
        if (*repair_cmd)
            return run_repair(repair_args, repair_report, repair_search, repair_eval, repair_patch,
                              repair_log, repair_summary);
    } catch (const CliError& e) {
        std::cerr << "tarl: " << e.what() << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "tarl: " << e.what() << "\n";
        return TARL_INVALID;
    }
    return 0;
}
