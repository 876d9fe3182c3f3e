#include "tarl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "tarl/error.hpp"
#include "tarl/rng.hpp"

namespace tarl::rl {

namespace {

constexpr double kTinyNorm = 1e-12;

}  // namespace

UtilityTable UtilityTable::make(const exec::InstrumentedProgram& iprog, int bins) {
    UtilityTable t;
    t.bins = bins;
    t.lines = iprog.lines;
    std::sort(t.lines.begin(), t.lines.end());
    for (size_t i = 0; i < iprog.lines.size(); ++i)
        t.line_index[iprog.lines[i]] = static_cast<int>(i);
    t.q.assign(2 * static_cast<size_t>(bins) * t.lines.size(), 0.0);
    for (int line : t.lines) t.flow_norm[line] = 0.0;
    return t;
}

int UtilityTable::slot(int line) const {
    auto it = std::lower_bound(lines.begin(), lines.end(), line);
    if (it == lines.end() || *it != line) return -1;
    return static_cast<int>(it - lines.begin());
}

namespace {

size_t cell_index(const UtilityTable& t, int m, int p, int line) {
    int s = t.slot(line);
    if (s < 0 || m < 0 || m > 1 || p < 0 || p >= t.bins)
        throw ShapeError("utility state (" + std::to_string(m) + ", " + std::to_string(p) +
                         ", " + std::to_string(line) + ") is outside the table");
    return (static_cast<size_t>(m) * t.bins + p) * t.lines.size() + s;
}

}  // namespace

double& UtilityTable::at(int m, int p, int line) { return q[cell_index(*this, m, p, line)]; }

double UtilityTable::at(int m, int p, int line) const { return q[cell_index(*this, m, p, line)]; }

double UtilityTable::max_abs_q() const {
    double m = 0.0;
    for (double v : q) m = std::max(m, std::fabs(v));
    return m;
}

void UtilityTable::observe_flow(int line, double v) {
    double a = std::fabs(v);
    auto it = flow_norm.find(line);
    if (it == flow_norm.end()) return;
    if (a > it->second) it->second = a;
    if (a > global_flow_norm) global_flow_norm = a;
}

void td_update(UtilityTable& table, const State& s, double v, double r, double r_flow,
               const std::optional<State>& next, const LearnParams& params) {
    double vn = v / std::max(table.global_flow_norm, kTinyNorm);
    vn = std::clamp(vn, -1.0, 1.0);
    double target = r + params.kappa * r_flow * vn;
    if (next) target += params.gamma * table.at(next->m, next->p, next->line);
    double& cell = table.at(s.m, s.p, s.line);
    cell += params.alpha * (target - cell);
}

double apply_episode(UtilityTable& table, const exec::EpisodeTrace& trace,
                     const LearnParams& params) {
    const auto& events = trace.events;
    for (const exec::HookEvent& e : events) table.observe_flow(e.line, e.flow_value);

    double terminal = trace.verdict.reward_total;
    double max_delta = 0.0;
    size_t n = events.size();
    for (size_t i = 0; i < n; ++i) {
        State s{events[i].terrain ? 1 : 0, events[i].odometry_bin, events[i].line};
        double r = trace.step_rewards[i];
        double r_flow = (i + 1 == n) ? r : terminal;
        std::optional<State> next;
        if (i + 1 < n)
            next = State{events[i + 1].terrain ? 1 : 0, events[i + 1].odometry_bin,
                         events[i + 1].line};
        double before = table.at(s.m, s.p, s.line);
        td_update(table, s, events[i].flow_value, r, r_flow, next, params);
        max_delta = std::max(max_delta, std::fabs(table.at(s.m, s.p, s.line) - before));
    }
    return max_delta;
}

LearnResult learn(const exec::InstrumentedProgram& iprog, const EnvConfig& config,
                  const LearnParams& params) {
    LearnResult out;
    out.table = UtilityTable::make(iprog, config.odometry_bins);
    out.stats.episodes = params.episodes;
    if (params.episodes == 0) return out;

    int successes = 0;
    double block_max = 0.0;
    for (int ep = 0; ep < params.episodes; ++ep) {
        exec::EpisodeTrace trace;
        try {
            trace = exec::run_episode(iprog, config, config.g2,
                                      episode_seed(params.seed, kStreamLearn, ep));
        } catch (const Error& e) {
            throw Error(e.status(), "episode " + std::to_string(ep) + ": " + e.what());
        }
        if (trace.verdict.success) ++successes;
        block_max = std::max(block_max, apply_episode(out.table, trace, params));
        if ((ep + 1) % params.block == 0 || ep + 1 == params.episodes) {
            out.stats.block_deltas.push_back(block_max);
            block_max = 0.0;
        }
    }
    out.stats.success_rate = static_cast<double>(successes) / params.episodes;
    return out;
}

bool converged(const std::vector<double>& block_deltas, double tol, double max_abs_q) {
    if (block_deltas.size() < 2)
        throw InsufficientDataError("convergence needs at least two blocks");
    double last = block_deltas.back();
    return last == 0.0 || last < tol * max_abs_q;
}

std::string save_csv(const UtilityTable& table) {
    for (double v : table.q)
        if (!std::isfinite(v)) throw FormatError("table contains a non-finite value");
    std::string out = "terrain,odometry_bin,line,stmt_index,q\n";
    char buf[96];
    for (int m = 0; m < 2; ++m) {
        for (int p = 0; p < table.bins; ++p) {
            for (int line : table.lines) {
                auto idx = table.line_index.find(line);
                std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.17g\n", m, p, line,
                              idx == table.line_index.end() ? -1 : idx->second,
                              table.at(m, p, line));
                out += buf;
            }
        }
    }
    return out;
}

UtilityTable load_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty utility file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "terrain,odometry_bin,line,stmt_index,q")
        throw FormatError("unexpected utility header: " + line);

    struct Row {
        int m, p, n, idx;
        double q;
    };
    std::vector<Row> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Row r;
        char trailing;
        int fields = std::sscanf(line.c_str(), "%d,%d,%d,%d,%lf%c", &r.m, &r.p, &r.n, &r.idx,
                                 &r.q, &trailing);
        if (fields != 5)
            throw FormatError("utility row " + std::to_string(lineno) + " is malformed: " + line);
        if (r.m < 0 || r.m > 1)
            throw FormatError("utility row " + std::to_string(lineno) + ": terrain must be 0 or 1");
        if (!std::isfinite(r.q))
            throw FormatError("utility row " + std::to_string(lineno) + ": non-finite q");
        rows.push_back(r);
    }

    UtilityTable t;
    if (rows.empty()) return t;

    for (const Row& r : rows) {
        if (t.line_index.count(r.n) == 0) {
            t.line_index[r.n] = r.idx;
            t.lines.push_back(r.n);
        } else if (t.line_index[r.n] != r.idx) {
            throw FormatError("line " + std::to_string(r.n) + " has conflicting stmt_index");
        }
        t.bins = std::max(t.bins, r.p + 1);
    }
    std::sort(t.lines.begin(), t.lines.end());
    size_t expected = 2 * static_cast<size_t>(t.bins) * t.lines.size();
    if (rows.size() != expected)
        throw FormatError("utility table is not dense: " + std::to_string(rows.size()) +
                          " rows for " + std::to_string(expected) + " cells");

    t.q.assign(expected, 0.0);
    std::vector<bool> seen(expected, false);
    for (const Row& r : rows) {
        if (r.p < 0 || r.p >= t.bins) throw FormatError("odometry bin out of range");
        size_t cell = (static_cast<size_t>(r.m) * t.bins + r.p) * t.lines.size() + t.slot(r.n);
        if (seen[cell]) throw FormatError("duplicate utility cell");
        seen[cell] = true;
        t.q[cell] = r.q;
    }
    for (int n : t.lines) t.flow_norm[n] = 0.0;
    return t;
}

}  // namespace tarl::rl
