#include "tarl/mend.hpp"

#include <cstdio>
#include <functional>
#include <memory>
#include <utility>

#include "tarl/error.hpp"
#include "tarl/interp.hpp"
#include "tarl/parse.hpp"
#include "tarl/rng.hpp"

namespace tarl::mend {

using lang::Expr;
using lang::Program;
using lang::Stmt;
using lang::StmtPtr;

namespace {

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void walk_expr(Expr& e, const std::function<void(Expr&)>& fn) {
    fn(e);
    if (e.lhs) walk_expr(*e.lhs, fn);
    if (e.rhs) walk_expr(*e.rhs, fn);
    if (e.operand) walk_expr(*e.operand, fn);
    for (auto& op : e.operands) walk_expr(*op, fn);
    if (e.callee) walk_expr(*e.callee, fn);
    for (auto& a : e.args) walk_expr(*a.value, fn);
}

void walk_stmt_exprs(Stmt& s, const std::function<void(Expr&)>& fn) {
    for (auto& t : s.targets) walk_expr(*t, fn);
    for (auto& v : s.values) walk_expr(*v, fn);
    if (s.cond) walk_expr(*s.cond, fn);
    if (s.expr) walk_expr(*s.expr, fn);
}

// Owning block and index of a statement, found by line.
struct Located {
    std::vector<StmtPtr>* block = nullptr;
    size_t index = 0;
};

bool locate_line(std::vector<StmtPtr>& body, int line, Located& out) {
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i]->line == line) {
            out = {&body, i};
            return true;
        }
        if (locate_line(body[i]->body, line, out) ||
            locate_line(body[i]->else_body, line, out) ||
            locate_line(body[i]->handler, line, out))
            return true;
    }
    return false;
}

Located locate_culprit(Program& program, const loc::LocalizationReport& where) {
    Located at;
    if (!locate_line(program.statements, where.culprit_line, at))
        throw Error(Status::Invalid, "culprit line " + std::to_string(where.culprit_line) +
                                         " is not present in the program");
    std::string actual = lang::stmt_text(*(*at.block)[at.index]);
    if (actual != where.culprit_text)
        throw Error(Status::Invalid, "culprit line " + std::to_string(where.culprit_line) +
                                         " reads '" + actual + "' but the report expects '" +
                                         where.culprit_text + "'");
    return at;
}

std::vector<Expr*> statement_literals(Stmt& stmt) {
    std::vector<Expr*> out;
    walk_stmt_exprs(stmt, [&](Expr& e) {
        if (e.kind == Expr::Kind::Num) out.push_back(&e);
    });
    return out;
}

// Guard condition: terrain flag matches the region's row and the
// odometry variable sits inside the region's position window.
lang::ExprPtr make_guard(const loc::LocalizationReport& where, const EnvConfig& config,
                         const std::string& var) {
    double width = (config.odometry_range[1] - config.odometry_range[0]) / config.odometry_bins;
    double lo = config.odometry_range[0] + where.region.p_lo * width;
    double hi = config.odometry_range[0] + (where.region.p_hi + 1) * width;
    std::string text = std::string("if __tarl_terrain == ") +
                       (where.region.terrain ? "True" : "False") + " and " + var + " >= " +
                       fmt_num(lo) + " and " + var + " <= " + fmt_num(hi) + ":\n    pass\n";
    Program p = lang::parse(text);
    return std::move(p.statements[0]->cond);
}

bool is_subscriber_call(const Stmt& s) {
    return s.kind == Stmt::Kind::ExprStmt && s.expr && s.expr->kind == Expr::Kind::Call &&
           s.expr->callee && s.expr->callee->kind == Expr::Kind::Attr &&
           s.expr->callee->parts.size() == 2 && s.expr->callee->parts[0] == "rospy" &&
           s.expr->callee->parts[1] == "Subscriber";
}

void find_last_subscriber(std::vector<StmtPtr>& body, Located& out, bool& found) {
    for (size_t i = 0; i < body.size(); ++i) {
        Stmt& s = *body[i];
        if (is_subscriber_call(s)) {
            out = {&body, i};
            found = true;
        }
        find_last_subscriber(s.body, out, found);
        find_last_subscriber(s.else_body, out, found);
        find_last_subscriber(s.handler, out, found);
    }
}

double arm_reward(const exec::InstrumentedProgram& ip, const EnvConfig& config,
                  std::uint64_t seed, bool* success) {
    try {
        exec::EpisodeTrace t = exec::run_episode(ip, config, config.g2, seed);
        if (success) *success = t.verdict.success;
        return t.verdict.reward_total;
    } catch (const Error& e) {
        // A broken mutant is a failed episode, not a broken search.
        if (e.status() != Status::Runtime) throw;
        if (success) *success = false;
        return config.reward_failure;
    }
}

exec::InstrumentedProgram wrap_bare(const Arm& arm) {
    exec::InstrumentedProgram ip;
    ip.program = arm.program.clone();
    ip.source_topic = arm.source_topic;
    ip.sink_topic = arm.sink_topic;
    return ip;
}

}  // namespace

void inject_sensor_binding(Program& program) {
    std::string clash;
    lang::for_each_stmt(program, [&](Stmt& s) {
        auto check = [&](const std::string& n) {
            if (n == "__tarl_terrain" || n == "__tarl_cb") clash = n;
        };
        check(s.name);
        for (const auto& p : s.params) check(p);
        for (const auto& n : s.names) check(n);
        walk_stmt_exprs(s, [&](Expr& e) {
            if (e.kind == Expr::Kind::Ident) check(e.name);
            if (e.kind == Expr::Kind::Attr && !e.parts.empty()) check(e.parts[0]);
        });
    });
    if (!clash.empty()) throw NameCollisionError("the program already uses '" + clash + "'");

    Located last;
    bool found = false;
    size_t top_index = 0;
    for (size_t i = 0; i < program.statements.size(); ++i) {
        Stmt& s = *program.statements[i];
        if (is_subscriber_call(s)) {
            last = {&program.statements, i};
            found = true;
            top_index = i;
        }
        Located nested;
        bool nested_found = false;
        find_last_subscriber(s.body, nested, nested_found);
        find_last_subscriber(s.else_body, nested, nested_found);
        find_last_subscriber(s.handler, nested, nested_found);
        if (nested_found) {
            last = nested;
            found = true;
            top_index = i;
        }
    }
    if (!found)
        throw Error(Status::Invalid, "no subscriber registration to anchor the terrain feed");

    Program snippet = lang::parse(
        "def __tarl_cb(data):\n"
        "    global __tarl_terrain\n"
        "    __tarl_terrain = data\n"
        "rospy.Subscriber(Terrain, __tarl_cb)\n");
    last.block->insert(last.block->begin() + last.index + 1, std::move(snippet.statements[1]));
    program.statements.insert(program.statements.begin() + top_index,
                              std::move(snippet.statements[0]));
}

std::vector<Arm> generate_mutants(const Program& program, const taint::TaintReport& report,
                                  const loc::LocalizationReport& where, const EnvConfig& config,
                                  const RepairParams& params) {
    if (where.region.p_hi >= config.odometry_bins)
        throw ShapeError("region lies outside the configured bins");
    std::string var = taint::odometry_variable(program, report);

    Program probe = program.clone();
    Located at = locate_culprit(probe, where);
    size_t literal_count = statement_literals(*(*at.block)[at.index]).size();
    if (literal_count == 0)
        throw NoConstantsError("statement '" + where.culprit_text + "' has no numeric constant");

    std::vector<Arm> arms;
    int id = 0;
    for (size_t k = 0; k < literal_count; ++k) {
        for (double f : params.mutation_factors) {
            Arm a;
            a.id = id++;
            a.literal_ordinal = static_cast<int>(k);
            a.factor = f;
            a.source_topic = report.source_topic;
            a.sink_topic = report.sink_topic;
            a.program = program.clone();
            inject_sensor_binding(a.program);

            Located spot = locate_culprit(a.program, where);
            StmtPtr culprit = std::move((*spot.block)[spot.index]);
            StmtPtr mutated = culprit->clone();
            Expr* lit = statement_literals(*mutated)[k];
            lit->num_value *= f;
            lit->num_text = fmt_num(lit->num_value);
            a.constant = lit->num_value;

            auto wrapper = std::make_unique<Stmt>(Stmt::Kind::If);
            wrapper->line = culprit->line;
            wrapper->column = culprit->column;
            wrapper->cond = make_guard(where, config, var);
            wrapper->body.push_back(std::move(mutated));
            wrapper->else_body.push_back(std::move(culprit));
            (*spot.block)[spot.index] = std::move(wrapper);
            arms.push_back(std::move(a));
        }
    }

    Arm ident;
    ident.id = id;
    ident.identity = true;
    ident.source_topic = report.source_topic;
    ident.sink_topic = report.sink_topic;
    ident.program = program.clone();
    arms.push_back(std::move(ident));
    return arms;
}

SearchResult epsilon_greedy_search(const std::vector<Arm>& arms, const EnvConfig& config,
                                   const RepairParams& params) {
    if (arms.empty()) throw Error(Status::Invalid, "search needs at least one arm");
    std::vector<exec::InstrumentedProgram> wrapped;
    wrapped.reserve(arms.size());
    for (const Arm& a : arms) wrapped.push_back(wrap_bare(a));

    SearchResult res;
    res.stats.assign(arms.size(), PullStats{});
    double eps = params.epsilon0;
    double reward_sum = 0.0;
    for (int ep = 0; ep < params.search_episodes; ++ep) {
        Rng rng(episode_seed(params.seed, kStreamSearch, ep));
        int arm;
        if (rng.next_double() < eps) {
            arm = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(arms.size())));
        } else {
            arm = 0;
            for (size_t i = 1; i < res.stats.size(); ++i)
                if (res.stats[i].mean() > res.stats[arm].mean()) arm = static_cast<int>(i);
        }
        double reward = arm_reward(wrapped[arm], config, rng.next_u64(), nullptr);
        res.stats[arm].pulls += 1;
        res.stats[arm].total += reward;
        reward_sum += reward;
        res.log.push_back({ep, arm, reward, reward_sum / (ep + 1)});
        eps = std::max(eps * params.epsilon_decay, params.epsilon_min);
    }
    res.final_epsilon = eps;
    return res;
}

int select_arm(const SearchResult& result, const RepairParams& params) {
    int arm_count = static_cast<int>(result.stats.size());
    if (arm_count == 0) throw InsufficientDataError("the search saw no arms");
    int floor = std::max(3, params.search_episodes / (4 * arm_count));
    int best = -1;
    for (int i = 0; i < arm_count; ++i) {
        if (result.stats[i].pulls < floor) continue;
        if (best < 0 || result.stats[i].mean() > result.stats[best].mean()) best = i;
    }
    if (best < 0)
        throw InsufficientDataError("no arm reached the pull floor of " + std::to_string(floor) +
                                    " episodes");
    return best;
}

EvalStats evaluate_arm(const Arm& arm, const EnvConfig& config, const RepairParams& params) {
    EvalStats out;
    out.episodes = params.eval_episodes;
    if (params.eval_episodes == 0) return out;
    exec::InstrumentedProgram ip = wrap_bare(arm);
    double sum = 0.0;
    int successes = 0;
    for (int i = 0; i < params.eval_episodes; ++i) {
        bool ok = false;
        sum += arm_reward(ip, config, episode_seed(params.seed, kStreamEval, i), &ok);
        if (ok) ++successes;
    }
    out.atr = sum / params.eval_episodes;
    out.success_rate = static_cast<double>(successes) / params.eval_episodes;
    return out;
}

std::string search_log_csv(const std::vector<SearchEntry>& log) {
    std::string out = "episode,arm,reward,atr\n";
    char buf[96];
    for (const SearchEntry& e : log) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", e.episode, e.arm, e.reward, e.atr);
        out += buf;
    }
    return out;
}

RepairOutcome repair(const Program& program, const taint::TaintReport& report,
                     const loc::LocalizationReport& where, const EnvConfig& config,
                     const RepairParams& params) {
    RepairOutcome out;
    out.arms = generate_mutants(program, report, where, config, params);
    out.search = epsilon_greedy_search(out.arms, config, params);
    out.selected = select_arm(out.search, params);
    out.eval = evaluate_arm(out.arms[out.selected], config, params);
    return out;
}

}  // namespace tarl::mend
