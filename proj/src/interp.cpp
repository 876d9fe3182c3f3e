#include "tarl/interp.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <variant>

#include "tarl/error.hpp"
#include "tarl/parse.hpp"
#include "tarl/rng.hpp"

namespace tarl::exec {

namespace {

using lang::Expr;
using lang::Program;
using lang::Stmt;

struct Handle {
    std::string topic;
};

// Sensor message wrapper: any attribute path resolves to the payload, so
// `data.pose.pose.position` and a direct read agree.
struct Message {
    double payload = 0.0;
};

using Value = std::variant<std::monostate, double, bool, std::string, Handle, Message>;

struct EpisodeDone {};

// Per-function name partition: parameters and assigned names are local
// unless declared global.
struct FnScope {
    std::set<std::string> locals;
};

struct Frame {
    const Stmt* fn = nullptr;
    const FnScope* scope = nullptr;
    std::unordered_map<std::string, Value> locals;
};

constexpr long long kStmtBudget = 2000000;

class Interp {
public:
    Interp(const InstrumentedProgram& ip, const EnvConfig& cfg, double goal,
           std::uint64_t seed)
        : ip_(ip), cfg_(cfg), goal_(goal), rng_(seed) {
        publish_cap_ = static_cast<long long>(std::llround(10.0 * cfg.t_max / cfg.dt));
        if (publish_cap_ < 1) publish_cap_ = 1;
    }

    EpisodeTrace run() {
        world_ = reset(cfg_, rng_);
        globals_["G1"] = cfg_.g1;
        globals_["G2"] = cfg_.g2;
        globals_["Epsilon"] = cfg_.epsilon_spec;
        globals_["__name__"] = std::string("__main__");
        lang::for_each_stmt(ip_.program, [&](const Stmt& s) {
            if (s.kind == Stmt::Kind::FuncDef) functions_.emplace(s.name, &s);
        });
        try {
            exec_block(ip_.program.statements);
        } catch (const EpisodeDone&) {
            finalize();
            return std::move(trace_);
        }
        throw NoVerdictError("episode ended without a verdict");
    }

private:
    struct Sub {
        std::string topic;
        const Stmt* fn;
        const Stmt* reg_stmt;
    };

    const InstrumentedProgram& ip_;
    const EnvConfig& cfg_;
    double goal_;
    Rng rng_;
    WorldState world_;
    std::unordered_map<std::string, Value> globals_;
    std::unordered_map<std::string, const Stmt*> functions_;
    std::unordered_map<const Stmt*, FnScope> scopes_;
    std::vector<Sub> subs_;
    std::vector<Frame> frames_;
    EpisodeTrace trace_;
    bool monitoring_ = false;
    size_t monitored_depth_ = 0;
    long long total_publishes_ = 0;
    long long publish_cap_ = 0;
    long long budget_ = kStmtBudget;
    int cur_line_ = 0;

    [[noreturn]] void fault(const std::string& m) const { throw RuntimeFault(cur_line_, m); }

    void finalize() {
        if (!trace_.events.empty())
            trace_.step_rewards.back() += trace_.verdict.reward_total;
    }

    // Scope analysis, cached per function definition.
    const FnScope& scope_of(const Stmt* fn) {
        auto it = scopes_.find(fn);
        if (it != scopes_.end()) return it->second;
        FnScope s;
        std::set<std::string> declared_global;
        collect_scope(fn->body, s.locals, declared_global);
        for (const std::string& p : fn->params) s.locals.insert(p);
        for (const std::string& g : declared_global) s.locals.erase(g);
        return scopes_.emplace(fn, std::move(s)).first->second;
    }

    static void collect_scope(const std::vector<lang::StmtPtr>& body,
                              std::set<std::string>& assigned,
                              std::set<std::string>& declared_global) {
        for (const auto& st : body) {
            switch (st->kind) {
                case Stmt::Kind::Assign:
                case Stmt::Kind::MultiAssign:
                    for (const auto& t : st->targets)
                        if (t->kind == Expr::Kind::Ident) assigned.insert(t->name);
                    break;
                case Stmt::Kind::Global:
                    for (const std::string& n : st->names) declared_global.insert(n);
                    break;
                case Stmt::Kind::While:
                case Stmt::Kind::If:
                case Stmt::Kind::TryExcept:
                    collect_scope(st->body, assigned, declared_global);
                    collect_scope(st->else_body, assigned, declared_global);
                    collect_scope(st->handler, assigned, declared_global);
                    break;
                default:
                    break;
            }
        }
    }

    // Value helpers.

    double to_number(const Value& v) const {
        if (std::holds_alternative<double>(v)) return std::get<double>(v);
        if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? 1.0 : 0.0;
        if (std::holds_alternative<Message>(v)) return std::get<Message>(v).payload;
        fault("value is not numeric");
    }

    static bool numericish(const Value& v) {
        return std::holds_alternative<double>(v) || std::holds_alternative<bool>(v) ||
               std::holds_alternative<Message>(v);
    }

    static double flow_of(const Value& v) {
        if (std::holds_alternative<double>(v)) return std::get<double>(v);
        if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? 1.0 : 0.0;
        if (std::holds_alternative<Message>(v)) return std::get<Message>(v).payload;
        return 0.0;
    }

    bool truthy(const Value& v) const {
        if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
        if (std::holds_alternative<double>(v)) return std::get<double>(v) != 0.0;
        if (std::holds_alternative<Message>(v)) return std::get<Message>(v).payload != 0.0;
        fault("condition is not a truth value");
    }

    // Environment access.

    Value read_var(const std::string& name) {
        if (!frames_.empty() && frames_.back().scope->locals.count(name)) {
            auto it = frames_.back().locals.find(name);
            if (it == frames_.back().locals.end())
                fault("variable '" + name + "' read before assignment");
            return it->second;
        }
        auto it = globals_.find(name);
        if (it == globals_.end()) fault("undefined variable '" + name + "'");
        return it->second;
    }

    void write_var(const std::string& name, Value v) {
        if (!frames_.empty() && frames_.back().scope->locals.count(name))
            frames_.back().locals[name] = std::move(v);
        else
            globals_[name] = std::move(v);
    }

    // Hooks and the bus.

    void fire_hook(const Stmt* stmt, double flow) {
        if (!monitoring_) return;
        auto it = ip_.site_index.find(stmt);
        if (it == ip_.site_index.end()) return;
        if (!std::isfinite(flow)) fault("non-finite flow value");
        SensorReading r = read_sensors(world_, cfg_);
        HookEvent e;
        e.line = stmt->line;
        e.stmt_index = it->second;
        e.terrain = r.terrain;
        e.odometry_bin = r.odometry_bin;
        e.flow_value = flow;
        trace_.events.push_back(e);
        trace_.step_rewards.push_back(0.0);
    }

    void deliver(const Sub& sub) {
        Value payload;
        double flow = 0.0;
        if (sub.topic == ip_.source_topic) {
            payload = Message{world_.position};
            flow = world_.position;
        } else if (sub.topic == kTerrainTopic) {
            payload = world_.terrain;
            flow = world_.terrain ? 1.0 : 0.0;
        } else {
            return;  // no sensor feeds this topic
        }
        fire_hook(sub.reg_stmt, flow);
        call_function(sub.fn, {std::move(payload)}, false);
    }

    void step_world(double velocity) {
        world_ = apply_velocity(world_, velocity, cfg_);
        ++total_publishes_;
        if (total_publishes_ > publish_cap_)
            throw DivergenceFault("publish count exceeded " + std::to_string(publish_cap_) +
                                  " without a verdict");
        if (monitoring_) {
            ++trace_.publish_count;
            if (!trace_.step_rewards.empty()) trace_.step_rewards.back() += cfg_.step_penalty;
            if (auto v = judge(world_, goal_, cfg_)) {
                trace_.verdict = *v;
                throw EpisodeDone{};
            }
        }
        for (const Sub& sub : subs_) deliver(sub);
    }

    // Calls.

    static std::string topic_name(const Expr& e) {
        if (e.kind == Expr::Kind::Ident) return e.name;
        if (e.kind == Expr::Kind::Str) return e.str_value;
        return "";
    }

    Value call_function(const Stmt* fn, std::vector<Value> args, bool check_monitor) {
        if (args.size() != fn->params.size())
            fault("function '" + fn->name + "' expects " + std::to_string(fn->params.size()) +
                  " arguments, got " + std::to_string(args.size()));
        bool monitored_here = false;
        if (check_monitor && !monitoring_) {
            for (const Value& a : args) {
                if (std::holds_alternative<double>(a) && std::get<double>(a) == goal_) {
                    monitoring_ = true;
                    monitored_here = true;
                    world_.steps = 0;
                    world_.sim_time = 0.0;
                    break;
                }
            }
        }
        Frame frame;
        frame.fn = fn;
        frame.scope = &scope_of(fn);
        for (size_t i = 0; i < args.size(); ++i)
            frame.locals[fn->params[i]] = std::move(args[i]);
        frames_.push_back(std::move(frame));
        if (monitored_here) monitored_depth_ = frames_.size();
        int saved_line = cur_line_;
        exec_block(fn->body);
        cur_line_ = saved_line;
        frames_.pop_back();
        if (monitored_here) {
            if (auto v = judge(world_, goal_, cfg_)) {
                trace_.verdict = *v;
                throw EpisodeDone{};
            }
            throw NoVerdictError("monitored call returned without a verdict");
        }
        return std::monostate{};
    }

    Value eval_call(const Expr& e, const Stmt* stmt) {
        const Expr& callee = *e.callee;
        auto positional = [&](size_t i) -> const Expr& {
            size_t seen = 0;
            for (const auto& a : e.args) {
                if (a.keyword) continue;
                if (seen == i) return *a.value;
                ++seen;
            }
            fault("missing argument " + std::to_string(i + 1));
        };
        auto positional_count = [&] {
            size_t n = 0;
            for (const auto& a : e.args)
                if (!a.keyword) ++n;
            return n;
        };

        if (callee.kind == Expr::Kind::Ident) {
            auto it = functions_.find(callee.name);
            if (it != functions_.end()) {
                std::vector<Value> args;
                for (const auto& a : e.args) {
                    if (a.keyword)
                        fault("function '" + callee.name + "' takes no keyword arguments");
                    args.push_back(eval(*a.value, stmt));
                }
                return call_function(it->second, std::move(args), true);
            }
            if (callee.name == "abs") {
                if (positional_count() != 1) fault("abs expects one argument");
                return std::fabs(to_number(eval(positional(0), stmt)));
            }
            fault("call of undefined function '" + callee.name + "'");
        }

        if (callee.kind == Expr::Kind::Attr && callee.parts.size() == 2 &&
            callee.parts[0] == "rospy") {
            const std::string& op = callee.parts[1];
            if (op == "init_node") return std::monostate{};
            if (op == "Publisher") {
                if (positional_count() < 1) fault("Publisher expects a topic");
                std::string topic = topic_name(positional(0));
                if (topic.empty()) fault("Publisher topic must be a name or string");
                return Handle{topic};
            }
            if (op == "Subscriber") {
                if (positional_count() < 2) fault("Subscriber expects a topic and a callback");
                std::string topic = topic_name(positional(0));
                if (topic.empty()) fault("Subscriber topic must be a name or string");
                const Expr& cb = positional(1);
                if (cb.kind != Expr::Kind::Ident) fault("Subscriber callback must be a name");
                auto it = functions_.find(cb.name);
                if (it == functions_.end())
                    fault("Subscriber callback '" + cb.name + "' is not defined");
                subs_.push_back(Sub{topic, it->second, stmt});
                deliver(subs_.back());  // latched topics deliver on registration
                return std::monostate{};
            }
            fault("unknown rospy operation '" + op + "'");
        }

        if (callee.kind == Expr::Kind::Attr && callee.parts.size() == 2 &&
            callee.parts[1] == "publish") {
            Value base = read_var(callee.parts[0]);
            if (!std::holds_alternative<Handle>(base))
                fault("'" + callee.parts[0] + "' is not a publisher handle");
            if (positional_count() != 1) fault("publish expects one argument");
            double v = to_number(eval(positional(0), stmt));
            // The publish hook precedes the step so its sensor state is
            // the one the action was taken in.
            if (stmt->kind == Stmt::Kind::ExprStmt && stmt->expr.get() == &e)
                fire_hook(stmt, v);
            step_world(v);
            return std::monostate{};
        }

        fault("call of undefined function '" + lang::expr_text(callee) + "'");
    }

    Value eval(const Expr& e, const Stmt* stmt) {
        switch (e.kind) {
            case Expr::Kind::Num:
                return e.num_value;
            case Expr::Kind::Bool:
                return e.bool_value;
            case Expr::Kind::Str:
                return e.str_value;
            case Expr::Kind::Ident:
                return read_var(e.name);
            case Expr::Kind::Attr: {
                Value root = read_var(e.parts[0]);
                if (std::holds_alternative<Message>(root)) return root;
                fault("'" + e.parts[0] + "' has no attributes");
            }
            case Expr::Kind::Binary: {
                double a = to_number(eval(*e.lhs, stmt));
                double b = to_number(eval(*e.rhs, stmt));
                double r = 0.0;
                switch (e.bin_op) {
                    case lang::BinaryOp::Add: r = a + b; break;
                    case lang::BinaryOp::Sub: r = a - b; break;
                    case lang::BinaryOp::Mul: r = a * b; break;
                    case lang::BinaryOp::Div:
                        if (b == 0.0) fault("division by zero");
                        r = a / b;
                        break;
                }
                if (!std::isfinite(r)) fault("non-finite arithmetic result");
                return r;
            }
            case Expr::Kind::Compare: {
                Value a = eval(*e.lhs, stmt);
                Value b = eval(*e.rhs, stmt);
                bool both_num = numericish(a) && numericish(b);
                bool both_str = std::holds_alternative<std::string>(a) &&
                                std::holds_alternative<std::string>(b);
                switch (e.cmp_op) {
                    case lang::CompareOp::Eq:
                        if (both_num) return to_number(a) == to_number(b);
                        if (both_str) return std::get<std::string>(a) == std::get<std::string>(b);
                        return false;
                    case lang::CompareOp::Ne:
                        if (both_num) return to_number(a) != to_number(b);
                        if (both_str) return std::get<std::string>(a) != std::get<std::string>(b);
                        return true;
                    default:
                        break;
                }
                if (!both_num) fault("ordered comparison needs numeric operands");
                double x = to_number(a), y = to_number(b);
                switch (e.cmp_op) {
                    case lang::CompareOp::Lt: return x < y;
                    case lang::CompareOp::Le: return x <= y;
                    case lang::CompareOp::Gt: return x > y;
                    case lang::CompareOp::Ge: return x >= y;
                    default: return false;  // unreachable
                }
            }
            case Expr::Kind::BoolChain: {
                Value v;
                for (const auto& op : e.operands) {
                    v = eval(*op, stmt);
                    bool t = truthy(v);
                    if (e.fold == lang::BoolFold::And && !t) return v;
                    if (e.fold == lang::BoolFold::Or && t) return v;
                }
                return v;
            }
            case Expr::Kind::Unary: {
                double a = to_number(eval(*e.operand, stmt));
                return e.un_op == lang::UnaryOp::Neg ? -a : a;
            }
            case Expr::Kind::Call:
                return eval_call(e, stmt);
        }
        fault("unknown expression");
    }

    void exec_block(const std::vector<lang::StmtPtr>& body) {
        for (const auto& s : body) exec_stmt(*s);
    }

    void exec_stmt(const Stmt& s) {
        if (--budget_ <= 0) throw DivergenceFault("statement budget exhausted");
        cur_line_ = s.line;
        switch (s.kind) {
            case Stmt::Kind::FuncDef:
            case Stmt::Kind::Global:
            case Stmt::Kind::Pass:
                return;
            case Stmt::Kind::Assign: {
                Value v = eval(*s.values[0], &s);
                fire_hook(&s, flow_of(v));
                assign_target(*s.targets[0], std::move(v));
                return;
            }
            case Stmt::Kind::MultiAssign: {
                std::vector<Value> vs;
                for (const auto& e : s.values) vs.push_back(eval(*e, &s));
                fire_hook(&s, flow_of(vs[0]));
                for (size_t i = 0; i < s.targets.size(); ++i)
                    assign_target(*s.targets[i], std::move(vs[i]));
                return;
            }
            case Stmt::Kind::While:
                while (true) {
                    Value c = eval(*s.cond, &s);
                    bool t = truthy(c);
                    fire_hook(&s, t ? 1.0 : 0.0);
                    if (!t) break;
                    exec_block(s.body);
                    cur_line_ = s.line;
                }
                return;
            case Stmt::Kind::If: {
                Value c = eval(*s.cond, &s);
                bool t = truthy(c);
                fire_hook(&s, t ? 1.0 : 0.0);
                if (t)
                    exec_block(s.body);
                else
                    exec_block(s.else_body);
                return;
            }
            case Stmt::Kind::TryExcept:
                // Only the declared ROS interrupt can be caught, and the
                // simulation never raises it; the handler is dead code.
                exec_block(s.body);
                return;
            case Stmt::Kind::ExprStmt: {
                const Expr& e = *s.expr;
                bool is_publish = e.kind == Expr::Kind::Call &&
                                  e.callee->kind == Expr::Kind::Attr &&
                                  e.callee->parts.size() == 2 &&
                                  e.callee->parts[1] == "publish";
                Value v = eval(e, &s);
                if (!is_publish) fire_hook(&s, flow_of(v));
                return;
            }
        }
    }

    void assign_target(const Expr& target, Value v) {
        if (target.kind == Expr::Kind::Ident) {
            write_var(target.name, std::move(v));
            return;
        }
        fault("attribute assignment is not supported");
    }
};

}  // namespace

InstrumentedProgram instrument(const Program& program, const taint::TaintReport& report) {
    InstrumentedProgram ip;
    ip.program = program.clone();
    ip.source_topic = report.source_topic;
    ip.sink_topic = report.sink_topic;

    const Stmt* reg = nullptr;
    std::string param;
    for (const auto& s : taint::find_sources(ip.program)) {
        if (s.topic == report.source_topic) {
            reg = s.stmt;
            param = s.param;
            break;
        }
    }

    int idx = 0;
    for (const auto& entry : report.instrumented) {
        const Stmt* found = nullptr;
        lang::for_each_stmt(ip.program, [&](const Stmt& s) {
            if (s.line == entry.line && !found) found = &s;
        });
        if (!found)
            throw InstrumentError("line " + std::to_string(entry.line) +
                                  " is not present in the program");
        std::string expected =
            (reg && found == reg) ? param + "=" + report.source_topic : lang::stmt_text(*found);
        if (expected != entry.text)
            throw InstrumentError("statement at line " + std::to_string(entry.line) +
                                  " does not match the report: have '" + expected +
                                  "', report says '" + entry.text + "'");
        if (ip.site_index.count(found))
            throw InstrumentError("line " + std::to_string(entry.line) +
                                  " appears twice in the report");
        ip.lines.push_back(entry.line);
        ip.site_index.emplace(found, idx++);
    }
    return ip;
}

EpisodeTrace run_episode(const InstrumentedProgram& iprog, const EnvConfig& config,
                         double goal, std::uint64_t seed) {
    Interp interp(iprog, config, goal, seed);
    return interp.run();
}

std::string trace_jsonl(const EpisodeTrace& trace) {
    std::string out;
    char buf[160];
    for (const HookEvent& e : trace.events) {
        std::snprintf(buf, sizeof buf, "{\"line\":%d,\"stmt_index\":%d,\"m\":%d,\"p\":%d,\"v\":%.17g}\n",
                      e.line, e.stmt_index, e.terrain ? 1 : 0, e.odometry_bin, e.flow_value);
        out += buf;
    }
    return out;
}

}  // namespace tarl::exec
