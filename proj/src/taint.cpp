#include "tarl/taint.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "tarl/error.hpp"
#include "tarl/parse.hpp"

namespace tarl::taint {

using lang::Expr;
using lang::Program;
using lang::Stmt;
using lang::StmtPtr;
using ojson = nlohmann::ordered_json;

namespace {

struct FnInfo {
    const Stmt* def = nullptr;
    std::set<std::string> globals;  // names declared global anywhere in the body
    std::set<std::string> locals;   // params and assigned names minus globals
};

enum class CallKind { UserFn, Abs, RospyInit, RospySubscriber, RospyPublisher, Publish };

struct CallSite {
    std::optional<CallKind> kind;  // empty for an unresolvable callee
    const Expr* call;
    const Stmt* stmt;
    std::string fn;  // enclosing function of the statement
};

// Scoped variable key: "<fn>:<var>" for locals, ":<var>" for globals.
std::string scoped(const std::string& fn, const std::string& var) { return fn + ":" + var; }

bool is_global_key(const std::string& key) { return !key.empty() && key[0] == ':'; }

void walk_exprs(const Stmt& s, const std::function<void(const Expr&)>& fn) {
    std::function<void(const Expr&)> walk = [&](const Expr& e) {
        fn(e);
        if (e.lhs) walk(*e.lhs);
        if (e.rhs) walk(*e.rhs);
        if (e.operand) walk(*e.operand);
        for (const auto& op : e.operands) walk(*op);
        if (e.callee) walk(*e.callee);
        for (const auto& a : e.args) walk(*a.value);
    };
    for (const auto& t : s.targets) walk(*t);
    for (const auto& v : s.values) walk(*v);
    if (s.cond) walk(*s.cond);
    if (s.expr) walk(*s.expr);
}

void each_stmt_in(const std::vector<StmtPtr>& body, const std::function<void(const Stmt&)>& fn) {
    for (const auto& sp : body) {
        fn(*sp);
        each_stmt_in(sp->body, fn);
        each_stmt_in(sp->else_body, fn);
        each_stmt_in(sp->handler, fn);
    }
}

// First argument of the publish call inside `stmt`.
const Expr* publish_arg(const Stmt* stmt) {
    const Expr* found = nullptr;
    walk_exprs(*stmt, [&](const Expr& e) {
        if (found || e.kind != Expr::Kind::Call || !e.callee) return;
        const Expr& c = *e.callee;
        if (c.kind == Expr::Kind::Attr && c.parts.size() == 2 && c.parts[1] == "publish")
            found = &e;
    });
    if (!found || found->args.empty() || found->args[0].keyword)
        throw AnalysisError("publish takes one positional argument");
    return found->args[0].value.get();
}

struct Analyzer {
    const Program& program;
    std::map<std::string, FnInfo> fns;
    FlowGraph graph;
    std::unordered_map<const Stmt*, int> node_of;
    std::map<const Stmt*, std::vector<int>> fn_exits;     // FuncDef stmt -> exit nodes
    std::vector<SourceSite> sources;
    std::map<std::string, std::set<std::string>> topics;  // scoped handle -> topics
    std::vector<CallSite> calls;                          // statement walk order
    std::vector<std::set<std::string>> in_, out_;         // dataflow states per node

    explicit Analyzer(const Program& p) : program(p) {
        collect_functions();
        collect_calls();
        bind_topics();
        collect_sources();
        build_nodes();
        wire_structure();
        wire_calls();
        fill_defs_uses();
    }

    // --- scoping ---

    void collect_functions() {
        for (const auto& sp : program.statements) {
            if (sp->kind != Stmt::Kind::FuncDef) {
                each_stmt_in(sp->body, reject_nested_def());
                each_stmt_in(sp->else_body, reject_nested_def());
                each_stmt_in(sp->handler, reject_nested_def());
                continue;
            }
            if (fns.count(sp->name))
                throw AnalysisError("function '" + sp->name + "' defined twice");
            FnInfo info;
            info.def = sp.get();
            each_stmt_in(sp->body, [&](const Stmt& s) {
                if (s.kind == Stmt::Kind::FuncDef)
                    throw AnalysisError("nested function definitions are unsupported");
                if (s.kind == Stmt::Kind::Global)
                    info.globals.insert(s.names.begin(), s.names.end());
            });
            for (const auto& p : sp->params)
                if (!info.globals.count(p)) info.locals.insert(p);
            each_stmt_in(sp->body, [&](const Stmt& s) {
                for (const auto& t : s.targets)
                    if (t->kind == Expr::Kind::Ident && !info.globals.count(t->name))
                        info.locals.insert(t->name);
            });
            fns[sp->name] = std::move(info);
        }
    }

    static std::function<void(const Stmt&)> reject_nested_def() {
        return [](const Stmt& s) {
            if (s.kind == Stmt::Kind::FuncDef)
                throw AnalysisError("nested function definitions are unsupported");
        };
    }

    std::string resolve(const std::string& fn, const std::string& var) const {
        if (fn.empty()) return scoped("", var);
        const FnInfo& info = fns.at(fn);
        if (info.locals.count(var)) return scoped(fn, var);
        return scoped("", var);
    }

    // --- call discovery ---

    std::optional<CallKind> classify(const Expr& call) const {
        const Expr& c = *call.callee;
        if (c.kind == Expr::Kind::Ident) {
            if (fns.count(c.name)) return CallKind::UserFn;
            if (c.name == "abs") return CallKind::Abs;
            return std::nullopt;
        }
        if (c.kind != Expr::Kind::Attr) return std::nullopt;
        if (c.parts.size() == 2 && c.parts[0] == "rospy") {
            if (c.parts[1] == "init_node") return CallKind::RospyInit;
            if (c.parts[1] == "Subscriber") return CallKind::RospySubscriber;
            if (c.parts[1] == "Publisher") return CallKind::RospyPublisher;
            return std::nullopt;
        }
        if (c.parts.size() == 2 && c.parts[1] == "publish") return CallKind::Publish;
        return std::nullopt;
    }

    void collect_calls_in(const std::vector<StmtPtr>& body, const std::string& fn) {
        for (const auto& sp : body) {
            const Stmt& s = *sp;
            walk_exprs(s, [&](const Expr& e) {
                if (e.kind == Expr::Kind::Call) calls.push_back({classify(e), &e, &s, fn});
            });
            std::string inner = s.kind == Stmt::Kind::FuncDef ? s.name : fn;
            collect_calls_in(s.body, inner);
            collect_calls_in(s.else_body, fn);
            collect_calls_in(s.handler, fn);
        }
    }

    void collect_calls() { collect_calls_in(program.statements, ""); }

    static std::string topic_name(const Expr& call, size_t arg) {
        if (call.args.size() <= arg) throw AnalysisError("missing topic argument");
        const Expr& e = *call.args[arg].value;
        if (e.kind == Expr::Kind::Ident) return e.name;
        if (e.kind == Expr::Kind::Str) return e.str_value;
        throw AnalysisError("topic argument must be a name");
    }

    // --- publisher handle binding ---

    void copy_handles(const Stmt& s, const std::string& fn,
                      const std::function<void(const std::string&, const std::set<std::string>&)>&
                          add) {
        std::string inner = s.kind == Stmt::Kind::FuncDef ? s.name : fn;
        if (s.kind == Stmt::Kind::Assign || s.kind == Stmt::Kind::MultiAssign) {
            for (size_t i = 0; i < s.targets.size(); ++i) {
                const Expr& t = *s.targets[i];
                const Expr& v = *s.values[i];
                if (t.kind != Expr::Kind::Ident) continue;
                if (v.kind != Expr::Kind::Ident && v.kind != Expr::Kind::Attr) continue;
                auto it = topics.find(resolve(fn, v.root()));
                if (it != topics.end()) add(resolve(fn, t.name), it->second);
            }
        }
        for (const auto& c : s.body) copy_handles(*c, inner, add);
        for (const auto& c : s.else_body) copy_handles(*c, fn, add);
        for (const auto& c : s.handler) copy_handles(*c, fn, add);
    }

    void bind_topics() {
        bool changed = true;
        while (changed) {
            changed = false;
            auto add = [&](const std::string& key, const std::set<std::string>& ts) {
                auto& dst = topics[key];
                size_t before = dst.size();
                dst.insert(ts.begin(), ts.end());
                if (dst.size() != before) changed = true;
            };
            for (const CallSite& cs : calls) {
                const Stmt& s = *cs.stmt;
                if (cs.kind == CallKind::RospyPublisher && s.kind == Stmt::Kind::Assign &&
                    s.values[0].get() == cs.call && s.targets[0]->kind == Expr::Kind::Ident) {
                    add(resolve(cs.fn, s.targets[0]->name), {topic_name(*cs.call, 0)});
                }
                if (cs.kind == CallKind::UserFn) {
                    const FnInfo& callee = fns.at(cs.call->callee->name);
                    for (size_t i = 0;
                         i < cs.call->args.size() && i < callee.def->params.size(); ++i) {
                        if (cs.call->args[i].keyword) continue;
                        const Expr& a = *cs.call->args[i].value;
                        if (a.kind != Expr::Kind::Ident && a.kind != Expr::Kind::Attr) continue;
                        auto it = topics.find(resolve(cs.fn, a.root()));
                        if (it != topics.end())
                            add(resolve(callee.def->name, callee.def->params[i]), it->second);
                    }
                }
            }
            for (const auto& sp : program.statements) copy_handles(*sp, "", add);
        }
    }

    void collect_sources() {
        for (const CallSite& cs : calls) {
            if (cs.kind != CallKind::RospySubscriber) continue;
            SourceSite site;
            site.topic = topic_name(*cs.call, 0);
            if (cs.call->args.size() < 2 || cs.call->args[1].value->kind != Expr::Kind::Ident)
                throw AnalysisError("subscriber callback must be a function name");
            site.callback = cs.call->args[1].value->name;
            auto it = fns.find(site.callback);
            if (it != fns.end() && !it->second.def->params.empty())
                site.param = it->second.def->params[0];
            site.stmt = cs.stmt;
            sources.push_back(std::move(site));
        }
    }

    // --- graph nodes and structural edges ---

    void add_nodes_in(const std::vector<StmtPtr>& body, const std::string& fn) {
        for (const auto& sp : body) {
            node_of[sp.get()] = static_cast<int>(graph.nodes.size());
            graph.nodes.push_back({sp.get(), fn, {}, {}, {}});
            std::string inner = sp->kind == Stmt::Kind::FuncDef ? sp->name : fn;
            add_nodes_in(sp->body, inner);
            add_nodes_in(sp->else_body, fn);
            add_nodes_in(sp->handler, fn);
        }
    }

    void build_nodes() {
        add_nodes_in(program.statements, "");
        if (!program.statements.empty()) graph.entry = node_of.at(program.statements[0].get());
    }

    void seq_edge(int from, std::optional<int> to, const Stmt* exit_fn) {
        if (to) graph.nodes[static_cast<size_t>(from)].edges.push_back(
            {*to, EdgeKind::Seq, nullptr, nullptr});
        else if (exit_fn) fn_exits[exit_fn].push_back(from);
    }

    // Wires lexical successors inside one block. `follow` is where control
    // goes after the block; absent under `exit_fn` means the function returns.
    void wire_block(const std::vector<StmtPtr>& body, std::optional<int> follow,
                    const Stmt* exit_fn) {
        for (size_t i = 0; i < body.size(); ++i) {
            const Stmt& s = *body[i];
            int n = node_of.at(&s);
            std::optional<int> next =
                i + 1 < body.size() ? std::optional<int>(node_of.at(body[i + 1].get())) : follow;
            const Stmt* tail_fn = (i + 1 == body.size() && !follow) ? exit_fn : nullptr;
            switch (s.kind) {
                case Stmt::Kind::While:
                    seq_edge(n, node_of.at(s.body.front().get()), nullptr);
                    seq_edge(n, next, tail_fn);
                    wire_block(s.body, n, nullptr);
                    break;
                case Stmt::Kind::If:
                    seq_edge(n, node_of.at(s.body.front().get()), nullptr);
                    if (!s.else_body.empty())
                        seq_edge(n, node_of.at(s.else_body.front().get()), nullptr);
                    else
                        seq_edge(n, next, tail_fn);
                    wire_block(s.body, next, tail_fn);
                    if (!s.else_body.empty()) wire_block(s.else_body, next, tail_fn);
                    break;
                case Stmt::Kind::TryExcept:
                    seq_edge(n, node_of.at(s.body.front().get()), nullptr);
                    seq_edge(n, node_of.at(s.handler.front().get()), nullptr);
                    wire_block(s.body, next, tail_fn);
                    wire_block(s.handler, next, tail_fn);
                    break;
                case Stmt::Kind::FuncDef:
                    seq_edge(n, next, tail_fn);
                    wire_block(s.body, std::nullopt, &s);
                    break;
                default:
                    seq_edge(n, next, tail_fn);
                    break;
            }
        }
    }

    void wire_structure() { wire_block(program.statements, std::nullopt, nullptr); }

    std::optional<int> linear_next(int n) const {
        for (const auto& e : graph.nodes[static_cast<size_t>(n)].edges)
            if (e.kind == EdgeKind::Seq) return e.to;
        return std::nullopt;
    }

    void wire_calls() {
        for (const CallSite& cs : calls) {
            if (!cs.kind)
                throw AnalysisError("call to undefined function '" +
                                    lang::expr_text(*cs.call->callee) + "'");
            int n = node_of.at(cs.stmt);
            // Headers only branch; calls appear in plain statements here.
            std::optional<int> next = linear_next(n);
            std::vector<FlowEdge> enter;
            auto link = [&](const Stmt* callee_def, EdgeKind in, EdgeKind out) {
                if (callee_def->body.empty()) return;
                enter.push_back(
                    {node_of.at(callee_def->body.front().get()), in, cs.stmt, callee_def});
                if (!next) return;
                auto it = fn_exits.find(callee_def);
                if (it == fn_exits.end()) return;
                for (int x : it->second)
                    graph.nodes[static_cast<size_t>(x)].edges.push_back(
                        {*next, out, cs.stmt, callee_def});
            };
            switch (*cs.kind) {
                case CallKind::UserFn:
                    link(fns.at(cs.call->callee->name).def, EdgeKind::CallEnter,
                         EdgeKind::CallReturn);
                    break;
                case CallKind::RospySubscriber: {
                    const std::string& cb = cs.call->args[1].value->name;
                    auto it = fns.find(cb);
                    if (it == fns.end())
                        throw AnalysisError("call to undefined function '" + cb + "'");
                    link(it->second.def, EdgeKind::Delivery, EdgeKind::DeliveryReturn);
                    break;
                }
                case CallKind::Publish: {
                    auto topic_it = topics.find(resolve(cs.fn, cs.call->callee->parts[0]));
                    if (topic_it == topics.end()) break;
                    for (const std::string& topic : topic_it->second)
                        for (const SourceSite& src : sources)
                            if (src.topic == topic && fns.count(src.callback))
                                link(fns.at(src.callback).def, EdgeKind::Delivery,
                                     EdgeKind::DeliveryReturn);
                    break;
                }
                default:
                    break;
            }
            auto& edges = graph.nodes[static_cast<size_t>(n)].edges;
            edges.insert(edges.begin(), enter.begin(), enter.end());
        }
    }

    // --- defs/uses for the public graph ---

    void roots_of(const Expr& e, std::vector<std::string>& out) const {
        switch (e.kind) {
            case Expr::Kind::Ident:
                out.push_back(e.name);
                return;
            case Expr::Kind::Attr:
                out.push_back(e.parts[0]);
                return;
            case Expr::Kind::Call: {
                auto k = classify(e);
                // The handle of a publish call is a read; named callees and
                // registration arguments are not.
                if (k == CallKind::Publish) out.push_back(e.callee->parts[0]);
                if (k == CallKind::RospyInit || k == CallKind::RospySubscriber ||
                    k == CallKind::RospyPublisher)
                    return;
                for (const auto& a : e.args) roots_of(*a.value, out);
                return;
            }
            default:
                if (e.lhs) roots_of(*e.lhs, out);
                if (e.rhs) roots_of(*e.rhs, out);
                if (e.operand) roots_of(*e.operand, out);
                for (const auto& op : e.operands) roots_of(*op, out);
        }
    }

    void fill_defs_uses() {
        for (FlowNode& node : graph.nodes) {
            const Stmt& s = *node.stmt;
            for (const auto& t : s.targets) {
                node.defs.push_back(t->root());
                if (t->kind == Expr::Kind::Attr) node.uses.push_back(t->parts[0]);
            }
            for (const auto& v : s.values) roots_of(*v, node.uses);
            if (s.cond) roots_of(*s.cond, node.uses);
            if (s.expr) roots_of(*s.expr, node.uses);
        }
    }

    // --- taint dataflow ---

    bool expr_tainted(const Expr& e, const std::set<std::string>& state,
                      const std::string& fn) const {
        switch (e.kind) {
            case Expr::Kind::Ident:
                return state.count(resolve(fn, e.name)) > 0;
            case Expr::Kind::Attr:
                return state.count(resolve(fn, e.parts[0])) > 0;
            case Expr::Kind::Call: {
                auto k = classify(e);
                if (k == CallKind::RospyInit || k == CallKind::RospySubscriber ||
                    k == CallKind::RospyPublisher)
                    return false;
                for (const auto& a : e.args)
                    if (expr_tainted(*a.value, state, fn)) return true;
                return false;
            }
            case Expr::Kind::Binary:
            case Expr::Kind::Compare:
                return expr_tainted(*e.lhs, state, fn) || expr_tainted(*e.rhs, state, fn);
            case Expr::Kind::Unary:
                return expr_tainted(*e.operand, state, fn);
            case Expr::Kind::BoolChain:
                for (const auto& op : e.operands)
                    if (expr_tainted(*op, state, fn)) return true;
                return false;
            default:
                return false;
        }
    }

    std::set<std::string> transfer(int n, const std::set<std::string>& in) const {
        const FlowNode& node = graph.nodes[static_cast<size_t>(n)];
        const Stmt& s = *node.stmt;
        if (s.kind != Stmt::Kind::Assign && s.kind != Stmt::Kind::MultiAssign) return in;
        std::set<std::string> out = in;
        for (size_t i = 0; i < s.targets.size(); ++i) {
            bool tainted = expr_tainted(*s.values[i], in, node.fn);
            const Expr& t = *s.targets[i];
            std::string key = resolve(node.fn, t.root());
            if (t.kind == Expr::Kind::Ident) {
                if (tainted) out.insert(key);
                else out.erase(key);
            } else if (tainted) {
                out.insert(key);  // a field write never cleans the record
            }
        }
        return out;
    }

    const Expr* call_in(const Stmt* stmt, const FlowEdge& e) const {
        for (const CallSite& cs : calls)
            if (cs.stmt == stmt && cs.kind &&
                ((e.kind == EdgeKind::CallEnter && *cs.kind == CallKind::UserFn &&
                  cs.call->callee->name == e.callee->name) ||
                 (e.kind == EdgeKind::Delivery &&
                  (*cs.kind == CallKind::RospySubscriber || *cs.kind == CallKind::Publish))))
                return cs.call;
        throw AnalysisError("internal: call site lost");
    }

    std::set<std::string> edge_state(const FlowEdge& e, const std::set<std::string>& out,
                                     const std::string& from_fn,
                                     const std::string& source_topic) const {
        if (e.kind == EdgeKind::Seq) return out;
        std::set<std::string> next;
        for (const auto& k : out)
            if (is_global_key(k)) next.insert(k);
        if (e.kind == EdgeKind::CallReturn || e.kind == EdgeKind::DeliveryReturn) return next;
        const Expr* call = call_in(e.site, e);
        if (e.kind == EdgeKind::CallEnter) {
            for (size_t i = 0; i < call->args.size() && i < e.callee->params.size(); ++i)
                if (!call->args[i].keyword && expr_tainted(*call->args[i].value, out, from_fn))
                    next.insert(scoped(e.callee->name, e.callee->params[i]));
            return next;
        }
        // Delivery. At a registration the message comes from outside: tainted
        // exactly when the topic is the source. At a publish the payload's
        // taint is the published expression's.
        bool tainted;
        if (classify(*call) == CallKind::RospySubscriber)
            tainted = topic_name(*call, 0) == source_topic;
        else
            tainted = !call->args.empty() && !call->args[0].keyword &&
                      expr_tainted(*call->args[0].value, out, from_fn);
        if (tainted && !e.callee->params.empty())
            next.insert(scoped(e.callee->name, e.callee->params[0]));
        return next;
    }

    void run_dataflow(const std::string& source_topic) {
        size_t n = graph.nodes.size();
        in_.assign(n, {});
        out_.assign(n, {});
        std::vector<std::vector<std::pair<int, const FlowEdge*>>> preds(n);
        for (size_t i = 0; i < n; ++i)
            for (const auto& e : graph.nodes[i].edges)
                preds[static_cast<size_t>(e.to)].push_back({static_cast<int>(i), &e});
        std::deque<int> work;
        std::set<int> queued;
        for (size_t i = 0; i < n; ++i) {
            work.push_back(static_cast<int>(i));
            queued.insert(static_cast<int>(i));
        }
        while (!work.empty()) {
            int v = work.front();
            work.pop_front();
            queued.erase(v);
            std::set<std::string> in;
            for (const auto& [p, e] : preds[static_cast<size_t>(v)]) {
                auto s = edge_state(*e, out_[static_cast<size_t>(p)],
                                    graph.nodes[static_cast<size_t>(p)].fn, source_topic);
                in.insert(s.begin(), s.end());
            }
            auto out = transfer(v, in);
            if (in != in_[static_cast<size_t>(v)] || out != out_[static_cast<size_t>(v)]) {
                in_[static_cast<size_t>(v)] = std::move(in);
                out_[static_cast<size_t>(v)] = std::move(out);
                for (const auto& e : graph.nodes[static_cast<size_t>(v)].edges)
                    if (queued.insert(e.to).second) work.push_back(e.to);
            }
        }
    }
};

}

int FlowGraph::index_of(const lang::Stmt* stmt) const {
    for (size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].stmt == stmt) return static_cast<int>(i);
    return -1;
}

FlowGraph build_flow_graph(const Program& program) {
    Analyzer a(program);
    // Surfacing undefined callees is part of building the graph.
    for (const CallSite& cs : a.calls)
        if (!cs.kind)
            throw AnalysisError("call to undefined function '" +
                                lang::expr_text(*cs.call->callee) + "'");
    return std::move(a.graph);
}

std::vector<SourceSite> find_sources(const Program& program) {
    Analyzer a(program);
    return std::move(a.sources);
}

std::vector<SinkSite> find_sinks(const Program& program) {
    Analyzer a(program);
    std::vector<SinkSite> out;
    for (const CallSite& cs : a.calls) {
        if (cs.kind != CallKind::Publish) continue;
        auto it = a.topics.find(a.resolve(cs.fn, cs.call->callee->parts[0]));
        if (it == a.topics.end()) continue;
        for (const std::string& topic : it->second) out.push_back({topic, cs.stmt});
    }
    return out;
}

std::string TaintReport::to_json() const {
    ojson j;
    j["source_topic"] = source_topic;
    j["sink_topic"] = sink_topic;
    auto dump = [](const std::vector<ReportEntry>& entries) {
        ojson arr = ojson::array();
        for (const auto& e : entries) arr.push_back({{"text", e.text}, {"line", e.line}});
        return arr;
    };
    j["chain"] = dump(chain);
    j["instrumented"] = dump(instrumented);
    return j.dump();
}

TaintReport TaintReport::from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const ojson::exception& e) {
        throw FormatError(std::string("taint report is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.size() != 4 || !j.contains("source_topic") ||
        !j.contains("sink_topic") || !j.contains("chain") || !j.contains("instrumented"))
        throw FormatError(
            "taint report must hold exactly source_topic, sink_topic, chain, instrumented");
    if (!j["source_topic"].is_string() || !j["sink_topic"].is_string())
        throw FormatError("topic fields must be strings");
    TaintReport r;
    r.source_topic = j["source_topic"].get<std::string>();
    r.sink_topic = j["sink_topic"].get<std::string>();
    auto load = [](const ojson& arr, std::vector<ReportEntry>& out) {
        if (!arr.is_array()) throw FormatError("chain and instrumented must be arrays");
        for (const auto& item : arr) {
            if (!item.is_object() || item.size() != 2 || !item.contains("text") ||
                !item.contains("line") || !item["text"].is_string() ||
                !item["line"].is_number_integer())
                throw FormatError("entries must hold exactly text and line");
            out.push_back({item["text"].get<std::string>(), item["line"].get<int>()});
        }
    };
    load(j["chain"], r.chain);
    load(j["instrumented"], r.instrumented);
    return r;
}

TaintReport taint_analyze(const Program& program, const std::string& source_topic,
                          const std::string& sink_topic) {
    Analyzer a(program);
    for (const CallSite& cs : a.calls)
        if (!cs.kind)
            throw AnalysisError("call to undefined function '" +
                                lang::expr_text(*cs.call->callee) + "'");

    const SourceSite* source = nullptr;
    for (const auto& s : a.sources) {
        if (s.topic != source_topic) continue;
        if (source) throw AnalysisError("multiple subscribers to topic '" + source_topic + "'");
        source = &s;
    }
    if (!source) throw NoFlowError("no subscriber reads topic '" + source_topic + "'");
    const FnInfo& cb = a.fns.at(source->callback);
    if (cb.def->params.empty())
        throw AnalysisError("callback '" + source->callback + "' takes no parameter");

    const Stmt* sink = nullptr;
    for (const CallSite& cs : a.calls) {
        if (cs.kind != CallKind::Publish) continue;
        auto it = a.topics.find(a.resolve(cs.fn, cs.call->callee->parts[0]));
        if (it == a.topics.end() || !it->second.count(sink_topic)) continue;
        if (sink && sink != cs.stmt)
            throw AnalysisError("two publishes to topic '" + sink_topic + "'");
        sink = cs.stmt;
    }
    if (!sink) throw NoFlowError("nothing publishes to topic '" + sink_topic + "'");

    a.run_dataflow(source_topic);

    int source_node = a.node_of.at(source->stmt);
    int sink_node = a.node_of.at(sink);
    size_t n = a.graph.nodes.size();

    // First-execution order, recording the enclosing top-level loop when the
    // sink is first reached.
    std::vector<int> first_idx(n, -1);
    std::vector<int> path;
    const Stmt* top_loop = nullptr;
    int counter = 0;
    std::function<void(int)> dfs = [&](int v) {
        if (first_idx[static_cast<size_t>(v)] != -1) return;
        first_idx[static_cast<size_t>(v)] = counter++;
        if (v == sink_node) {
            for (int p : path) {
                const FlowNode& node = a.graph.nodes[static_cast<size_t>(p)];
                if (node.stmt->kind == Stmt::Kind::While && node.fn.empty()) {
                    top_loop = node.stmt;
                    break;
                }
            }
        }
        path.push_back(v);
        for (const auto& e : a.graph.nodes[static_cast<size_t>(v)].edges) dfs(e.to);
        path.pop_back();
    };
    if (a.graph.entry >= 0) dfs(a.graph.entry);
    if (first_idx[static_cast<size_t>(sink_node)] == -1 ||
        first_idx[static_cast<size_t>(source_node)] == -1)
        throw NoFlowError("no path from source to sink");

    auto reach = [&](int start, bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<std::vector<int>> adj(n);
        for (size_t i = 0; i < n; ++i)
            for (const auto& e : a.graph.nodes[i].edges) {
                if (forward) adj[i].push_back(e.to);
                else adj[static_cast<size_t>(e.to)].push_back(static_cast<int>(i));
            }
        std::deque<int> q{start};
        seen[static_cast<size_t>(start)] = 1;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            for (int w : adj[static_cast<size_t>(v)])
                if (!seen[static_cast<size_t>(w)]) {
                    seen[static_cast<size_t>(w)] = 1;
                    q.push_back(w);
                }
        }
        return seen;
    };
    auto from_source = reach(source_node, true);
    auto to_sink = reach(sink_node, false);
    auto on_path = [&](int v) {
        return from_source[static_cast<size_t>(v)] && to_sink[static_cast<size_t>(v)] &&
               first_idx[static_cast<size_t>(v)] != -1;
    };

    const Expr* sink_expr = publish_arg(sink);
    const std::string& sink_fn = a.graph.nodes[static_cast<size_t>(sink_node)].fn;
    if (!a.expr_tainted(*sink_expr, a.in_[static_cast<size_t>(sink_node)], sink_fn))
        throw NoFlowError("published value does not depend on topic '" + source_topic + "'");

    // Every tainted definition or test on a source-to-sink path.
    std::set<int> instr;
    for (size_t i = 0; i < n; ++i) {
        const FlowNode& node = a.graph.nodes[i];
        const Stmt& s = *node.stmt;
        bool hit = false;
        if (s.kind == Stmt::Kind::Assign || s.kind == Stmt::Kind::MultiAssign) {
            for (const auto& v : s.values)
                if (a.expr_tainted(*v, a.in_[i], node.fn)) hit = true;
        } else if (s.kind == Stmt::Kind::While || s.kind == Stmt::Kind::If) {
            hit = a.expr_tainted(*s.cond, a.in_[i], node.fn);
        } else if (&s == sink) {
            hit = true;
        }
        if (hit && on_path(static_cast<int>(i))) instr.insert(static_cast<int>(i));
    }

    // Backward def-use slice from the sink expression to the source binding.
    std::set<int> slice;
    {
        std::deque<std::string> work;
        std::set<std::string> seen;
        std::string source_key = scoped(source->callback, cb.def->params[0]);
        std::vector<std::string> roots;
        a.roots_of(*sink_expr, roots);
        for (const auto& r : roots) {
            std::string key = a.resolve(sink_fn, r);
            if (a.in_[static_cast<size_t>(sink_node)].count(key) && seen.insert(key).second)
                work.push_back(key);
        }
        while (!work.empty()) {
            std::string key = work.front();
            work.pop_front();
            if (key == source_key) continue;  // the registration entry covers it
            for (size_t i = 0; i < n; ++i) {
                const FlowNode& node = a.graph.nodes[i];
                const Stmt& s = *node.stmt;
                if (s.kind != Stmt::Kind::Assign && s.kind != Stmt::Kind::MultiAssign) continue;
                for (size_t t = 0; t < s.targets.size(); ++t) {
                    if (a.resolve(node.fn, s.targets[t]->root()) != key) continue;
                    if (!a.expr_tainted(*s.values[t], a.in_[i], node.fn)) continue;
                    if (!on_path(static_cast<int>(i))) continue;
                    slice.insert(static_cast<int>(i));
                    std::vector<std::string> vr;
                    a.roots_of(*s.values[t], vr);
                    for (const auto& r : vr) {
                        std::string k2 = a.resolve(node.fn, r);
                        if (a.in_[i].count(k2) && seen.insert(k2).second) work.push_back(k2);
                    }
                }
            }
            // Taint that arrived through a parameter continues at the call sites.
            for (const auto& [name, info] : a.fns) {
                for (size_t pi = 0; pi < info.def->params.size(); ++pi) {
                    if (scoped(name, info.def->params[pi]) != key ||
                        !info.locals.count(info.def->params[pi]))
                        continue;
                    for (const CallSite& cs : a.calls) {
                        if (cs.kind != CallKind::UserFn || cs.call->callee->name != name ||
                            cs.call->args.size() <= pi || cs.call->args[pi].keyword)
                            continue;
                        int cn = a.node_of.at(cs.stmt);
                        std::vector<std::string> ar;
                        a.roots_of(*cs.call->args[pi].value, ar);
                        for (const auto& r : ar) {
                            std::string k2 = a.resolve(cs.fn, r);
                            if (a.in_[static_cast<size_t>(cn)].count(k2) &&
                                seen.insert(k2).second)
                                work.push_back(k2);
                        }
                    }
                }
            }
        }
    }

    // Chain: entry guard, source binding, enclosing top-level loop, the def-use
    // slice, and the sink, in first-execution order.
    std::set<int> chain = slice;
    chain.insert(sink_node);
    chain.insert(source_node);
    if (const Stmt* guard = lang::entry_guard(program)) {
        int g = a.node_of.at(guard);
        if (first_idx[static_cast<size_t>(g)] != -1) chain.insert(g);
    }
    if (top_loop) chain.insert(a.node_of.at(top_loop));

    std::set<int> all = instr;
    all.insert(chain.begin(), chain.end());

    auto ordered = [&](const std::set<int>& nodes) {
        std::vector<int> v(nodes.begin(), nodes.end());
        std::sort(v.begin(), v.end(), [&](int x, int y) {
            return first_idx[static_cast<size_t>(x)] < first_idx[static_cast<size_t>(y)];
        });
        return v;
    };
    auto entry_for = [&](int v) {
        const Stmt* s = a.graph.nodes[static_cast<size_t>(v)].stmt;
        if (s == source->stmt) return ReportEntry{source->param + "=" + source_topic, s->line};
        return ReportEntry{lang::stmt_text(*s), s->line};
    };

    TaintReport report;
    report.source_topic = source_topic;
    report.sink_topic = sink_topic;
    for (int v : ordered(chain)) report.chain.push_back(entry_for(v));
    for (int v : ordered(all)) report.instrumented.push_back(entry_for(v));
    return report;
}

std::string odometry_variable(const Program& program, const TaintReport& report) {
    std::vector<SourceSite> sources = find_sources(program);
    for (const SourceSite& site : sources) {
        if (site.topic != report.source_topic || site.param.empty()) continue;
        for (const auto& sp : program.statements) {
            if (sp->kind != Stmt::Kind::FuncDef || sp->name != site.callback) continue;
            const Stmt* hit = nullptr;
            each_stmt_in(sp->body, [&](const Stmt& s) {
                if (hit || s.kind != Stmt::Kind::Assign) return;
                bool reads_param = false;
                std::function<void(const Expr&)> scan = [&](const Expr& e) {
                    if (e.root() == site.param) reads_param = true;
                    if (e.lhs) scan(*e.lhs);
                    if (e.rhs) scan(*e.rhs);
                    if (e.operand) scan(*e.operand);
                    for (const auto& op : e.operands) scan(*op);
                    for (const auto& arg : e.args) scan(*arg.value);
                };
                scan(*s.values[0]);
                if (reads_param && s.targets[0]->kind == Expr::Kind::Ident) hit = &s;
            });
            if (hit) return hit->targets[0]->name;
        }
    }
    throw AnalysisError("callback never stores the subscribed message");
}

}
