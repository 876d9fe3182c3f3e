#pragma once

#include <string>
#include <vector>

#include "tarl/ast.hpp"

namespace tarl::taint {

enum class EdgeKind {
    Seq,             // lexical control flow, state passes unchanged
    CallEnter,       // call site to callee entry, binds arguments to parameters
    CallReturn,      // callee exit back past the call site, globals survive
    Delivery,        // publish or registration to callback entry, binds the message
    DeliveryReturn,  // callback exit back to the delivering statement's successor
};

struct FlowEdge {
    int to;
    EdgeKind kind;
    const lang::Stmt* site;    // call/publish/registration statement for non-Seq kinds
    const lang::Stmt* callee;  // FuncDef entered by CallEnter/Delivery
};

struct FlowNode {
    const lang::Stmt* stmt;
    std::string fn;  // enclosing function name, empty at top level
    std::vector<FlowEdge> edges;          // ordered: execution tries them first to last
    std::vector<std::string> defs, uses;  // root variable names
};

// Nodes and sites borrow Stmt pointers from the analyzed Program;
// the Program must outlive any FlowGraph, SourceSite, or SinkSite.
struct FlowGraph {
    std::vector<FlowNode> nodes;
    int entry = -1;  // first top-level node, -1 for an empty program

    int index_of(const lang::Stmt* stmt) const;  // -1 if absent
};

// Control-flow and def-use skeleton: function bodies reachable through call
// edges, callback bodies through delivery edges at their registration and at
// every publish to their topic.
FlowGraph build_flow_graph(const lang::Program& program);

struct SourceSite {
    std::string topic;
    std::string callback;
    std::string param;  // empty when the callback is undefined or nullary
    const lang::Stmt* stmt;
};

struct SinkSite {
    std::string topic;
    const lang::Stmt* stmt;
};

// Subscriber registrations in source order.
std::vector<SourceSite> find_sources(const lang::Program& program);

// publish() statements with their Publisher topics, resolved through direct
// handle assignment and call-parameter binding, in source order.
std::vector<SinkSite> find_sinks(const lang::Program& program);

struct ReportEntry {
    std::string text;
    int line;

    bool operator==(const ReportEntry&) const = default;
};

struct TaintReport {
    std::string source_topic;
    std::string sink_topic;
    std::vector<ReportEntry> chain;         // display chain, sink last
    std::vector<ReportEntry> instrumented;  // superset of chain, same order

    std::string to_json() const;
    static TaintReport from_json(const std::string& text);
};

// Extracts the sensor-to-actuator flow: the display chain (entry guard,
// source binding, enclosing loop, def-use chain, sink) and the full set of
// tainted statements on source-to-sink paths, both in first-execution order.
TaintReport taint_analyze(const lang::Program& program, const std::string& source_topic,
                          const std::string& sink_topic);

// Name of the variable the source callback assigns from its bound parameter.
std::string odometry_variable(const lang::Program& program, const TaintReport& report);

}
