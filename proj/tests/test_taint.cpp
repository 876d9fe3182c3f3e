#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tarl/error.hpp"
#include "tarl/parse.hpp"
#include "tarl/taint.hpp"

using namespace tarl;
using namespace tarl::lang;
using namespace tarl::taint;

namespace {

std::string load_fixture(const std::string& name) {
    std::ifstream in(std::string(TARL_FIXTURE_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<int> lines_of(const std::vector<ReportEntry>& entries) {
    std::vector<int> out;
    for (const auto& e : entries) out.push_back(e.line);
    return out;
}

std::string squeeze(std::string s) {
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    return s;
}

bool is_subsequence(const std::vector<ReportEntry>& sub, const std::vector<ReportEntry>& full) {
    size_t j = 0;
    for (const auto& e : full)
        if (j < sub.size() && e == sub[j]) ++j;
    return j == sub.size();
}

int node_at_line(const FlowGraph& g, int line) {
    for (size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].stmt->line == line) return static_cast<int>(i);
    return -1;
}

}

TEST_CASE("shuttle program yields the published seven-entry chain") {
    Program p = parse(load_fixture("shuttle.mb"));
    TaintReport r = taint_analyze(p, "Odometry", "Velocity");

    CHECK(r.source_topic == "Odometry");
    CHECK(r.sink_topic == "Velocity");
    REQUIRE(r.chain.size() == 7);
    CHECK(lines_of(r.chain) == std::vector<int>{33, 36, 22, 38, 28, 30, 31});

    const char* expected[] = {
        "if __name__ == '__main__'", "data=Odometry", "pos=data.pose.pose.position",
        "while True", "delta=goal - pos", "vel=5*delta", "vout.publish(vel)",
    };
    for (size_t i = 0; i < 7; ++i) CHECK(squeeze(r.chain[i].text) == squeeze(expected[i]));
    CHECK(r.chain[1].text == "data=Odometry");
    CHECK(r.chain.back().text == "vout.publish(vel)");
}

TEST_CASE("instrumented set adds the error computation and its loop test") {
    Program p = parse(load_fixture("shuttle.mb"));
    TaintReport r = taint_analyze(p, "Odometry", "Velocity");

    REQUIRE(r.instrumented.size() == 9);
    CHECK(lines_of(r.instrumented) == std::vector<int>{33, 36, 22, 38, 27, 28, 29, 30, 31});
    CHECK(r.instrumented[4].text == "while err > Epsilon");
    CHECK(r.instrumented[6].text == "err = abs(delta)");
    CHECK(is_subsequence(r.chain, r.instrumented));
}

TEST_CASE("swapping the error and velocity lines moves them in the report") {
    Program p = parse(load_fixture("shuttle_swapped.mb"));
    TaintReport r = taint_analyze(p, "Odometry", "Velocity");

    CHECK(lines_of(r.instrumented) == std::vector<int>{33, 36, 22, 38, 27, 28, 29, 30, 31});
    CHECK(r.instrumented[6].text == "vel = 5 * delta");
    CHECK(r.instrumented[7].text == "err = abs(delta)");
    CHECK(lines_of(r.chain) == std::vector<int>{33, 36, 22, 38, 28, 29, 31});
    CHECK(is_subsequence(r.chain, r.instrumented));
}

TEST_CASE("sources and sinks enumerate registrations and resolved publishes") {
    Program p = parse(load_fixture("shuttle.mb"));

    auto sources = find_sources(p);
    REQUIRE(sources.size() == 1);
    CHECK(sources[0].topic == "Odometry");
    CHECK(sources[0].callback == "callback");
    CHECK(sources[0].param == "data");
    CHECK(sources[0].stmt->line == 36);

    auto sinks = find_sinks(p);
    REQUIRE(sinks.size() == 1);
    CHECK(sinks[0].topic == "Velocity");
    CHECK(sinks[0].stmt->line == 31);

    Program empty = parse("x = 1\n");
    CHECK(find_sources(empty).empty());
    CHECK(find_sinks(empty).empty());

    Program two = parse(
        "def a(m):\n    global x\n    x = m\n"
        "def b(m):\n    global y\n    y = m\n"
        "rospy.Subscriber(T1, a)\n"
        "rospy.Subscriber(T2, b)\n");
    auto both = find_sources(two);
    REQUIRE(both.size() == 2);
    CHECK(both[0].topic == "T1");
    CHECK(both[1].topic == "T2");
}

TEST_CASE("flow graph links call sites, callbacks, and trivial programs") {
    SUBCASE("single statement") {
        Program p = parse("x = 1\n");
        FlowGraph g = build_flow_graph(p);
        REQUIRE(g.nodes.size() == 1);
        CHECK(g.nodes[0].edges.empty());
        CHECK(g.nodes[0].defs == std::vector<std::string>{"x"});
        CHECK(g.entry == 0);
    }
    SUBCASE("undefined callee") {
        CHECK_THROWS_AS(build_flow_graph(parse("foo()\n")), AnalysisError);
    }
    SUBCASE("travel body reachable from both call sites") {
        Program p = parse(load_fixture("shuttle.mb"));
        FlowGraph g = build_flow_graph(p);
        int entry_of_travel = node_at_line(g, 25);
        REQUIRE(entry_of_travel >= 0);
        for (int line : {39, 40}) {
            int call = node_at_line(g, line);
            REQUIRE(call >= 0);
            bool linked = false;
            for (const auto& e : g.nodes[static_cast<size_t>(call)].edges)
                if (e.kind == EdgeKind::CallEnter && e.to == entry_of_travel) linked = true;
            CHECK(linked);
        }
    }
    SUBCASE("publish handle used to read") {
        Program p = parse(load_fixture("shuttle.mb"));
        FlowGraph g = build_flow_graph(p);
        int sink = node_at_line(g, 31);
        REQUIRE(sink >= 0);
        auto& uses = g.nodes[static_cast<size_t>(sink)].uses;
        CHECK(std::count(uses.begin(), uses.end(), "vout") == 1);
        CHECK(std::count(uses.begin(), uses.end(), "vel") == 1);
    }
}

TEST_CASE("missing flow is reported as such") {
    SUBCASE("no subscriber") {
        Program p = parse("h = rospy.Publisher(T, X, 1)\nh.publish(1)\n");
        CHECK_THROWS_AS(taint_analyze(p, "S", "T"), NoFlowError);
    }
    SUBCASE("no publisher") {
        Program p = parse("def cb(d):\n    global x\n    x = d\nrospy.Subscriber(S, cb)\n");
        CHECK_THROWS_AS(taint_analyze(p, "S", "T"), NoFlowError);
    }
    SUBCASE("published value independent of the source") {
        Program p = parse(
            "def cb(d):\n    global x\n    x = d\n"
            "rospy.Subscriber(S, cb)\n"
            "h = rospy.Publisher(T, X, 1)\n"
            "while True:\n    h.publish(1)\n");
        CHECK_THROWS_AS(taint_analyze(p, "S", "T"), NoFlowError);
    }
}

TEST_CASE("ambiguous topologies are rejected") {
    SUBCASE("two publishes to the sink topic") {
        Program p = parse(
            "def cb(d):\n    global x\n    x = d\n"
            "def go(v):\n    global x\n    v.publish(x)\n"
            "rospy.Subscriber(S, cb)\n"
            "h = rospy.Publisher(T, X, 1)\n"
            "while True:\n    go(h)\n    h.publish(x)\n");
        CHECK_THROWS_AS(taint_analyze(p, "S", "T"), AnalysisError);
    }
    SUBCASE("two subscribers to the source topic") {
        Program p = parse(
            "def a(m):\n    global x\n    x = m\n"
            "def b(m):\n    global x\n    x = m\n"
            "rospy.Subscriber(S, a)\nrospy.Subscriber(S, b)\n"
            "h = rospy.Publisher(T, X, 1)\nh.publish(x)\n");
        CHECK_THROWS_AS(taint_analyze(p, "S", "T"), AnalysisError);
    }
    SUBCASE("callback without parameter") {
        Program p = parse(
            "def cb():\n    pass\n"
            "rospy.Subscriber(S, cb)\n"
            "h = rospy.Publisher(T, X, 1)\nh.publish(1)\n");
        CHECK_THROWS_AS(taint_analyze(p, "S", "T"), AnalysisError);
    }
    SUBCASE("callback not defined") {
        Program p = parse("rospy.Subscriber(S, nope)\n");
        CHECK_THROWS_AS(taint_analyze(p, "S", "T"), AnalysisError);
    }
}

TEST_CASE("guardless program still produces an ordered chain") {
    Program p = parse(
        "def cb(d):\n"
        "    global p\n"
        "    p = d.pose\n"
        "def go(goal, v):\n"
        "    global p\n"
        "    e = 1\n"
        "    while e > Eps:\n"
        "        e = goal - p\n"
        "        v.publish(e)\n"
        "rospy.Subscriber(S, cb)\n"
        "h = rospy.Publisher(T, X, 1)\n"
        "while True:\n"
        "    go(G, h)\n");
    TaintReport r = taint_analyze(p, "S", "T");
    CHECK(lines_of(r.chain) == std::vector<int>{10, 3, 12, 8, 9});
    CHECK(r.chain[0].text == "d=S");
    CHECK(lines_of(r.instrumented) == std::vector<int>{10, 3, 12, 7, 8, 9});
    CHECK(is_subsequence(r.chain, r.instrumented));
}

TEST_CASE("report JSON round trips byte for byte") {
    Program p = parse(load_fixture("shuttle.mb"));
    TaintReport r = taint_analyze(p, "Odometry", "Velocity");
    std::string json = r.to_json();
    TaintReport back = TaintReport::from_json(json);
    CHECK(back.to_json() == json);
    CHECK(back.chain.size() == r.chain.size());
    CHECK(back.instrumented[4].line == 27);

    // Identical input, identical bytes.
    CHECK(taint_analyze(p, "Odometry", "Velocity").to_json() == json);
}

TEST_CASE("malformed report JSON is rejected") {
    CHECK_THROWS_AS(TaintReport::from_json("not json"), FormatError);
    CHECK_THROWS_AS(TaintReport::from_json("{}"), FormatError);
    CHECK_THROWS_AS(TaintReport::from_json(
                        R"({"source_topic":"a","sink_topic":"b","chain":[],"instrumented":[],"extra":1})"),
                    FormatError);
    CHECK_THROWS_AS(TaintReport::from_json(
                        R"({"source_topic":"a","sink_topic":"b","chain":[{"text":"x"}],"instrumented":[]})"),
                    FormatError);
    CHECK_THROWS_AS(TaintReport::from_json(
                        R"({"source_topic":1,"sink_topic":"b","chain":[],"instrumented":[]})"),
                    FormatError);
}

TEST_CASE("the odometry variable is the callback's stored name") {
    Program p = parse(load_fixture("shuttle.mb"));
    TaintReport r = taint_analyze(p, "Odometry", "Velocity");
    CHECK(odometry_variable(p, r) == "pos");

    Program swapped = parse(load_fixture("shuttle_swapped.mb"));
    CHECK(odometry_variable(swapped, taint_analyze(swapped, "Odometry", "Velocity")) == "pos");
}
