#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "tarl/error.hpp"
#include "tarl/interp.hpp"
#include "tarl/localize.hpp"
#include "tarl/parse.hpp"
#include "tarl/rng.hpp"
#include "tarl/taint.hpp"

using namespace tarl;
using namespace tarl::loc;
using rl::UtilityTable;
using taint::TaintReport;

namespace {

std::string load_fixture(const std::string& name) {
    std::string path = std::string(TARL_FIXTURE_DIR) + "/" + name;
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing fixture ", path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

exec::InstrumentedProgram shuttle_iprog() {
    lang::Program p = lang::parse(load_fixture("shuttle.mb"));
    TaintReport r = taint::taint_analyze(p, "Odometry", "Velocity");
    return exec::instrument(p, r);
}

TaintReport shuttle_report() {
    lang::Program p = lang::parse(load_fixture("shuttle.mb"));
    return taint::taint_analyze(p, "Odometry", "Velocity");
}

UtilityTable toy_table(std::vector<int> lines, int bins) {
    UtilityTable t;
    t.bins = bins;
    t.lines = lines;
    for (size_t i = 0; i < lines.size(); ++i) t.line_index[lines[i]] = static_cast<int>(i);
    t.q.assign(2 * static_cast<size_t>(bins) * lines.size(), 0.0);
    for (int n : lines) t.flow_norm[n] = 0.0;
    return t;
}

// source line 10, middle line 20, sink line 30
TaintReport toy_report() {
    TaintReport r;
    r.source_topic = "Odometry";
    r.sink_topic = "Velocity";
    r.chain = {{"s = 1", 10}, {"pub(k)", 30}};
    r.instrumented = {{"s = 1", 10}, {"m = s", 20}, {"pub(k)", 30}};
    return r;
}

}  // namespace

TEST_CASE("divergence map sums absolute utility gaps per state") {
    UtilityTable a = toy_table({10, 20}, 3);
    UtilityTable b = toy_table({10, 20}, 3);
    a.at(0, 1, 10) = 4.0;
    a.at(0, 1, 20) = -2.0;
    b.at(0, 1, 20) = 1.0;
    b.at(1, 2, 10) = 7.0;

    std::vector<double> d = diff_map(a, b);
    REQUIRE(d.size() == 6);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 7.0);  // |4-0| + |-2-1|
    CHECK(d[2] == 0.0);
    CHECK(d[5] == 7.0);
    CHECK(diff_map(b, a) == d);  // direction never matters

    SUBCASE("shape mismatches are rejected") {
        CHECK_THROWS_AS(diff_map(a, toy_table({10, 20}, 4)), ShapeError);
        CHECK_THROWS_AS(diff_map(a, toy_table({10, 30}, 3)), ShapeError);
        UtilityTable swapped = toy_table({10, 20}, 3);
        swapped.line_index[10] = 1;
        swapped.line_index[20] = 0;
        CHECK_THROWS_AS(diff_map(a, swapped), ShapeError);
    }
}

TEST_CASE("the default window is a quarter of the bins, rounded up") {
    CHECK(default_region_width(20) == 5);
    CHECK(default_region_width(19) == 5);
    CHECK(default_region_width(5) == 2);
    CHECK(default_region_width(4) == 1);
    CHECK(default_region_width(2) == 1);
}

TEST_CASE("the divergent region is the best window over either terrain") {
    SUBCASE("a bump in the mud row is found") {
        std::vector<double> d(10, 0.0);  // bins = 5
        d[5 + 1] = 1.0;
        d[5 + 2] = 5.0;
        d[5 + 3] = 4.0;
        Region r = max_diff_region(d, 5, 2);
        CHECK(r.terrain == 1);
        CHECK(r.p_lo == 2);
        CHECK(r.p_hi == 3);
    }

    SUBCASE("an all-zero map falls back to the first window") {
        Region r = max_diff_region(std::vector<double>(10, 0.0), 5, 2);
        CHECK(r.terrain == 0);
        CHECK(r.p_lo == 0);
        CHECK(r.p_hi == 1);
    }

    SUBCASE("ties prefer dry terrain, then the lower window") {
        std::vector<double> d = {0.0, 5.0, 5.0, 0.0};  // bins = 2, equal rows
        Region r = max_diff_region(d, 2, 1);
        CHECK(r.terrain == 0);
        CHECK(r.p_lo == 1);

        std::vector<double> twin = {3.0, 0.0, 0.0, 3.0};
        r = max_diff_region(twin, 2, 1);
        CHECK(r.terrain == 0);
        CHECK(r.p_lo == 0);
    }

    SUBCASE("a window spanning the whole row is allowed") {
        std::vector<double> d = {1.0, 2.0, 0.0, 0.0};
        Region r = max_diff_region(d, 2, 2);
        CHECK(r.terrain == 0);
        CHECK(r.p_lo == 0);
        CHECK(r.p_hi == 1);
    }

    SUBCASE("bad shapes are rejected") {
        CHECK_THROWS_AS(max_diff_region({1.0, 2.0}, 2, 1), ShapeError);
        CHECK_THROWS_AS(max_diff_region(std::vector<double>(4, 0.0), 2, 3), ShapeError);
        CHECK_THROWS_AS(max_diff_region(std::vector<double>(4, 0.0), 2, 0), ShapeError);
    }
}

TEST_CASE("utility slices sum each line's mass across the window") {
    UtilityTable t = toy_table({10, 20}, 4);
    t.at(0, 1, 10) = 1.0;
    t.at(0, 2, 10) = 2.0;
    t.at(0, 1, 20) = 5.0;
    t.at(1, 1, 10) = 100.0;  // other terrain, ignored

    std::vector<double> qs = utility_slice(t, Region{0, 1, 2});
    CHECK(qs == std::vector<double>{3.0, 5.0});
    CHECK(utility_slice(t, Region{1, 0, 3}) == std::vector<double>{100.0, 0.0});

    CHECK_THROWS_AS(utility_slice(t, Region{2, 0, 1}), ShapeError);
    CHECK_THROWS_AS(utility_slice(t, Region{0, 2, 1}), ShapeError);
    CHECK_THROWS_AS(utility_slice(t, Region{0, 0, 4}), ShapeError);
}

TEST_CASE("the culprit is the statement whose mass moved most in the region") {
    exec::InstrumentedProgram ip = shuttle_iprog();
    TaintReport rep = shuttle_report();
    UtilityTable off = UtilityTable::make(ip, 20);
    UtilityTable on = UtilityTable::make(ip, 20);

    SUBCASE("a drop on the velocity line inside mud bins is pinned") {
        for (int p = 4; p <= 6; ++p) off.at(1, p, 30) = 50.0;
        LocalizationReport lr = locate_culprit(off, on, rep);
        CHECK(lr.region.terrain == 1);
        CHECK(lr.region.p_lo == 2);
        CHECK(lr.region.p_hi == 6);
        CHECK(lr.culprit_line == 30);
        CHECK(lr.culprit_text == "vel = 5 * delta");
        CHECK(lr.margin == 150.0);
        CHECK(lr.qs_offline[off.slot(30)] == 150.0);
        CHECK(lr.qs_online[off.slot(30)] == 0.0);
    }

    SUBCASE("the sink itself is never blamed") {
        for (int p = 4; p <= 6; ++p) {
            off.at(1, p, 31) = 500.0;  // publish line dwarfs everything
            off.at(1, p, 30) = 10.0;
        }
        LocalizationReport lr = locate_culprit(off, on, rep);
        CHECK(lr.culprit_line == 30);
    }

    SUBCASE("ties between statements go to the later line") {
        off.at(1, 4, 28) = 50.0;
        off.at(1, 4, 29) = 50.0;
        LocalizationReport lr = locate_culprit(off, on, rep);
        CHECK(lr.culprit_line == 29);
        CHECK(lr.margin == 0.0);
    }

    SUBCASE("an explicit window narrows the region") {
        off.at(1, 5, 30) = 50.0;
        LocalizationReport lr = locate_culprit(off, on, rep, 1);
        CHECK(lr.region.p_lo == 5);
        CHECK(lr.region.p_hi == 5);
        CHECK(lr.culprit_line == 30);
    }

    SUBCASE("identical tables are degenerate") {
        CHECK_THROWS_AS(locate_culprit(off, on, rep), DegenerateError);
    }

    SUBCASE("report lines missing from the tables are rejected") {
        off.at(0, 0, 30) = 1.0;
        TaintReport ghost = rep;
        ghost.instrumented.push_back({"phantom", 99});
        CHECK_THROWS_AS(locate_culprit(off, on, ghost), ShapeError);
    }

    SUBCASE("a report without a sink entry is rejected") {
        off.at(0, 0, 30) = 1.0;
        TaintReport empty = rep;
        empty.chain.clear();
        CHECK_THROWS_AS(locate_culprit(off, on, empty), ShapeError);
    }
}

TEST_CASE("localization is symmetric, scale covariant, and shift invariant") {
    Rng rng(99);
    TaintReport rep = toy_report();
    int checked = 0;
    for (int iter = 0; iter < 1000; ++iter) {
        UtilityTable off = toy_table({10, 20, 30}, 6);
        UtilityTable on = toy_table({10, 20, 30}, 6);
        for (double& v : off.q) v = (rng.next_double() - 0.5) * 100.0;
        for (double& v : on.q) v = (rng.next_double() - 0.5) * 100.0;

        LocalizationReport base = locate_culprit(off, on, rep, 2);
        ++checked;

        // Swapping the tables keeps every divergence-derived field.
        LocalizationReport swapped = locate_culprit(on, off, rep, 2);
        REQUIRE(swapped.region.terrain == base.region.terrain);
        REQUIRE(swapped.region.p_lo == base.region.p_lo);
        REQUIRE(swapped.culprit_line == base.culprit_line);
        REQUIRE(swapped.margin == base.margin);

        // Scaling both tables scales the margin and moves nothing.
        double c = 0.5 + 3.0 * rng.next_double();
        UtilityTable off_s = off, on_s = on;
        for (double& v : off_s.q) v *= c;
        for (double& v : on_s.q) v *= c;
        LocalizationReport scaled = locate_culprit(off_s, on_s, rep, 2);
        REQUIRE(scaled.region.terrain == base.region.terrain);
        REQUIRE(scaled.region.p_lo == base.region.p_lo);
        REQUIRE(scaled.culprit_line == base.culprit_line);
        REQUIRE(scaled.margin == doctest::Approx(c * base.margin).epsilon(1e-9));

        // Shifting both tables by the same offset changes nothing material.
        double k = (rng.next_double() - 0.5) * 20.0;
        UtilityTable off_t = off, on_t = on;
        for (double& v : off_t.q) v += k;
        for (double& v : on_t.q) v += k;
        LocalizationReport shifted = locate_culprit(off_t, on_t, rep, 2);
        REQUIRE(shifted.region.terrain == base.region.terrain);
        REQUIRE(shifted.region.p_lo == base.region.p_lo);
        REQUIRE(shifted.culprit_line == base.culprit_line);
        REQUIRE(shifted.margin == doctest::Approx(base.margin).epsilon(1e-6));
    }
    CHECK(checked == 1000);
}

TEST_CASE("localization reports round-trip through json") {
    LocalizationReport lr;
    lr.region = Region{1, 2, 6};
    lr.qs_offline = {150.0, 0.5, 0.0};
    lr.qs_online = {0.0, 0.25, 0.0};
    lr.culprit_line = 30;
    lr.culprit_text = "vel = 5 * delta";
    lr.margin = 149.5;

    std::string text = lr.to_json();
    LocalizationReport back = LocalizationReport::from_json(text);
    CHECK(back.region.terrain == 1);
    CHECK(back.region.p_lo == 2);
    CHECK(back.region.p_hi == 6);
    CHECK(back.qs_offline == lr.qs_offline);
    CHECK(back.qs_online == lr.qs_online);
    CHECK(back.culprit_line == 30);
    CHECK(back.culprit_text == "vel = 5 * delta");
    CHECK(back.margin == 149.5);
    CHECK(back.to_json() == text);

    SUBCASE("field layout is stable") {
        CHECK(text.rfind("{\"region\":{\"terrain\":1,\"p_lo\":2,\"p_hi\":6},", 0) == 0);
    }

    SUBCASE("malformed reports are rejected") {
        CHECK_THROWS_AS(LocalizationReport::from_json("not json"), FormatError);
        CHECK_THROWS_AS(LocalizationReport::from_json("[]"), FormatError);
        CHECK_THROWS_AS(LocalizationReport::from_json("{}"), FormatError);

        nlohmann::ordered_json j = nlohmann::ordered_json::parse(text);
        nlohmann::ordered_json extra = j;
        extra["note"] = "hi";
        CHECK_THROWS_AS(LocalizationReport::from_json(extra.dump()), FormatError);

        nlohmann::ordered_json bad = j;
        bad["region"] = 3;
        CHECK_THROWS_AS(LocalizationReport::from_json(bad.dump()), FormatError);

        bad = j;
        bad["region"]["terrain"] = 2;
        CHECK_THROWS_AS(LocalizationReport::from_json(bad.dump()), FormatError);

        bad = j;
        bad["region"]["p_hi"] = 0;
        CHECK_THROWS_AS(LocalizationReport::from_json(bad.dump()), FormatError);

        bad = j;
        bad["qs_offline"] = "nope";
        CHECK_THROWS_AS(LocalizationReport::from_json(bad.dump()), FormatError);

        bad = j;
        bad["qs_online"].erase(0);
        CHECK_THROWS_AS(LocalizationReport::from_json(bad.dump()), FormatError);

        bad = j;
        bad["culprit_text"] = 7;
        CHECK_THROWS_AS(LocalizationReport::from_json(bad.dump()), FormatError);
    }

    SUBCASE("non-finite values are refused at save") {
        lr.margin = std::nan("");
        CHECK_THROWS_AS(lr.to_json(), FormatError);
    }
}
