#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tarl/config.hpp"
#include "tarl/error.hpp"
#include "tarl/interp.hpp"
#include "tarl/localize.hpp"
#include "tarl/mend.hpp"
#include "tarl/parse.hpp"
#include "tarl/taint.hpp"

using namespace tarl;
using namespace tarl::mend;
using lang::Program;
using loc::LocalizationReport;
using loc::Region;
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

Program fixture_program() { return lang::parse(load_fixture("shuttle.mb")); }

TaintReport fixture_report(const Program& p) {
    return taint::taint_analyze(p, "Odometry", "Velocity");
}

// Localization outcome matching the planted fault: mud row, bins 8..12
// (positions 4 to 6.5), velocity line to blame.
LocalizationReport fault_report() {
    LocalizationReport lr;
    lr.region = Region{1, 8, 12};
    lr.qs_offline = std::vector<double>(9, 0.0);
    lr.qs_online = std::vector<double>(9, 0.0);
    lr.culprit_line = 30;
    lr.culprit_text = "vel = 5 * delta";
    lr.margin = 100.0;
    return lr;
}

exec::InstrumentedProgram bare_of(const Program& p) {
    exec::InstrumentedProgram ip;
    ip.program = p.clone();
    ip.source_topic = "Odometry";
    ip.sink_topic = "Velocity";
    return ip;
}

std::map<std::string, int> line_counts(const std::string& text) {
    std::map<std::string, int> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) out[line] += 1;
    return out;
}

EnvConfig mud_never() {
    EnvConfig c;
    c.mud_enabled = false;
    return c;
}

EnvConfig mud_always() {
    EnvConfig c;
    c.mud_prob = 1.0;
    return c;
}

}  // namespace

TEST_CASE("mutant arms cover every factor and end with the identity") {
    Program p = fixture_program();
    std::vector<Arm> arms =
        generate_mutants(p, fixture_report(p), fault_report(), EnvConfig{}, RepairParams{});

    REQUIRE(arms.size() == 6);
    std::vector<double> constants;
    for (int i = 0; i < 5; ++i) {
        CHECK(arms[i].id == i);
        CHECK_FALSE(arms[i].identity);
        CHECK(arms[i].literal_ordinal == 0);
        CHECK(arms[i].source_topic == "Odometry");
        CHECK(arms[i].sink_topic == "Velocity");
        constants.push_back(arms[i].constant);
    }
    CHECK(constants == std::vector<double>{1.25, 2.5, 10.0, 20.0, 40.0});
    CHECK(arms[2].factor == 2.0);

    CHECK(arms[5].identity);
    CHECK(arms[5].id == 5);
    CHECK(arms[5].program.equals(p));
}

TEST_CASE("the guarded patch rewrites only the culprit block and adds the feed") {
    Program p = fixture_program();
    std::vector<Arm> arms =
        generate_mutants(p, fixture_report(p), fault_report(), EnvConfig{}, RepairParams{});
    const Program& patched = arms[2].program;  // constant 10

    std::map<std::string, int> before = line_counts(lang::unparse(p));
    std::map<std::string, int> after = line_counts(lang::unparse(patched));

    std::vector<std::string> added = {
        "        if __tarl_terrain == True and pos >= 4 and pos <= 6.5:",
        "            vel = 10 * delta",
        "        else:",
        "            vel = 5 * delta",
        "def __tarl_cb(data):",
        "    global __tarl_terrain",
        "    __tarl_terrain = data",
        "        rospy.Subscriber(Terrain, __tarl_cb)",
    };
    for (const std::string& line : added) {
        CAPTURE(line);
        CHECK(after[line] == before[line] + 1);
    }
    CHECK(after["        vel = 5 * delta"] == before["        vel = 5 * delta"] - 1);

    // Every other line is untouched.
    int moved = 0;
    for (const auto& [line, n] : after)
        if (before[line] != n) ++moved;
    for (const auto& [line, n] : before)
        if (after.find(line) == after.end()) ++moved;
    CHECK(moved == 9);

    SUBCASE("the feed registers after the source and its callback sits at top level") {
        std::vector<std::string> lines;
        std::istringstream in(lang::unparse(patched));
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
        auto at = std::find(lines.begin(), lines.end(),
                            "        rospy.Subscriber(Odometry, callback)");
        REQUIRE(at != lines.end());
        CHECK(*(at + 1) == "        rospy.Subscriber(Terrain, __tarl_cb)");
        CHECK(*(at + 2) == "        vpub = rospy.Publisher(Velocity, Twist, 10)");

        auto def = std::find(lines.begin(), lines.end(), "def __tarl_cb(data):");
        REQUIRE(def != lines.end());
        CHECK(*(def + 3) == "if __name__ == '__main__':");
    }

    SUBCASE("the patched text reparses to the same tree and still has the flow") {
        Program again = lang::parse(lang::unparse(patched));
        CHECK(again.equals(patched));
        TaintReport rep = taint::taint_analyze(again, "Odometry", "Velocity");
        CHECK(rep.source_topic == "Odometry");
        CHECK(rep.chain.size() >= 5);
    }
}

TEST_CASE("sensor feed injection is anchored and collision-checked") {
    Program p = fixture_program();
    inject_sensor_binding(p);
    std::string text = lang::unparse(p);
    CHECK(text.find("def __tarl_cb(data):") != std::string::npos);
    CHECK(text.find("rospy.Subscriber(Terrain, __tarl_cb)") != std::string::npos);

    SUBCASE("a second injection collides") {
        CHECK_THROWS_AS(inject_sensor_binding(p), NameCollisionError);
    }

    SUBCASE("user code owning the reserved global collides") {
        Program q = lang::parse(
            "def f(data):\n    pass\n__tarl_terrain = 1\nrospy.Subscriber(Odometry, f)\n");
        CHECK_THROWS_AS(inject_sensor_binding(q), NameCollisionError);
    }

    SUBCASE("a program without subscriptions has no anchor") {
        Program q = lang::parse("x = 1\n");
        CHECK_THROWS_WITH_AS(inject_sensor_binding(q), doctest::Contains("no subscriber"),
                             Error);
    }
}

TEST_CASE("mutation needs a numeric constant in the culprit") {
    Program p = fixture_program();
    LocalizationReport lr = fault_report();
    lr.culprit_line = 29;
    lr.culprit_text = "err = abs(delta)";
    CHECK_THROWS_AS(generate_mutants(p, fixture_report(p), lr, EnvConfig{}, RepairParams{}),
                    NoConstantsError);
}

TEST_CASE("stale or out-of-range localization inputs are rejected") {
    Program p = fixture_program();
    TaintReport rep = fixture_report(p);

    LocalizationReport edited = fault_report();
    edited.culprit_text = "vel = 6 * delta";
    CHECK_THROWS_WITH_AS(generate_mutants(p, rep, edited, EnvConfig{}, RepairParams{}),
                         doctest::Contains("reads"), Error);

    LocalizationReport ghost = fault_report();
    ghost.culprit_line = 99;
    CHECK_THROWS_WITH_AS(generate_mutants(p, rep, ghost, EnvConfig{}, RepairParams{}),
                         doctest::Contains("not present"), Error);

    LocalizationReport wide = fault_report();
    wide.region.p_hi = 20;
    CHECK_THROWS_AS(generate_mutants(p, rep, wide, EnvConfig{}, RepairParams{}), ShapeError);
}

TEST_CASE("the guard is inert off the mud and decisive on it") {
    Program p = fixture_program();
    std::vector<Arm> arms =
        generate_mutants(p, fixture_report(p), fault_report(), EnvConfig{}, RepairParams{});
    exec::InstrumentedProgram raw = bare_of(p);

    SUBCASE("on clear ground every arm replays the unpatched transit") {
        EnvConfig cfg = mud_never();
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            exec::EpisodeTrace want = exec::run_episode(raw, cfg, cfg.g2, seed);
            for (const Arm& a : arms) {
                exec::InstrumentedProgram ip = bare_of(a.program);
                exec::EpisodeTrace got = exec::run_episode(ip, cfg, cfg.g2, seed);
                CHECK(got.publish_count == want.publish_count);
                CHECK(got.verdict.success == want.verdict.success);
                CHECK(got.verdict.reward_total == want.verdict.reward_total);
            }
            CHECK(want.publish_count == 104);
        }
    }

    SUBCASE("in permanent mud the strengthened constants recover the transit") {
        EnvConfig cfg = mud_always();
        std::map<double, int> expected_steps = {{10.0, 116}, {20.0, 106}, {40.0, 101}};
        for (const Arm& a : arms) {
            exec::InstrumentedProgram ip = bare_of(a.program);
            exec::EpisodeTrace t = exec::run_episode(ip, cfg, cfg.g2, 1);
            if (!a.identity && expected_steps.count(a.constant)) {
                CHECK(t.verdict.success);
                CHECK(t.publish_count == expected_steps[a.constant]);
            } else {
                CHECK_FALSE(t.verdict.success);
                CHECK(t.publish_count == 121);
            }
        }
    }
}

TEST_CASE("the search follows the best mean and logs a faithful running average") {
    Program p = fixture_program();
    std::vector<Arm> arms =
        generate_mutants(p, fixture_report(p), fault_report(), EnvConfig{}, RepairParams{});
    RepairParams params;
    params.search_episodes = 60;
    params.seed = 5;

    SearchResult res = epsilon_greedy_search(arms, EnvConfig{}, params);
    REQUIRE(res.log.size() == 60);

    double running = 0.0;
    std::vector<double> totals(arms.size(), 0.0);
    std::vector<int> pulls(arms.size(), 0);
    for (size_t i = 0; i < res.log.size(); ++i) {
        const SearchEntry& e = res.log[i];
        CHECK(e.episode == static_cast<int>(i));
        REQUIRE(e.arm >= 0);
        REQUIRE(e.arm < static_cast<int>(arms.size()));
        CHECK((e.reward == 100.0 || e.reward == -100.0));
        running += e.reward;
        CHECK(e.atr == running / static_cast<double>(i + 1));
        totals[e.arm] += e.reward;
        pulls[e.arm] += 1;
    }
    int total_pulls = 0;
    for (size_t i = 0; i < arms.size(); ++i) {
        CHECK(res.stats[i].pulls == pulls[i]);
        CHECK(res.stats[i].total == totals[i]);
        total_pulls += res.stats[i].pulls;
    }
    CHECK(total_pulls == 60);

    double eps = params.epsilon0;
    for (int i = 0; i < 60; ++i) eps = std::max(eps * params.epsilon_decay, params.epsilon_min);
    CHECK(res.final_epsilon == eps);

    SUBCASE("the same seed replays the same search") {
        SearchResult again = epsilon_greedy_search(arms, EnvConfig{}, params);
        CHECK(search_log_csv(again.log) == search_log_csv(res.log));
    }

    SUBCASE("a different seed explores differently") {
        params.seed = 6;
        SearchResult other = epsilon_greedy_search(arms, EnvConfig{}, params);
        CHECK(search_log_csv(other.log) != search_log_csv(res.log));
    }
}

TEST_CASE("arm selection enforces the pull floor") {
    RepairParams params;
    params.search_episodes = 120;

    SearchResult res;
    res.stats = {PullStats{10, 500.0}, PullStats{9, 900.0}, PullStats{100, 1000.0}};
    CHECK(select_arm(res, params) == 0);  // floor 10 drops arm 1's mean 100

    SUBCASE("ties go to the lower id") {
        res.stats = {PullStats{20, 1000.0}, PullStats{20, 1000.0}, PullStats{20, 0.0}};
        CHECK(select_arm(res, params) == 0);
    }

    SUBCASE("nobody sampled enough") {
        res.stats = {PullStats{2, 200.0}, PullStats{9, 900.0}, PullStats{1, 100.0}};
        CHECK_THROWS_AS(select_arm(res, params), InsufficientDataError);
    }

    SUBCASE("the floor never drops below three pulls") {
        params.search_episodes = 0;
        res.stats = {PullStats{3, 0.0}, PullStats{2, 200.0}};
        CHECK(select_arm(res, params) == 0);
    }

    SUBCASE("an empty search has nothing to select") {
        res.stats.clear();
        CHECK_THROWS_AS(select_arm(res, params), InsufficientDataError);
    }
}

TEST_CASE("the search log serializes exactly") {
    std::vector<SearchEntry> log = {{0, 3, 100.0, 100.0}, {1, 0, -100.0, 0.0}};
    CHECK(search_log_csv(log) == "episode,arm,reward,atr\n0,3,100,100\n1,0,-100,0\n");
    CHECK(search_log_csv({}) == "episode,arm,reward,atr\n");
}

TEST_CASE("evaluation reports the average terminal reward") {
    Program p = fixture_program();
    std::vector<Arm> arms =
        generate_mutants(p, fixture_report(p), fault_report(), EnvConfig{}, RepairParams{});
    RepairParams params;
    params.eval_episodes = 40;

    SUBCASE("the identity arm on clear ground always arrives") {
        EvalStats s = evaluate_arm(arms[5], mud_never(), params);
        CHECK(s.episodes == 40);
        CHECK(s.atr == 100.0);
        CHECK(s.success_rate == 1.0);
    }

    SUBCASE("the identity arm in random mud fails about half the time") {
        EvalStats s = evaluate_arm(arms[5], EnvConfig{}, params);
        int wins = static_cast<int>(s.success_rate * 40.0 + 0.5);
        CHECK(s.atr == (100.0 * (2.0 * wins - 40.0)) / 40.0);
        CHECK(s.success_rate > 0.2);
        CHECK(s.success_rate < 0.8);
    }

    SUBCASE("a strengthened arm in permanent mud always arrives") {
        EvalStats s = evaluate_arm(arms[4], mud_always(), params);
        CHECK(s.atr == 100.0);
        CHECK(s.success_rate == 1.0);
    }

    SUBCASE("zero validation episodes yield zeros") {
        params.eval_episodes = 0;
        EvalStats s = evaluate_arm(arms[5], EnvConfig{}, params);
        CHECK(s.episodes == 0);
        CHECK(s.atr == 0.0);
    }
}

TEST_CASE("repair picks a strengthened constant and proves it out") {
    Program p = fixture_program();
    TaintReport rep = fixture_report(p);
    RepairParams params;
    params.search_episodes = 150;
    params.eval_episodes = 60;
    params.seed = 0;

    RepairOutcome out = repair(p, rep, fault_report(), EnvConfig{}, params);
    const Arm& chosen = out.arms[out.selected];
    CHECK_FALSE(chosen.identity);
    CHECK((chosen.constant == 10.0 || chosen.constant == 20.0 || chosen.constant == 40.0));
    CHECK(out.eval.success_rate == 1.0);
    CHECK(out.eval.atr == 100.0);

    // The mended program beats the broken one mid-search and the polished
    // run beats the search average.
    EvalStats broken = evaluate_arm(out.arms[5], EnvConfig{}, params);
    double search_end = out.search.log.back().atr;
    CHECK(search_end > broken.atr);
    CHECK(search_end < out.eval.atr);

    SUBCASE("the outcome replays bitwise") {
        RepairOutcome again = repair(p, rep, fault_report(), EnvConfig{}, params);
        CHECK(again.selected == out.selected);
        CHECK(search_log_csv(again.search.log) == search_log_csv(out.search.log));
        CHECK(lang::unparse(again.arms[again.selected].program) ==
              lang::unparse(out.arms[out.selected].program));
    }
}
