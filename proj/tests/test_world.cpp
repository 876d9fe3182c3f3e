#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "tarl/config.hpp"
#include "tarl/error.hpp"
#include "tarl/rng.hpp"
#include "tarl/world.hpp"

using namespace tarl;

namespace {

struct TransitResult {
    int steps = 0;
    double position = 0.0;
    bool success = false;
    bool timed_out = false;
};

// Proportional controller v = gain*(goal-pos); gain_in_mud applies only
// while the terrain sensor reads true, mirroring a guarded patch.
TransitResult run_transit(const EnvConfig& cfg, Rng& rng, double gain,
                          double gain_in_mud, int max_steps = 5000) {
    WorldState s = reset(cfg, rng);
    TransitResult r;
    for (int k = 0; k < max_steps; ++k) {
        double g = s.terrain ? gain_in_mud : gain;
        double v = g * (cfg.g2 - s.position);
        s = apply_velocity(s, v, cfg);
        r.steps += 1;
        if (auto verdict = judge(s, cfg.g2, cfg)) {
            r.success = verdict->success;
            r.timed_out = !verdict->success;
            break;
        }
    }
    r.position = s.position;
    return r;
}

// Piecewise exponential-decay transit time: distance from goal decays at
// rate gain outside mud and gain*mu inside.
double closed_form_transit(double d0, double eps, double gain, double mu,
                           const std::array<double, 2>* mud, double goal) {
    if (!mud) return std::log(d0 / eps) / gain;
    double d_enter = goal - (*mud)[0];
    double d_exit = goal - (*mud)[1];
    return std::log(d0 / d_enter) / gain + std::log(d_enter / d_exit) / (gain * mu) +
           std::log(d_exit / eps) / gain;
}

EnvConfig mud_always() {
    EnvConfig c;
    c.mud_prob = 1.0;
    return c;
}

EnvConfig mud_never() {
    EnvConfig c;
    c.mud_enabled = false;
    return c;
}

}  // namespace

TEST_CASE("reset places the shuttle and draws mud") {
    Rng rng(1);
    SUBCASE("mud disabled never activates") {
        EnvConfig c = mud_never();
        for (int i = 0; i < 50; ++i) {
            WorldState s = reset(c, rng);
            CHECK(s.position == c.g1);
            CHECK(s.sim_time == 0.0);
            CHECK_FALSE(s.episode_mud.has_value());
            CHECK_FALSE(s.terrain);
        }
    }
    SUBCASE("probability one always activates") {
        EnvConfig c = mud_always();
        for (int i = 0; i < 50; ++i) {
            WorldState s = reset(c, rng);
            REQUIRE(s.episode_mud.has_value());
            CHECK((*s.episode_mud)[0] == 4.0);
            CHECK((*s.episode_mud)[1] == 6.0);
        }
    }
    SUBCASE("half probability lands near half over 1000 seeds") {
        EnvConfig c;
        int with_mud = 0;
        for (int seed = 0; seed < 1000; ++seed) {
            Rng r(episode_seed(0, kStreamLearn, seed));
            if (reset(c, r).episode_mud) ++with_mud;
        }
        double fraction = with_mud / 1000.0;
        CHECK(fraction >= 0.45);
        CHECK(fraction <= 0.55);
    }
}

TEST_CASE("apply_velocity integrates one step") {
    EnvConfig c = mud_always();
    SUBCASE("mud slows the commanded velocity") {
        WorldState s;
        s.position = 4.5;
        s.episode_mud = c.mud_region;
        s.terrain = true;
        WorldState n = apply_velocity(s, 1.0, c);
        CHECK(n.position == doctest::Approx(4.502).epsilon(1e-12));
        CHECK(n.sim_time == doctest::Approx(0.01));
    }
    SUBCASE("zero velocity holds position while time advances") {
        WorldState s = {2.0, 0.0, 0, false, std::nullopt};
        WorldState n = apply_velocity(s, 0.0, c);
        CHECK(n.position == 2.0);
        CHECK(n.sim_time == doctest::Approx(0.01));
        CHECK(n.steps == 1);
    }
    SUBCASE("terrain recomputed at the new position") {
        WorldState s;
        s.position = 3.999;
        s.episode_mud = c.mud_region;
        s.terrain = false;
        WorldState n = apply_velocity(s, 50.0, c);  // full-speed step into mud
        CHECK(n.position > 4.0);
        CHECK(n.terrain);
    }
}

TEST_CASE("read_sensors bins odometry") {
    EnvConfig c;
    WorldState s;
    SUBCASE("range minimum maps to bin zero") {
        s.position = 0.0;
        CHECK(read_sensors(s, c).odometry_bin == 0);
    }
    SUBCASE("range maximum clamps to the last bin") {
        s.position = 10.0;
        CHECK(read_sensors(s, c).odometry_bin == 19);
    }
    SUBCASE("midpoint maps to bin ten") {
        s.position = 5.0;
        CHECK(read_sensors(s, c).odometry_bin == 10);
    }
    SUBCASE("overshoot clamps at both ends") {
        s.position = -3.0;
        CHECK(read_sensors(s, c).odometry_bin == 0);
        s.position = 42.0;
        CHECK(read_sensors(s, c).odometry_bin == 19);
    }
    SUBCASE("odometry and terrain mirror the state") {
        s.position = 4.5;
        s.episode_mud = c.mud_region;
        s.terrain = true;
        SensorReading r = read_sensors(s, c);
        CHECK(r.odometry == 4.5);
        CHECK(r.terrain);
    }
}

TEST_CASE("judge applies the precision and time bounds") {
    EnvConfig c;
    WorldState s;
    SUBCASE("at goal immediately is success") {
        s.position = c.g2;
        auto v = judge(s, c.g2, c);
        REQUIRE(v.has_value());
        CHECK(v->success);
        CHECK(v->reward_total == 100.0);
        CHECK(v->reason == VerdictReason::ReachedWithinBounds);
    }
    SUBCASE("past the time bound is failure") {
        s.position = 3.0;
        s.steps = 121;
        s.sim_time = 121 * c.dt;
        auto v = judge(s, c.g2, c);
        REQUIRE(v.has_value());
        CHECK_FALSE(v->success);
        CHECK(v->reward_total == -100.0);
        CHECK(v->reason == VerdictReason::Timeout);
    }
    SUBCASE("in transit inside the bound yields no verdict") {
        s.position = 3.0;
        s.steps = 50;
        s.sim_time = 50 * c.dt;
        CHECK_FALSE(judge(s, c.g2, c).has_value());
    }
    SUBCASE("exactly t_max still counts as within the bound") {
        s.position = c.g2 - 0.04;
        s.steps = 120;
        s.sim_time = 120 * c.dt;  // exactly 1.2
        auto v = judge(s, c.g2, c);
        REQUIRE(v.has_value());
        CHECK(v->success);
    }
}

TEST_CASE("transit times match the closed-form oracle") {
    SUBCASE("mud-free transit succeeds in 104 steps") {
        EnvConfig c = mud_never();
        Rng rng(7);
        TransitResult r = run_transit(c, rng, 5.0, 5.0);
        CHECK(r.success);
        CHECK(r.steps == 104);
        CHECK(r.position == doctest::Approx(9.9518).epsilon(1e-3));
        double t_sim = r.steps * c.dt;
        double t_oracle = closed_form_transit(10.0, c.epsilon_spec, 5.0, 1.0, nullptr, c.g2);
        CHECK(std::fabs(t_sim - t_oracle) / t_oracle < 0.05);
    }
    SUBCASE("mud transit exceeds the time bound and fails at step 121") {
        EnvConfig c = mud_always();
        Rng rng(7);
        TransitResult r = run_transit(c, rng, 5.0, 5.0);
        CHECK_FALSE(r.success);
        CHECK(r.timed_out);
        CHECK(r.steps == 121);
        CHECK(r.position == doctest::Approx(9.8906).epsilon(1e-3));
        double t_oracle =
            closed_form_transit(10.0, c.epsilon_spec, 5.0, c.mud_factor, &c.mud_region, c.g2);
        CHECK(t_oracle > c.t_max);  // 1.384 s against the 1.2 s bound
    }
    SUBCASE("in-mud gain raised by factor two restores success") {
        EnvConfig c = mud_always();
        Rng rng(7);
        TransitResult r = run_transit(c, rng, 5.0, 10.0);
        CHECK(r.success);
        CHECK(r.steps == 116);
    }
    SUBCASE("repairing and non-repairing factor split") {
        EnvConfig c = mud_always();
        for (double f : {2.0, 4.0, 8.0}) {
            Rng rng(7);
            CHECK(run_transit(c, rng, 5.0, 5.0 * f).success);
        }
        for (double f : {0.25, 0.5, 1.0}) {
            Rng rng(7);
            CHECK_FALSE(run_transit(c, rng, 5.0, 5.0 * f).success);
        }
    }
}

TEST_CASE("world invariants") {
    SUBCASE("factor one makes mud dynamically invisible") {
        EnvConfig muddy = mud_always();
        muddy.mud_factor = 1.0;
        EnvConfig clear = mud_never();
        Rng r1(3), r2(3);
        WorldState a = reset(muddy, r1);
        WorldState b = reset(clear, r2);
        for (int k = 0; k < 200; ++k) {
            double v = 5.0 * (muddy.g2 - a.position);
            a = apply_velocity(a, v, muddy);
            b = apply_velocity(b, v, clear);
            CHECK(a.position == b.position);
            CHECK(a.sim_time == b.sim_time);
        }
    }
    SUBCASE("identical seeds give bitwise-identical trajectories") {
        EnvConfig c;
        for (int seed = 0; seed < 5; ++seed) {
            Rng r1(seed), r2(seed);
            TransitResult a = run_transit(c, r1, 5.0, 5.0);
            TransitResult b = run_transit(c, r2, 5.0, 5.0);
            CHECK(a.steps == b.steps);
            CHECK(a.position == b.position);
            CHECK(a.success == b.success);
        }
    }
    SUBCASE("no success verdict after a failure verdict") {
        EnvConfig c = mud_always();
        Rng rng(7);
        WorldState s = reset(c, rng);
        bool failed = false;
        for (int k = 0; k < 200; ++k) {
            s = apply_velocity(s, 5.0 * (c.g2 - s.position), c);
            auto v = judge(s, c.g2, c);
            if (failed) CHECK((!v || !v->success));
            if (v && !v->success) failed = true;
        }
        CHECK(failed);
    }
    SUBCASE("terrain false whenever the episode has no mud") {
        EnvConfig c = mud_never();
        Rng rng(11);
        WorldState s = reset(c, rng);
        for (int k = 0; k < 150; ++k) {
            s = apply_velocity(s, 5.0 * (c.g2 - s.position), c);
            CHECK_FALSE(s.terrain);
        }
    }
}

TEST_CASE("config defaults pass validation") {
    Config cfg;
    CHECK_NOTHROW(cfg.world.validate());
    CHECK_NOTHROW(cfg.rl.validate());
    CHECK_NOTHROW(cfg.repair.validate());
    CHECK(cfg.world.g2 == 10.0);
    CHECK(cfg.rl.gamma == 0.9995);
    CHECK(cfg.repair.mutation_factors == std::vector<double>{0.25, 0.5, 2.0, 4.0, 8.0});
}

TEST_CASE("offline variant removes the mud effect only") {
    EnvConfig on;
    EnvConfig off = offline_variant(on);
    CHECK(off.mud_factor == 1.0);
    CHECK(off.mud_prob == on.mud_prob);
    CHECK(off.mud_enabled == on.mud_enabled);
    CHECK(off.t_max == on.t_max);
}

TEST_CASE("config file parsing") {
    SUBCASE("all three sections with comments and arrays") {
        const char* text =
            "# shuttle setup\n"
            "[world]\n"
            "g1 = 0.0\n"
            "g2 = 12.5   # farther goal\n"
            "mud_region = [5.0, 7.0]\n"
            "mud_enabled = true\n"
            "odometry_bins = 25\n"
            "odometry_range = [0, 12.5]\n"
            "\n"
            "[rl]\n"
            "alpha = 0.2\n"
            "episodes = 10\n"
            "seed = 42\n"
            "\n"
            "[repair]\n"
            "mutation_factors = [0.5, 2.0]\n"
            "search_episodes = 50\n";
        Config cfg = parse_config(text);
        CHECK(cfg.world.g2 == 12.5);
        CHECK(cfg.world.mud_region == std::array<double, 2>{5.0, 7.0});
        CHECK(cfg.world.odometry_bins == 25);
        CHECK(cfg.rl.alpha == 0.2);
        CHECK(cfg.rl.episodes == 10);
        CHECK(cfg.rl.seed == 42);
        CHECK(cfg.repair.mutation_factors == std::vector<double>{0.5, 2.0});
        CHECK(cfg.repair.search_episodes == 50);
        CHECK(cfg.world.dt == 0.01);  // untouched default
    }
    SUBCASE("unknown section rejected") {
        CHECK_THROWS_AS(parse_config("[plant]\ndt = 0.01\n"), ConfigError);
    }
    SUBCASE("unknown key rejected") {
        CHECK_THROWS_AS(parse_config("[world]\ngravity = 9.8\n"), ConfigError);
    }
    SUBCASE("key outside any section rejected") {
        CHECK_THROWS_AS(parse_config("dt = 0.01\n"), ConfigError);
    }
    SUBCASE("malformed values rejected") {
        CHECK_THROWS_AS(parse_config("[world]\ndt = fast\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[world]\nmud_region = [4.0]\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[world]\nmud_enabled = yes\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[rl]\nepisodes = 1.5\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[rl]\nseed = -1\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[world]\ndt\n"), ConfigError);
    }
    SUBCASE("validation failures surface as config errors") {
        CHECK_THROWS_AS(parse_config("[world]\nmud_factor = 0.0\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[world]\nmud_factor = 1.5\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[world]\nepsilon_spec = -0.05\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[world]\nmud_region = [9.0, 11.0]\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[world]\nodometry_bins = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[rl]\ngamma = 1.0\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[rl]\nalpha = 0.0\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[repair]\nepsilon0 = 0.01\n"), ConfigError);
    }
    SUBCASE("missing file reported with path") {
        CHECK_THROWS_WITH_AS(load_config("/nonexistent/tarl.toml"),
                             doctest::Contains("/nonexistent/tarl.toml"), ConfigError);
    }
}
