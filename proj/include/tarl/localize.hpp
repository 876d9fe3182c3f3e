#pragma once

#include <string>
#include <vector>

#include "tarl/learner.hpp"
#include "tarl/taint.hpp"

namespace tarl::loc {

// Terrain row plus an inclusive odometry-bin window.
struct Region {
    int terrain = 0;
    int p_lo = 0;
    int p_hi = 0;
};

// Per-state divergence D(m, p) = sum over lines of |q_off - q_on|,
// flattened as m * bins + p.  Both tables must share bins, lines, and
// statement indexes (ShapeError).
std::vector<double> diff_map(const rl::UtilityTable& offline, const rl::UtilityTable& online);

// Window width used when the caller does not pick one: a quarter of the
// bins, rounded up.
int default_region_width(int bins);

// Sliding-window argmax of the divergence over each terrain row.  Ties
// prefer the smaller terrain, then the smaller window start.
Region max_diff_region(const std::vector<double>& diff, int bins, int width);

// Per-line utility mass inside the region, in ascending line order.
std::vector<double> utility_slice(const rl::UtilityTable& table, const Region& region);

struct LocalizationReport {
    Region region;
    std::vector<double> qs_offline;  // ascending line order
    std::vector<double> qs_online;
    int culprit_line = 0;
    std::string culprit_text;
    double margin = 0.0;

    std::string to_json() const;
    static LocalizationReport from_json(const std::string& text);
};

// Names the instrumented statement whose utility mass moved most between
// the two tables inside the divergent region.  The sink statement is
// skipped: the publish carries every upstream effect and would mask the
// statement that produced it.  Ties prefer the larger line; margin is
// the gap to the runner-up.  DegenerateError when nothing moved.
// width == 0 picks default_region_width(bins).
LocalizationReport locate_culprit(const rl::UtilityTable& offline, const rl::UtilityTable& online,
                                  const taint::TaintReport& report, int width = 0);

}  // namespace tarl::loc
