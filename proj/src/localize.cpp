#include "tarl/localize.hpp"

#include <cmath>

#include <json.hpp>

#include "tarl/error.hpp"

namespace tarl::loc {

using ojson = nlohmann::ordered_json;

std::vector<double> diff_map(const rl::UtilityTable& offline, const rl::UtilityTable& online) {
    if (offline.bins != online.bins || offline.lines != online.lines)
        throw ShapeError("utility tables cover different state spaces");
    if (offline.line_index != online.line_index)
        throw ShapeError("utility tables disagree on statement indexes");
    std::vector<double> d(2 * static_cast<size_t>(offline.bins), 0.0);
    for (int m = 0; m < 2; ++m)
        for (int p = 0; p < offline.bins; ++p) {
            double sum = 0.0;
            for (int line : offline.lines)
                sum += std::fabs(offline.at(m, p, line) - online.at(m, p, line));
            d[static_cast<size_t>(m) * offline.bins + p] = sum;
        }
    return d;
}

int default_region_width(int bins) { return (bins + 3) / 4; }

Region max_diff_region(const std::vector<double>& diff, int bins, int width) {
    if (bins < 1 || diff.size() != 2 * static_cast<size_t>(bins))
        throw ShapeError("divergence map must hold 2 * bins entries");
    if (width < 1 || width > bins)
        throw ShapeError("window width must lie in [1, bins]");
    Region best{0, 0, width - 1};
    double best_sum = -1.0;
    for (int m = 0; m < 2; ++m)
        for (int lo = 0; lo + width <= bins; ++lo) {
            double sum = 0.0;
            for (int p = lo; p < lo + width; ++p)
                sum += diff[static_cast<size_t>(m) * bins + p];
            if (sum > best_sum) {
                best_sum = sum;
                best = Region{m, lo, lo + width - 1};
            }
        }
    return best;
}

std::vector<double> utility_slice(const rl::UtilityTable& table, const Region& region) {
    if (region.terrain < 0 || region.terrain > 1 || region.p_lo < 0 ||
        region.p_hi < region.p_lo || region.p_hi >= table.bins)
        throw ShapeError("region lies outside the table");
    std::vector<double> out;
    out.reserve(table.lines.size());
    for (int line : table.lines) {
        double sum = 0.0;
        for (int p = region.p_lo; p <= region.p_hi; ++p)
            sum += table.at(region.terrain, p, line);
        out.push_back(sum);
    }
    return out;
}

LocalizationReport locate_culprit(const rl::UtilityTable& offline, const rl::UtilityTable& online,
                                  const taint::TaintReport& report, int width) {
    std::vector<double> d = diff_map(offline, online);
    if (width == 0) width = default_region_width(offline.bins);

    LocalizationReport out;
    out.region = max_diff_region(d, offline.bins, width);
    out.qs_offline = utility_slice(offline, out.region);
    out.qs_online = utility_slice(online, out.region);

    if (report.chain.empty()) throw ShapeError("taint report has no sink entry");
    int sink_line = report.chain.back().line;

    struct Candidate {
        double delta;
        const taint::ReportEntry* entry;
    };
    std::vector<Candidate> candidates;
    for (const taint::ReportEntry& entry : report.instrumented) {
        if (entry.line == sink_line) continue;
        int s = offline.slot(entry.line);
        if (s < 0)
            throw ShapeError("line " + std::to_string(entry.line) +
                             " is not in the utility tables");
        candidates.push_back({std::fabs(out.qs_offline[s] - out.qs_online[s]), &entry});
    }
    if (candidates.empty()) throw ShapeError("taint report names no statements beyond the sink");

    const Candidate* win = &candidates[0];
    for (const Candidate& c : candidates)
        if (c.delta > win->delta ||
            (c.delta == win->delta && c.entry->line > win->entry->line))
            win = &c;
    if (win->delta == 0.0)
        throw DegenerateError("offline and online utilities agree inside the region");

    double second = 0.0;
    for (const Candidate& c : candidates)
        if (c.entry != win->entry) second = std::max(second, c.delta);

    out.culprit_line = win->entry->line;
    out.culprit_text = win->entry->text;
    out.margin = win->delta - second;
    return out;
}

std::string LocalizationReport::to_json() const {
    for (double v : qs_offline)
        if (!std::isfinite(v)) throw FormatError("report contains a non-finite value");
    for (double v : qs_online)
        if (!std::isfinite(v)) throw FormatError("report contains a non-finite value");
    if (!std::isfinite(margin)) throw FormatError("report contains a non-finite value");
    ojson j;
    j["region"] = {{"terrain", region.terrain}, {"p_lo", region.p_lo}, {"p_hi", region.p_hi}};
    j["qs_offline"] = qs_offline;
    j["qs_online"] = qs_online;
    j["culprit_line"] = culprit_line;
    j["culprit_text"] = culprit_text;
    j["margin"] = margin;
    return j.dump();
}

LocalizationReport LocalizationReport::from_json(const std::string& text) {
    ojson j;
    try {
        j = ojson::parse(text);
    } catch (const ojson::exception& e) {
        throw FormatError(std::string("localization report is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.size() != 6 || !j.contains("region") || !j.contains("qs_offline") ||
        !j.contains("qs_online") || !j.contains("culprit_line") || !j.contains("culprit_text") ||
        !j.contains("margin"))
        throw FormatError(
            "localization report must hold exactly region, qs_offline, qs_online, "
            "culprit_line, culprit_text, margin");
    const ojson& r = j["region"];
    if (!r.is_object() || r.size() != 3 || !r.contains("terrain") || !r.contains("p_lo") ||
        !r.contains("p_hi") || !r["terrain"].is_number_integer() ||
        !r["p_lo"].is_number_integer() || !r["p_hi"].is_number_integer())
        throw FormatError("region must hold integer terrain, p_lo, p_hi");

    LocalizationReport out;
    out.region = Region{r["terrain"].get<int>(), r["p_lo"].get<int>(), r["p_hi"].get<int>()};
    if (out.region.terrain < 0 || out.region.terrain > 1 || out.region.p_lo < 0 ||
        out.region.p_hi < out.region.p_lo)
        throw FormatError("region bounds are out of order");

    auto numbers = [](const ojson& arr, std::vector<double>& dst) {
        if (!arr.is_array()) throw FormatError("utility slices must be arrays");
        for (const auto& v : arr) {
            if (!v.is_number()) throw FormatError("utility slices must hold numbers");
            dst.push_back(v.get<double>());
        }
    };
    numbers(j["qs_offline"], out.qs_offline);
    numbers(j["qs_online"], out.qs_online);
    if (out.qs_offline.size() != out.qs_online.size())
        throw FormatError("utility slices differ in length");

    if (!j["culprit_line"].is_number_integer() || !j["culprit_text"].is_string() ||
        !j["margin"].is_number())
        throw FormatError("culprit fields must be an integer line, a string, and a number");
    out.culprit_line = j["culprit_line"].get<int>();
    out.culprit_text = j["culprit_text"].get<std::string>();
    out.margin = j["margin"].get<double>();
    return out;
}

}  // namespace tarl::loc
