#include "delay_adapt/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace da {

namespace {
constexpr std::int64_t kHourMs = 3600 * 1000;
}

std::vector<std::string> FeatureTable::default_manifest() {
    return {"count_rg",  "count_rr", "count_gg",    "total_count",
            "occ_mean_s", "occ_sum_s", "wait_mean_s", "speed_limit",
            "hour_of_day", "lanes",    "shared_lane"};
}

std::vector<double> FeatureTable::features(const FeatureRow& r) {
    return {static_cast<double>(r.count_rg),
            static_cast<double>(r.count_rr),
            static_cast<double>(r.count_gg),
            static_cast<double>(r.total_count),
            r.occ_mean_s,
            r.occ_sum_s,
            r.wait_mean_s,
            r.speed_limit_mph,
            static_cast<double>(r.hour_of_day),
            static_cast<double>(r.lanes),
            static_cast<double>(r.shared_lane)};
}

PhaseState collapse_yellow(PhaseState s) {
    return s == PhaseState::yellow ? PhaseState::green : s;
}

double occupancy_time(const Actuation& a) {
    return static_cast<double>(a.off_ms - a.on_ms) / 1000.0;
}

double waiting_time(const PhaseInterval& red, const std::vector<Actuation>& stopbar) {
    std::int64_t earliest = -1;
    for (const auto& a : stopbar)
        if (red.contains(a.on_ms) && (earliest < 0 || a.on_ms < earliest)) earliest = a.on_ms;
    if (earliest < 0) return 0.0;
    return static_cast<double>(red.end_ms - earliest) / 1000.0;
}

Category categorize(const Actuation& a) {
    PhaseState on = collapse_yellow(a.on_state);
    PhaseState off = collapse_yellow(a.off_state);
    if (on == PhaseState::red) return off == PhaseState::green ? Category::RG : Category::RR;
    return off == PhaseState::green ? Category::GG : Category::other;
}

double stop_delay_label(const std::vector<PhaseInterval>& red_intervals,
                        const std::vector<Actuation>& stopbar) {
    double sum = 0;
    std::int64_t n = 0;
    for (const auto& a : stopbar) {
        for (const auto& iv : red_intervals) {
            if (iv.state == PhaseState::red && iv.contains(a.on_ms)) {
                sum += static_cast<double>(iv.end_ms - a.on_ms) / 1000.0;
                ++n;
                break;
            }
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

FeatureTable extract_features(const std::vector<Actuation>& actuations,
                              const SignalTimeline& timeline,
                              const IntersectionConfig& config) {
    config.validate();
    FeatureTable table;

    for (const auto& mv : config.movements) {
        auto pit = timeline.phases.find(mv.phase_id);
        if (pit == timeline.phases.end() || pit->second.empty())
            throw ExtractError("empty timeline for movement " + std::string(to_string(mv.movement)) +
                               " (phase " + mv.phase_id + ")");
        const auto& intervals = pit->second;

        std::set<std::string> all_dets(mv.stopbar_detectors.begin(), mv.stopbar_detectors.end());
        all_dets.insert(mv.advance_detectors.begin(), mv.advance_detectors.end());
        std::set<std::string> stop_dets(mv.stopbar_detectors.begin(), mv.stopbar_detectors.end());

        std::vector<Actuation> mine, stopbar;
        for (const auto& a : actuations) {
            if (all_dets.count(a.detector_id)) mine.push_back(a);
            if (stop_dets.count(a.detector_id)) stopbar.push_back(a);
        }
        auto by_on = [](const Actuation& a, const Actuation& b) { return a.on_ms < b.on_ms; };
        std::stable_sort(mine.begin(), mine.end(), by_on);
        std::stable_sort(stopbar.begin(), stopbar.end(), by_on);

        std::int64_t span_start = intervals.front().start_ms;
        std::int64_t span_end = intervals.back().end_ms;
        std::int64_t h0 = (span_start / kHourMs) * kHourMs;

        struct HourAcc {
            std::int64_t rg = 0, rr = 0, gg = 0, total = 0;
            double occ_sum = 0;
            double wait_sum = 0;
            std::int64_t wait_n = 0;
            double delay_sum = 0;
            std::int64_t delay_n = 0;
        };
        std::map<std::int64_t, HourAcc> hours;
        for (std::int64_t h = h0; h < span_end; h += kHourMs) hours[h];

        for (const auto& a : mine) {
            auto it = hours.find((a.on_ms / kHourMs) * kHourMs);
            if (it == hours.end()) continue;
            HourAcc& acc = it->second;
            ++acc.total;
            acc.occ_sum += occupancy_time(a);
            switch (categorize(a)) {
                case Category::RG: ++acc.rg; break;
                case Category::RR: ++acc.rr; break;
                case Category::GG: ++acc.gg; break;
                case Category::other: break;
            }
        }

        // Red cycles attribute to the hour containing the red's end: the
        // delay realizes at green onset.
        for (const auto& iv : intervals) {
            if (iv.state != PhaseState::red) continue;
            auto it = hours.find(((iv.end_ms - 1) / kHourMs) * kHourMs);
            if (it == hours.end()) continue;
            it->second.wait_sum += waiting_time(iv, stopbar);
            ++it->second.wait_n;
        }
        for (const auto& a : stopbar) {
            const PhaseInterval* iv = timeline.find(mv.phase_id, a.on_ms);
            if (!iv || iv->state != PhaseState::red) continue;
            auto it = hours.find(((iv->end_ms - 1) / kHourMs) * kHourMs);
            if (it == hours.end()) continue;
            it->second.delay_sum += static_cast<double>(iv->end_ms - a.on_ms) / 1000.0;
            ++it->second.delay_n;
        }

        for (const auto& [h, acc] : hours) {
            FeatureRow row;
            row.intersection_id = config.intersection_id;
            row.movement = mv.movement;
            row.hour_start_ms = h;
            row.hour_of_day = static_cast<int>((h / kHourMs) % 24);
            row.count_rg = acc.rg;
            row.count_rr = acc.rr;
            row.count_gg = acc.gg;
            row.total_count = acc.total;
            row.occ_sum_s = acc.occ_sum;
            row.occ_mean_s = acc.total ? acc.occ_sum / static_cast<double>(acc.total) : 0.0;
            row.wait_mean_s = acc.wait_n ? acc.wait_sum / static_cast<double>(acc.wait_n) : 0.0;
            row.speed_limit_mph = config.speed_limit_mph;
            row.lanes = mv.lanes;
            row.shared_lane = mv.shared_lane ? 1 : 0;
            row.label_delay_s = acc.delay_n ? acc.delay_sum / static_cast<double>(acc.delay_n) : 0.0;
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

const std::string kFeatureHeader =
    "intersection_id,movement,hour_start_ms,count_rg,count_rr,count_gg,total_count,"
    "occ_mean_s,occ_sum_s,wait_mean_s,speed_limit,hour_of_day,lanes,shared_lane,"
    "label_delay_s";

}  // namespace

void write_feature_csv(std::ostream& out, const FeatureTable& table) {
    out << kFeatureHeader << '\n';
    for (const auto& r : table.rows) {
        out << r.intersection_id << ',' << to_string(r.movement) << ',' << r.hour_start_ms << ','
            << r.count_rg << ',' << r.count_rr << ',' << r.count_gg << ',' << r.total_count << ','
            << fmt6(r.occ_mean_s) << ',' << fmt6(r.occ_sum_s) << ',' << fmt6(r.wait_mean_s) << ','
            << fmt6(r.speed_limit_mph) << ',' << r.hour_of_day << ',' << r.lanes << ','
            << r.shared_lane << ',' << fmt6(r.label_delay_s) << '\n';
    }
}

FeatureTable read_feature_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw CsvError("missing feature CSV header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kFeatureHeader) throw CsvError("unexpected feature CSV header");

    FeatureTable table;
    std::size_t lineno = 1;
    std::set<std::tuple<std::string, int, std::int64_t>> keys;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto f = split_line(line);
        if (f.size() != 15)
            throw CsvError("line " + std::to_string(lineno) + ": expected 15 fields");
        try {
            FeatureRow r;
            r.intersection_id = f[0];
            r.movement = movement_from_string(f[1]);
            r.hour_start_ms = std::stoll(f[2]);
            r.count_rg = std::stoll(f[3]);
            r.count_rr = std::stoll(f[4]);
            r.count_gg = std::stoll(f[5]);
            r.total_count = std::stoll(f[6]);
            r.occ_mean_s = std::stod(f[7]);
            r.occ_sum_s = std::stod(f[8]);
            r.wait_mean_s = std::stod(f[9]);
            r.speed_limit_mph = std::stod(f[10]);
            r.hour_of_day = std::stoi(f[11]);
            r.lanes = std::stoi(f[12]);
            r.shared_lane = std::stoi(f[13]);
            r.label_delay_s = std::stod(f[14]);
            if (!keys.insert({r.intersection_id, static_cast<int>(r.movement), r.hour_start_ms})
                     .second)
                throw CsvError("line " + std::to_string(lineno) + ": duplicate row key");
            table.rows.push_back(std::move(r));
        } catch (const CsvError&) {
            throw;
        } catch (const std::exception& e) {
            throw CsvError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return table;
}

}  // namespace da
