#include "delay_adapt/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>

#include "delay_adapt/util.hpp"

namespace da {

namespace {

constexpr std::int64_t kHourMs = 3600 * 1000;
constexpr double kVehicleFt = 18.0;  // vehicle length
constexpr double kLoopFt = 6.0;      // loop length
constexpr double kStopOccS = 3.0;    // detection dwell of a vehicle joining behind a queue

std::int64_t to_ms(double seconds) { return std::llround(seconds * 1000.0); }

double free_flow_occ_s(double speed_mph) {
    double fps = speed_mph * 5280.0 / 3600.0;
    return (kVehicleFt + kLoopFt) / fps;
}

}  // namespace

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ScenarioError(field + ": " + why);
    };
    if (intersection_id.empty()) fail("intersection_id", "empty");
    if (days < 1) fail("days", "must be >= 1");
    if (!(cycle_s > 0)) fail("cycle_s", "must be positive");
    if (yellow_s < 0) fail("yellow_s", "must be non-negative");
    if (!(saturation_headway_s > 0)) fail("saturation_headway_s", "must be positive");
    if (startup_lost_s < 0) fail("startup_lost_s", "must be non-negative");
    if (!(speed_limit_mph > 0)) fail("speed_limit_mph", "must be positive");
    if (advance_setback_s < 0) fail("advance_setback_s", "must be non-negative");
    if (movements.empty()) fail("movements", "at least one required");
    double phase_total = 0;
    std::set<std::pair<int, int>> keys;
    for (std::size_t i = 0; i < movements.size(); ++i) {
        const auto& m = movements[i];
        std::string pfx = "movements[" + std::to_string(i) + "].";
        if (!(m.green_split > 0 && m.green_split < 1)) fail(pfx + "green_split", "must be in (0,1)");
        double green = m.green_split * cycle_s;
        if (!(green + yellow_s < cycle_s)) fail(pfx + "green_split", "green + yellow must be < cycle");
        if (m.lanes < 1) fail(pfx + "lanes", "must be positive");
        if (!(startup_lost_s + saturation_headway_s / m.lanes < green + yellow_s))
            fail(pfx + "green_split", "green too short to discharge a vehicle");
        for (double r : m.demand_veh_h)
            if (r < 0 || !std::isfinite(r)) fail(pfx + "demand_veh_h", "rates must be >= 0");
        if (!keys.insert({static_cast<int>(m.movement), static_cast<int>(m.approach)}).second)
            fail(pfx + "movement", "duplicate (movement, approach)");
        phase_total += green + yellow_s;
    }
    if (phase_total > cycle_s + 1e-9)
        fail("movements", "sum of green+yellow phases exceeds the cycle");
}

GenerateResult generate(const ScenarioConfig& cfg) {
    cfg.validate();
    GenerateResult res;
    res.config.intersection_id = cfg.intersection_id;
    res.config.speed_limit_mph = cfg.speed_limit_mph;

    const double horizon_s = cfg.days * 86400.0;
    const double occ_ff = free_flow_occ_s(cfg.speed_limit_mph);

    double offset = 0;  // movements get consecutive green windows in the cycle
    for (std::size_t mi = 0; mi < cfg.movements.size(); ++mi) {
        const auto& mv = cfg.movements[mi];
        const double green = mv.green_split * cfg.cycle_s;
        const double window = green + cfg.yellow_s;  // discharge allowed through yellow
        const double headway = cfg.saturation_headway_s / mv.lanes;
        const std::string phase_id = "P" + std::to_string(mi + 1);
        const std::string stop_det = cfg.intersection_id + "_" + to_string(mv.approach) + "_" +
                                     to_string(mv.movement) + "_stop";
        const std::string adv_det = cfg.intersection_id + "_" + to_string(mv.approach) + "_" +
                                    to_string(mv.movement) + "_adv";
        const bool has_advance = mv.movement == Movement::through;

        MovementConfig mc;
        mc.movement = mv.movement;
        mc.approach = mv.approach;
        mc.phase_id = phase_id;
        mc.stopbar_detectors = {stop_det};
        if (has_advance) mc.advance_detectors = {adv_det};
        mc.lanes = mv.lanes;
        mc.shared_lane = mv.shared_lane;
        res.config.movements.push_back(mc);

        // arrivals via thinning against the peak hourly rate
        std::mt19937_64 rng(derive_seed(cfg.seed, mi));
        double lam_max = *std::max_element(mv.demand_veh_h.begin(), mv.demand_veh_h.end());
        std::vector<double> arrivals;
        if (lam_max > 0) {
            std::exponential_distribution<double> exp_gap(lam_max / 3600.0);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            double t = exp_gap(rng);
            while (t < horizon_s) {
                int hod = static_cast<int>(std::fmod(t / 3600.0, 24.0));
                if (unif(rng) * lam_max < mv.demand_veh_h[static_cast<std::size_t>(hod)])
                    arrivals.push_back(t);
                t += exp_gap(rng);
            }
        }

        // point-queue service
        auto in_green = [&](double a) {
            double rel = a - offset;
            if (rel < 0) return false;
            double in_cycle = rel - std::floor(rel / cfg.cycle_s) * cfg.cycle_s;
            return in_cycle < window;
        };
        auto schedule = [&](double t0) {
            long k = static_cast<long>(std::floor((t0 - offset) / cfg.cycle_s));
            if (k < 0) k = 0;
            for (;; ++k) {
                double ws = offset + k * cfg.cycle_s + cfg.startup_lost_s;
                double we = offset + k * cfg.cycle_s + window;
                double s = std::max(t0, ws);
                if (s + headway <= we) return s + headway;
            }
        };

        struct Veh {
            double on_s, off_s;
        };
        std::vector<Veh> vehicles;
        vehicles.reserve(arrivals.size());
        double server_next = 0;
        double max_det_time = 0;
        for (double a : arrivals) {
            Veh v{a, 0};
            if (server_next <= a && in_green(a)) {
                v.off_s = a + occ_ff;  // free flow through a green with no queue
                server_next = v.off_s;
            } else {
                bool head = server_next <= a;
                double dep = schedule(std::max(a, server_next));
                server_next = dep;
                // non-head vehicles register a short dwell as they pull up
                v.off_s = head ? dep : std::min(a + kStopOccS, dep);
            }
            vehicles.push_back(v);
            max_det_time = std::max(max_det_time, v.off_s);
            if (has_advance) max_det_time = std::max(max_det_time, a - cfg.advance_setback_s + occ_ff);
        }

        // signal events: full cycles covering both the horizon and every
        // detector event, closed by a final green_start
        long cycles = static_cast<long>(std::ceil(horizon_s / cfg.cycle_s));
        cycles = std::max(cycles,
                          static_cast<long>(std::floor(std::max(0.0, max_det_time - offset) /
                                                       cfg.cycle_s)) +
                              2);  // margin keeps every detector event inside the timeline
        std::vector<std::pair<std::int64_t, std::int64_t>> reds;  // [red_start, green_onset)
        std::int64_t first_green_ms = to_ms(offset);
        if (first_green_ms > 0) {
            res.events.push_back({0, EventKind::red_start, "", phase_id});
            reds.push_back({0, first_green_ms});
        }
        for (long k = 0; k < cycles; ++k) {
            double g = offset + k * cfg.cycle_s;
            res.events.push_back({to_ms(g), EventKind::green_start, "", phase_id});
            res.events.push_back({to_ms(g + green), EventKind::yellow_start, "", phase_id});
            res.events.push_back({to_ms(g + green + cfg.yellow_s), EventKind::red_start, "", phase_id});
            reds.push_back({to_ms(g + green + cfg.yellow_s), to_ms(offset + (k + 1) * cfg.cycle_s)});
        }
        std::int64_t span_end_ms = to_ms(offset + cycles * cfg.cycle_s);
        res.events.push_back({span_end_ms, EventKind::green_start, "", phase_id});

        // detector events
        for (const auto& v : vehicles) {
            std::int64_t on = to_ms(v.on_s), off = to_ms(v.off_s);
            if (off <= on) off = on + 1;  // rounding guard
            res.events.push_back({on, EventKind::det_on, stop_det, ""});
            res.events.push_back({off, EventKind::det_off, stop_det, ""});
            if (has_advance) {
                double aon = v.on_s - cfg.advance_setback_s;
                if (aon >= 0) {
                    std::int64_t a_on = to_ms(aon), a_off = to_ms(aon + occ_ff);
                    if (a_off <= a_on) a_off = a_on + 1;
                    res.events.push_back({a_on, EventKind::det_on, adv_det, ""});
                    res.events.push_back({a_off, EventKind::det_off, adv_det, ""});
                }
            }
        }

        // ground truth: same label definition as the feature extractor,
        // computed from the rounded event times
        struct HourAcc {
            double delay_sum = 0;
            std::int64_t delay_n = 0;
            std::int64_t count = 0;
        };
        std::map<std::int64_t, HourAcc> hours;
        for (std::int64_t h = 0; h < span_end_ms; h += kHourMs) hours[h];
        for (const auto& v : vehicles) {
            std::int64_t on = to_ms(v.on_s);
            auto hit = hours.find((on / kHourMs) * kHourMs);
            if (hit != hours.end()) ++hit->second.count;
            auto it = std::upper_bound(reds.begin(), reds.end(), on,
                                       [](std::int64_t t, const auto& r) { return t < r.second; });
            if (it != reds.end() && on >= it->first && on < it->second) {
                auto dit = hours.find(((it->second - 1) / kHourMs) * kHourMs);
                if (dit != hours.end()) {
                    dit->second.delay_sum += static_cast<double>(it->second - on) / 1000.0;
                    ++dit->second.delay_n;
                }
            }
        }
        for (const auto& [h, acc] : hours) {
            GroundTruthRow row;
            row.movement = mv.movement;
            row.hour_start_ms = h;
            row.true_delay_s = acc.delay_n ? acc.delay_sum / static_cast<double>(acc.delay_n) : 0.0;
            row.vehicle_count = acc.count;
            res.ground_truth.push_back(row);
        }

        // oversaturation check against discharge capacity
        double cap_per_hour = (3600.0 / cfg.cycle_s) *
                              std::max(0.0, (window - cfg.startup_lost_s) / headway);
        for (double r : mv.demand_veh_h)
            if (r > cap_per_hour) res.oversaturated = true;

        offset += window;
    }

    std::stable_sort(res.events.begin(), res.events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                         return a.timestamp_ms < b.timestamp_ms;
                     });
    return res;
}

std::vector<ScenarioConfig> make_fleet(const ScenarioConfig& base, int n,
                                       const ShiftRanges& shift, std::uint64_t seed) {
    if (n < 2) throw ScenarioError("fleet size must be >= 2");
    static const std::vector<std::string> known = {
        "cycle_s",          "yellow_s",       "green_split",     "demand_scale",
        "saturation_headway_s", "startup_lost_s", "speed_limit_mph", "advance_setback_s"};
    for (const auto& [k, r] : shift.ranges) {
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ScenarioError("unknown shift parameter: " + k);
        if (!(r.first <= r.second)) throw ScenarioError("empty range for " + k);
    }

    std::vector<ScenarioConfig> fleet;
    for (int i = 0; i < n; ++i) {
        ScenarioConfig cfg = base;
        cfg.intersection_id = base.intersection_id + "_" + std::to_string(i);
        cfg.seed = derive_seed(mix64(seed), static_cast<std::uint64_t>(i) + 1000);
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        auto draw = [&](const std::string& key, double fallback) {
            auto it = shift.ranges.find(key);
            if (it == shift.ranges.end()) return fallback;
            std::uniform_real_distribution<double> u(it->second.first, it->second.second);
            return it->second.first == it->second.second ? it->second.first : u(rng);
        };
        cfg.cycle_s = draw("cycle_s", cfg.cycle_s);
        cfg.yellow_s = draw("yellow_s", cfg.yellow_s);
        cfg.saturation_headway_s = draw("saturation_headway_s", cfg.saturation_headway_s);
        cfg.startup_lost_s = draw("startup_lost_s", cfg.startup_lost_s);
        cfg.speed_limit_mph = draw("speed_limit_mph", cfg.speed_limit_mph);
        cfg.advance_setback_s = draw("advance_setback_s", cfg.advance_setback_s);
        double split = draw("green_split", -1);
        double demand_scale = draw("demand_scale", 1.0);
        for (auto& m : cfg.movements) {
            if (split > 0) m.green_split = split;
            for (auto& r : m.demand_veh_h) r *= demand_scale;
        }
        cfg.validate();
        fleet.push_back(std::move(cfg));
    }
    return fleet;
}

ScenarioConfig scenario_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("invalid scenario JSON: ") + e.what());
    }
    ScenarioConfig cfg;
    try {
        cfg.intersection_id = j.at("intersection_id").get<std::string>();
        cfg.days = j.at("days").get<int>();
        cfg.cycle_s = j.at("cycle_s").get<double>();
        cfg.yellow_s = j.at("yellow_s").get<double>();
        cfg.saturation_headway_s = j.at("saturation_headway_s").get<double>();
        cfg.startup_lost_s = j.at("startup_lost_s").get<double>();
        cfg.speed_limit_mph = j.at("speed_limit_mph").get<double>();
        cfg.advance_setback_s = j.at("advance_setback_s").get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& jm : j.at("movements")) {
            MovementScenario m;
            m.movement = movement_from_string(jm.at("movement").get<std::string>());
            m.approach = approach_from_string(jm.at("approach").get<std::string>());
            m.green_split = jm.at("green_split").get<double>();
            m.lanes = jm.at("lanes").get<int>();
            m.shared_lane = jm.at("shared_lane").get<bool>();
            auto rates = jm.at("demand_veh_h").get<std::vector<double>>();
            if (rates.size() != 24)
                throw ScenarioError("movements[].demand_veh_h: expected 24 hourly rates");
            std::copy(rates.begin(), rates.end(), m.demand_veh_h.begin());
            cfg.movements.push_back(m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("invalid scenario JSON: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
    nlohmann::ordered_json j;
    j["intersection_id"] = cfg.intersection_id;
    j["days"] = cfg.days;
    j["cycle_s"] = cfg.cycle_s;
    j["yellow_s"] = cfg.yellow_s;
    j["saturation_headway_s"] = cfg.saturation_headway_s;
    j["startup_lost_s"] = cfg.startup_lost_s;
    j["speed_limit_mph"] = cfg.speed_limit_mph;
    j["advance_setback_s"] = cfg.advance_setback_s;
    j["seed"] = cfg.seed;
    j["movements"] = nlohmann::ordered_json::array();
    for (const auto& m : cfg.movements) {
        nlohmann::ordered_json jm;
        jm["movement"] = to_string(m.movement);
        jm["approach"] = to_string(m.approach);
        jm["green_split"] = m.green_split;
        jm["lanes"] = m.lanes;
        jm["shared_lane"] = m.shared_lane;
        jm["demand_veh_h"] = std::vector<double>(m.demand_veh_h.begin(), m.demand_veh_h.end());
        j["movements"].push_back(std::move(jm));
    }
    return j.dump(2) + "\n";
}

ShiftRanges shift_ranges_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("invalid shift ranges JSON: ") + e.what());
    }
    ShiftRanges out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto arr = it.value().get<std::vector<double>>();
        if (arr.size() != 2) throw ScenarioError("shift range for " + it.key() + " must be [lo, hi]");
        out.ranges[it.key()] = {arr[0], arr[1]};
    }
    return out;
}

void write_ground_truth_csv(std::ostream& out, const std::vector<GroundTruthRow>& rows) {
    out << "movement,hour_start_ms,true_delay_s,vehicle_count\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f", r.true_delay_s);
        out << to_string(r.movement) << ',' << r.hour_start_ms << ',' << buf << ','
            << r.vehicle_count << '\n';
    }
}

}  // namespace da
