#include "delay_adapt/events.hpp"

#include <algorithm>
#include <deque>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace da {

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::det_on: return "det_on";
        case EventKind::det_off: return "det_off";
        case EventKind::green_start: return "green_start";
        case EventKind::yellow_start: return "yellow_start";
        case EventKind::red_start: return "red_start";
    }
    return "?";
}

const char* to_string(PhaseState s) {
    switch (s) {
        case PhaseState::red: return "red";
        case PhaseState::yellow: return "yellow";
        case PhaseState::green: return "green";
    }
    return "?";
}

const char* to_string(Movement m) {
    return m == Movement::left_turn ? "left_turn" : "through";
}

const char* to_string(Approach a) {
    switch (a) {
        case Approach::NB: return "NB";
        case Approach::SB: return "SB";
        case Approach::EB: return "EB";
        case Approach::WB: return "WB";
    }
    return "?";
}

Movement movement_from_string(const std::string& s) {
    if (s == "left_turn") return Movement::left_turn;
    if (s == "through") return Movement::through;
    throw ConfigError("unknown movement: " + s);
}

Approach approach_from_string(const std::string& s) {
    if (s == "NB") return Approach::NB;
    if (s == "SB") return Approach::SB;
    if (s == "EB") return Approach::EB;
    if (s == "WB") return Approach::WB;
    throw ConfigError("unknown approach: " + s);
}

namespace {

bool event_kind_from_string(const std::string& s, EventKind& out) {
    for (EventKind k : {EventKind::det_on, EventKind::det_off, EventKind::green_start,
                        EventKind::yellow_start, EventKind::red_start}) {
        if (s == to_string(k)) {
            out = k;
            return true;
        }
    }
    return false;
}

std::vector<std::string> split_csv_line(const std::string& line) {
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

}  // namespace

std::vector<EventRecord> parse_event_log(std::istream& in) {
    static const std::string kHeader = "timestamp_ms,event,detector_id,phase_id";
    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) throw ParseError(1, "missing or wrong header, expected `" + kHeader + "`");

    std::vector<EventRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 4) throw ParseError(lineno, "expected 4 fields, got " + std::to_string(fields.size()));

        EventRecord rec;
        const std::string& ts = fields[0];
        auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), rec.timestamp_ms);
        if (ec != std::errc() || ptr != ts.data() + ts.size())
            throw ParseError(lineno, "non-numeric timestamp `" + ts + "`");
        if (rec.timestamp_ms < 0) throw ParseError(lineno, "negative timestamp");
        if (!event_kind_from_string(fields[1], rec.kind))
            throw ParseError(lineno, "bad event kind `" + fields[1] + "`");
        rec.detector_id = fields[2];
        rec.phase_id = fields[3];

        bool det = rec.kind == EventKind::det_on || rec.kind == EventKind::det_off;
        if (det && (rec.detector_id.empty() || !rec.phase_id.empty()))
            throw ParseError(lineno, "detector event must carry detector_id only");
        if (!det && (rec.phase_id.empty() || !rec.detector_id.empty()))
            throw ParseError(lineno, "phase event must carry phase_id only");
        records.push_back(std::move(rec));
    }
    return records;
}

void write_event_log(std::ostream& out, const std::vector<EventRecord>& events) {
    out << "timestamp_ms,event,detector_id,phase_id\n";
    for (const auto& e : events)
        out << e.timestamp_ms << ',' << to_string(e.kind) << ',' << e.detector_id << ','
            << e.phase_id << '\n';
}

SignalTimeline build_timeline(std::vector<EventRecord> events) {
    std::stable_sort(events.begin(), events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                         return a.timestamp_ms < b.timestamp_ms;
                     });
    struct Open {
        PhaseState state;
        std::int64_t since;
        bool active = false;
    };
    SignalTimeline tl;
    std::map<std::string, Open> open;
    for (const auto& e : events) {
        if (!is_phase_event(e.kind)) continue;
        PhaseState st = e.kind == EventKind::green_start ? PhaseState::green
                        : e.kind == EventKind::yellow_start ? PhaseState::yellow
                                                            : PhaseState::red;
        Open& o = open[e.phase_id];
        if (o.active) {
            if (e.timestamp_ms == o.since)
                throw TimelineError("duplicate simultaneous phase events for " + e.phase_id +
                                    " at " + std::to_string(e.timestamp_ms));
            tl.phases[e.phase_id].push_back({o.state, o.since, e.timestamp_ms});
        } else {
            tl.phases[e.phase_id];  // phase known even if no interval closes
        }
        o.state = st;
        o.since = e.timestamp_ms;
        o.active = true;
    }
    return tl;
}

const PhaseInterval* SignalTimeline::find(const std::string& phase, std::int64_t t) const {
    auto it = phases.find(phase);
    if (it == phases.end()) return nullptr;
    const auto& v = it->second;
    auto lb = std::upper_bound(v.begin(), v.end(), t,
                               [](std::int64_t t_, const PhaseInterval& iv) {
                                   return t_ < iv.end_ms;
                               });
    if (lb == v.end() || !lb->contains(t)) return nullptr;
    return &*lb;
}

void IntersectionConfig::validate() const {
    if (intersection_id.empty()) throw ConfigError("intersection_id is empty");
    if (movements.empty()) throw ConfigError("at least one movement is required");
    std::set<std::string> det_ids;
    std::set<std::pair<int, int>> mv_keys;
    for (const auto& m : movements) {
        if (m.stopbar_detectors.empty())
            throw ConfigError("movement without stop-bar detectors");
        if (m.lanes < 1) throw ConfigError("lanes must be positive");
        if (m.phase_id.empty()) throw ConfigError("movement without phase_id");
        if (!mv_keys.insert({static_cast<int>(m.movement), static_cast<int>(m.approach)}).second)
            throw ConfigError("duplicate (movement, approach)");
        for (const auto* list : {&m.stopbar_detectors, &m.advance_detectors})
            for (const auto& d : *list)
                if (!det_ids.insert(d).second)
                    throw ConfigError("duplicate detector id: " + d);
    }
}

std::map<std::string, const MovementConfig*> IntersectionConfig::detector_map() const {
    std::map<std::string, const MovementConfig*> out;
    for (const auto& m : movements) {
        for (const auto& d : m.stopbar_detectors) out[d] = &m;
        for (const auto& d : m.advance_detectors) out[d] = &m;
    }
    return out;
}

std::vector<Actuation> pair_actuations(const std::vector<EventRecord>& events,
                                       const SignalTimeline& timeline,
                                       const IntersectionConfig& config,
                                       PairingStats* stats) {
    PairingStats local;
    PairingStats& st = stats ? *stats : local;
    auto dets = config.detector_map();
    std::set<std::string> reported_unknown;

    // Pulses on one detector may overlap (several queued vehicles in turn);
    // FIFO order pairs each det_on with the next unclaimed det_off.
    std::map<std::string, std::deque<std::int64_t>> pending;
    std::vector<Actuation> out;

    std::vector<const EventRecord*> sorted;
    sorted.reserve(events.size());
    for (const auto& e : events)
        if (!is_phase_event(e.kind)) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const EventRecord* a, const EventRecord* b) {
                         return a->timestamp_ms < b->timestamp_ms;
                     });

    for (const EventRecord* e : sorted) {
        auto dit = dets.find(e->detector_id);
        if (dit == dets.end()) {
            if (reported_unknown.insert(e->detector_id).second)
                st.unknown_detectors.push_back(e->detector_id);
            continue;
        }
        const std::string& phase = dit->second->phase_id;
        auto& q = pending[e->detector_id];
        if (e->kind == EventKind::det_on) {
            q.push_back(e->timestamp_ms);
        } else {
            if (q.empty()) continue;  // stray off
            std::int64_t on_ms = q.front();
            q.pop_front();
            if (e->timestamp_ms == on_ms) {
                ++st.dropped_zero_length;
                continue;
            }
            const PhaseInterval* on_iv = timeline.find(phase, on_ms);
            const PhaseInterval* off_iv = timeline.find(phase, e->timestamp_ms);
            if (!on_iv || !off_iv) {
                ++st.dropped_out_of_timeline;
                continue;
            }
            out.push_back({e->detector_id, on_ms, e->timestamp_ms, on_iv->state, off_iv->state});
            ++st.matched;
        }
    }
    for (const auto& [id, q] : pending) st.dropped_unmatched_on += q.size();
    return out;
}

IntersectionConfig intersection_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config JSON: ") + e.what());
    }
    IntersectionConfig cfg;
    try {
        cfg.intersection_id = j.at("intersection_id").get<std::string>();
        cfg.speed_limit_mph = j.at("speed_limit_mph").get<double>();
        for (const auto& jm : j.at("movements")) {
            MovementConfig m;
            m.movement = movement_from_string(jm.at("movement").get<std::string>());
            m.approach = approach_from_string(jm.at("approach").get<std::string>());
            m.phase_id = jm.at("phase_id").get<std::string>();
            m.stopbar_detectors = jm.at("stopbar_detectors").get<std::vector<std::string>>();
            if (jm.contains("advance_detectors"))
                m.advance_detectors = jm.at("advance_detectors").get<std::vector<std::string>>();
            m.lanes = jm.at("lanes").get<int>();
            m.shared_lane = jm.at("shared_lane").get<bool>();
            cfg.movements.push_back(std::move(m));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config JSON: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string intersection_config_to_json(const IntersectionConfig& cfg) {
    nlohmann::ordered_json j;
    j["intersection_id"] = cfg.intersection_id;
    j["speed_limit_mph"] = cfg.speed_limit_mph;
    j["movements"] = nlohmann::ordered_json::array();
    for (const auto& m : cfg.movements) {
        nlohmann::ordered_json jm;
        jm["movement"] = to_string(m.movement);
        jm["approach"] = to_string(m.approach);
        jm["phase_id"] = m.phase_id;
        jm["stopbar_detectors"] = m.stopbar_detectors;
        jm["advance_detectors"] = m.advance_detectors;
        jm["lanes"] = m.lanes;
        jm["shared_lane"] = m.shared_lane;
        j["movements"].push_back(std::move(jm));
    }
    return j.dump(2) + "\n";
}

}  // namespace da
