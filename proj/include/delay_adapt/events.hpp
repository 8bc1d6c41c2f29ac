#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace da {

enum class EventKind { det_on, det_off, green_start, yellow_start, red_start };
enum class PhaseState { red, yellow, green };
enum class Movement { left_turn, through };
enum class Approach { NB, SB, EB, WB };

const char* to_string(EventKind k);
const char* to_string(PhaseState s);
const char* to_string(Movement m);
const char* to_string(Approach a);
Movement movement_from_string(const std::string& s);
Approach approach_from_string(const std::string& s);

inline bool is_phase_event(EventKind k) {
    return k == EventKind::green_start || k == EventKind::yellow_start ||
           k == EventKind::red_start;
}

/// One row of a controller event log. Detector events carry detector_id,
/// phase events carry phase_id; the other field stays empty.
struct EventRecord {
    std::int64_t timestamp_ms = 0;
    EventKind kind = EventKind::det_on;
    std::string detector_id;
    std::string phase_id;

    bool operator==(const EventRecord&) const = default;
};

struct MovementConfig {
    Movement movement = Movement::through;
    Approach approach = Approach::NB;
    std::string phase_id;
    std::vector<std::string> stopbar_detectors;
    std::vector<std::string> advance_detectors;
    int lanes = 1;
    bool shared_lane = false;
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IntersectionConfig {
    std::string intersection_id;
    double speed_limit_mph = 0;
    std::vector<MovementConfig> movements;

    /// Throws ConfigError on any violated invariant (empty id, duplicate
    /// detector ids, duplicate (movement, approach), empty stop-bar list).
    void validate() const;

    /// detector id -> owning movement config. Config must be valid.
    std::map<std::string, const MovementConfig*> detector_map() const;
};

struct PhaseInterval {
    PhaseState state = PhaseState::red;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;

    bool contains(std::int64_t t) const { return t >= start_ms && t < end_ms; }
};

/// Per-phase contiguous red/yellow/green interval lists derived from
/// phase-change events. The span before the first event of a phase is
/// not represented.
struct SignalTimeline {
    std::map<std::string, std::vector<PhaseInterval>> phases;

    /// Interval of `phase` containing time t, or nullptr.
    const PhaseInterval* find(const std::string& phase, std::int64_t t) const;
};

struct Actuation {
    std::string detector_id;
    std::int64_t on_ms = 0;
    std::int64_t off_ms = 0;
    PhaseState on_state = PhaseState::red;
    PhaseState off_state = PhaseState::red;
};

struct ParseError : std::runtime_error {
    std::size_t line;
    ParseError(std::size_t line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

struct TimelineError : std::runtime_error {
    explicit TimelineError(const std::string& msg) : std::runtime_error(msg) {}
};

/// CSV schema: header exactly `timestamp_ms,event,detector_id,phase_id`.
/// Malformed rows raise ParseError carrying the 1-based line number.
std::vector<EventRecord> parse_event_log(std::istream& in);
void write_event_log(std::ostream& out, const std::vector<EventRecord>& events);

/// Builds per-phase interval lists. Input is stably sorted by timestamp if
/// needed. Two phase events for one phase at the same timestamp raise
/// TimelineError.
SignalTimeline build_timeline(std::vector<EventRecord> events);

struct PairingStats {
    std::size_t matched = 0;
    std::size_t dropped_unmatched_on = 0;   // det_on with no later det_off
    std::size_t dropped_zero_length = 0;    // on_ms == off_ms
    std::size_t dropped_out_of_timeline = 0;
    std::vector<std::string> unknown_detectors;  // reported once per id
};

/// Matches each det_on with the next det_off of the same detector and looks
/// up on/off phase states from the owning movement's timeline. Unknown
/// detectors are reported via stats and skipped.
std::vector<Actuation> pair_actuations(const std::vector<EventRecord>& events,
                                       const SignalTimeline& timeline,
                                       const IntersectionConfig& config,
                                       PairingStats* stats = nullptr);

IntersectionConfig intersection_config_from_json(const std::string& json_text);
std::string intersection_config_to_json(const IntersectionConfig& cfg);

}  // namespace da
