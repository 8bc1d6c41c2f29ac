#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "delay_adapt/events.hpp"

namespace da {

struct MovementScenario {
    Movement movement = Movement::through;
    Approach approach = Approach::NB;
    double green_split = 0.4;  // fraction of the cycle that is green
    int lanes = 1;
    bool shared_lane = false;
    std::array<double, 24> demand_veh_h{};  // hourly arrival rates
};

struct ScenarioError : std::runtime_error {
    explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ScenarioConfig {
    std::string intersection_id = "X";
    int days = 1;
    double cycle_s = 90;
    double yellow_s = 3;
    double saturation_headway_s = 2.0;
    double startup_lost_s = 2.0;
    double speed_limit_mph = 40;
    double advance_setback_s = 5.0;
    std::uint64_t seed = 0;
    std::vector<MovementScenario> movements;

    void validate() const;  // throws ScenarioError with the offending field
};

struct GroundTruthRow {
    Movement movement = Movement::through;
    std::int64_t hour_start_ms = 0;
    double true_delay_s = 0;       // mean simple stop delay over red-arrivals
    std::int64_t vehicle_count = 0;  // stop-bar det_on events in the hour
};

struct GenerateResult {
    std::vector<EventRecord> events;  // sorted by timestamp
    IntersectionConfig config;
    std::vector<GroundTruthRow> ground_truth;
    bool oversaturated = false;  // some hour's demand exceeded capacity
};

/// Fixed-time signal, seeded nonhomogeneous Poisson arrivals, point-queue
/// discharge. Deterministic: same config gives byte-identical output.
GenerateResult generate(const ScenarioConfig& cfg);

/// Uniform per-parameter ranges for fleet heterogeneity. Supported keys:
/// cycle_s, yellow_s, green_split, demand_scale, saturation_headway_s,
/// startup_lost_s, speed_limit_mph, advance_setback_s.
struct ShiftRanges {
    std::map<std::string, std::pair<double, double>> ranges;
};

std::vector<ScenarioConfig> make_fleet(const ScenarioConfig& base, int n,
                                       const ShiftRanges& shift, std::uint64_t seed);

ScenarioConfig scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& cfg);
ShiftRanges shift_ranges_from_json(const std::string& json_text);

void write_ground_truth_csv(std::ostream& out, const std::vector<GroundTruthRow>& rows);

}  // namespace da
