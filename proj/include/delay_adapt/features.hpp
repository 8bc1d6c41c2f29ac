#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "delay_adapt/events.hpp"

namespace da {

/// One hourly observation for one (intersection, movement).
struct FeatureRow {
    std::string intersection_id;
    Movement movement = Movement::through;
    std::int64_t hour_start_ms = 0;
    int hour_of_day = 0;
    std::int64_t count_rg = 0;
    std::int64_t count_rr = 0;
    std::int64_t count_gg = 0;
    std::int64_t total_count = 0;
    double occ_mean_s = 0;
    double occ_sum_s = 0;
    double wait_mean_s = 0;
    double speed_limit_mph = 0;
    int lanes = 1;
    int shared_lane = 0;
    double label_delay_s = 0;  // hourly mean simple stop delay per stopped vehicle
};

struct FeatureTable {
    std::vector<std::string> manifest = default_manifest();
    std::vector<FeatureRow> rows;

    // Fixed, versioned feature order; model artifacts depend on it.
    static std::vector<std::string> default_manifest();

    /// Feature vector of a row in manifest order (length q).
    static std::vector<double> features(const FeatureRow& r);
};

enum class Category { RG, RR, GG, other };

/// Yellow is collapsed to green for categorization; the category scheme is
/// red/green only.
PhaseState collapse_yellow(PhaseState s);

double occupancy_time(const Actuation& a);

/// Time from the earliest stop-bar arrival inside `red` to the end of red;
/// 0 when no vehicle arrives on red.
double waiting_time(const PhaseInterval& red, const std::vector<Actuation>& stopbar);

/// Categorizes by (collapsed on_state, collapsed off_state).
Category categorize(const Actuation& a);

/// Mean per-vehicle stop delay over stop-bar actuations whose on_ms falls in
/// one of the red intervals; 0 when none do.
double stop_delay_label(const std::vector<PhaseInterval>& red_intervals,
                        const std::vector<Actuation>& stopbar);

struct ExtractError : std::runtime_error {
    explicit ExtractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Hourly feature rows per movement. Hour bins are derived from the
/// movement's phase interval span; counts and occupancy bin by actuation
/// on-time, red-cycle quantities (waiting, label) by the red interval's end.
FeatureTable extract_features(const std::vector<Actuation>& actuations,
                              const SignalTimeline& timeline,
                              const IntersectionConfig& config);

struct CsvError : std::runtime_error {
    explicit CsvError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Decimal formatting fixed at 6 fractional digits.
void write_feature_csv(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_csv(std::istream& in);

}  // namespace da
