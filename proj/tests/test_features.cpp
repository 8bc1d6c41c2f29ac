#include <doctest.h>

#include <sstream>

#include "delay_adapt/events.hpp"
#include "delay_adapt/features.hpp"

using namespace da;

namespace {

IntersectionConfig one_movement_config() {
    IntersectionConfig cfg;
    cfg.intersection_id = "X1";
    cfg.speed_limit_mph = 35;
    MovementConfig m;
    m.movement = Movement::through;
    m.approach = Approach::NB;
    m.phase_id = "P2";
    m.stopbar_detectors = {"D1"};
    m.advance_detectors = {"D1a"};
    m.lanes = 2;
    cfg.movements.push_back(m);
    return cfg;
}

Actuation act(std::int64_t on, std::int64_t off, PhaseState s_on, PhaseState s_off,
              const std::string& det = "D1") {
    return {det, on, off, s_on, s_off};
}

// One-hour fixed cycle: red [k*90000, k*90000+60000), green rest.
std::vector<EventRecord> cycle_events(int cycles, std::int64_t offset = 0) {
    std::vector<EventRecord> ev;
    for (int k = 0; k <= cycles; ++k) {
        ev.push_back({offset + 90000LL * k, EventKind::red_start, "", "P2"});
        if (k < cycles)
            ev.push_back({offset + 90000LL * k + 60000, EventKind::green_start, "", "P2"});
    }
    return ev;
}

}  // namespace

TEST_CASE("occupancy_time is a subtraction") {
    CHECK(occupancy_time(act(1000, 3500, PhaseState::red, PhaseState::red)) == 2.5);
    CHECK(occupancy_time(act(0, 100, PhaseState::green, PhaseState::green)) == 0.1);
}

TEST_CASE("waiting_time uses the earliest red arrival") {
    PhaseInterval red{PhaseState::red, 0, 60000};
    CHECK(waiting_time(red, {act(20000, 25000, PhaseState::red, PhaseState::red)}) == 40.0);
    CHECK(waiting_time(red, {}) == 0.0);
    CHECK(waiting_time(red, {act(50000, 52000, PhaseState::red, PhaseState::red),
                             act(10000, 12000, PhaseState::red, PhaseState::red)}) == 50.0);
    // arrival outside the interval ignored
    CHECK(waiting_time(red, {act(70000, 71000, PhaseState::green, PhaseState::green)}) == 0.0);
}

TEST_CASE("categorize with yellow collapsed to green") {
    CHECK(collapse_yellow(PhaseState::yellow) == PhaseState::green);
    CHECK(collapse_yellow(PhaseState::red) == PhaseState::red);
    CHECK(collapse_yellow(PhaseState::green) == PhaseState::green);
    CHECK(categorize(act(0, 1, PhaseState::red, PhaseState::green)) == Category::RG);
    CHECK(categorize(act(0, 1, PhaseState::red, PhaseState::red)) == Category::RR);
    CHECK(categorize(act(0, 1, PhaseState::green, PhaseState::green)) == Category::GG);
    CHECK(categorize(act(0, 1, PhaseState::green, PhaseState::red)) == Category::other);
    CHECK(categorize(act(0, 1, PhaseState::red, PhaseState::yellow)) == Category::RG);
    CHECK(categorize(act(0, 1, PhaseState::yellow, PhaseState::yellow)) == Category::GG);
}

TEST_CASE("stop_delay_label averages per red arrival") {
    std::vector<PhaseInterval> reds{{PhaseState::red, 0, 60000}};
    CHECK(stop_delay_label(reds, {act(30000, 32000, PhaseState::red, PhaseState::red),
                                  act(50000, 52000, PhaseState::red, PhaseState::red)}) == 20.0);
    CHECK(stop_delay_label(reds, {}) == 0.0);
    std::vector<PhaseInterval> two{{PhaseState::red, 0, 60000}, {PhaseState::red, 90000, 150000}};
    CHECK(stop_delay_label(two, {act(50000, 52000, PhaseState::red, PhaseState::red),
                                 act(140000, 141000, PhaseState::red, PhaseState::red)}) == 10.0);
}

TEST_CASE("extract_features splits counts by category") {
    auto cfg = one_movement_config();
    SignalTimeline tl = build_timeline(cycle_events(40));
    std::vector<Actuation> acts{
        act(1000, 62000, PhaseState::red, PhaseState::green),  // RG
        act(2000, 5000, PhaseState::red, PhaseState::red),     // RR
        act(65000, 65500, PhaseState::green, PhaseState::green),  // GG
    };
    FeatureTable t = extract_features(acts, tl, cfg);
    REQUIRE(!t.rows.empty());
    const FeatureRow& r = t.rows[0];
    CHECK(r.count_rg == 1);
    CHECK(r.count_rr == 1);
    CHECK(r.count_gg == 1);
    CHECK(r.total_count == 3);
    CHECK(r.occ_sum_s == doctest::Approx(61.0 + 3.0 + 0.5));
    CHECK(r.occ_mean_s == doctest::Approx((61.0 + 3.0 + 0.5) / 3));
    CHECK(r.speed_limit_mph == 35);
    CHECK(r.lanes == 2);
    CHECK(r.shared_lane == 0);
    // labels: both red arrivals in cycle 0, red ends at 60000
    CHECK(r.label_delay_s == doctest::Approx((59.0 + 58.0) / 2));
}

TEST_CASE("hour with zero actuations still yields a row") {
    auto cfg = one_movement_config();
    SignalTimeline tl = build_timeline(cycle_events(80));  // two hours
    FeatureTable t = extract_features({}, tl, cfg);
    REQUIRE(t.rows.size() >= 2);
    for (const auto& r : t.rows) {
        CHECK(r.total_count == 0);
        CHECK(r.label_delay_s == 0.0);
        CHECK(r.wait_mean_s == 0.0);
    }
}

TEST_CASE("two movements produce separate rows per hour") {
    auto cfg = one_movement_config();
    MovementConfig lt;
    lt.movement = Movement::left_turn;
    lt.approach = Approach::NB;
    lt.phase_id = "P1";
    lt.stopbar_detectors = {"D2"};
    lt.lanes = 1;
    cfg.movements.push_back(lt);

    auto ev = cycle_events(40);
    auto p1 = cycle_events(40);
    for (auto& e : p1) e.phase_id = "P1";
    ev.insert(ev.end(), p1.begin(), p1.end());
    SignalTimeline tl = build_timeline(ev);
    FeatureTable t = extract_features({}, tl, cfg);
    int through = 0, left = 0;
    for (const auto& r : t.rows) (r.movement == Movement::through ? through : left)++;
    CHECK(through == left);
    CHECK(through >= 1);
}

TEST_CASE("empty phase timeline raises") {
    auto cfg = one_movement_config();
    SignalTimeline tl;  // no phases at all
    CHECK_THROWS_AS(extract_features({}, tl, cfg), ExtractError);
}

TEST_CASE("red cycle spanning the hour boundary attributes to the ending hour") {
    auto cfg = one_movement_config();
    // Red starts 5 s before the hour boundary, ends after it.
    std::vector<EventRecord> ev{
        {3595000, EventKind::red_start, "", "P2"},
        {3655000, EventKind::green_start, "", "P2"},
        {3685000, EventKind::red_start, "", "P2"},
        {3745000, EventKind::green_start, "", "P2"},
        {3775000, EventKind::red_start, "", "P2"},
    };
    SignalTimeline tl = build_timeline(ev);
    // Arrival in hour 0 (at 3596000) but its red ends in hour 1.
    std::vector<Actuation> acts{act(3596000, 3656000, PhaseState::red, PhaseState::green)};
    FeatureTable t = extract_features(acts, tl, cfg);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].hour_start_ms == 0);
    CHECK(t.rows[0].label_delay_s == 0.0);       // red ends in hour 1
    CHECK(t.rows[0].total_count == 1);           // counts bin by on_ms
    CHECK(t.rows[1].label_delay_s == doctest::Approx(59.0));
    CHECK(t.rows[1].wait_mean_s > 0.0);
}

TEST_CASE("category counts sum to total") {
    auto cfg = one_movement_config();
    SignalTimeline tl = build_timeline(cycle_events(40));
    std::vector<Actuation> acts{
        act(1000, 62000, PhaseState::red, PhaseState::green),
        act(2000, 5000, PhaseState::red, PhaseState::red),
        act(65000, 65500, PhaseState::green, PhaseState::green),
        act(89000, 91000, PhaseState::green, PhaseState::red),  // "other"
        act(62000, 63000, PhaseState::yellow, PhaseState::yellow),
    };
    FeatureTable t = extract_features(acts, tl, cfg);
    const FeatureRow& r = t.rows[0];
    std::int64_t other = r.total_count - r.count_rg - r.count_rr - r.count_gg;
    CHECK(other == 1);
    CHECK(r.count_rg + r.count_rr + r.count_gg <= r.total_count);
}

TEST_CASE("whole-hours time shift preserves durations") {
    auto cfg = one_movement_config();
    std::vector<Actuation> acts{
        act(1000, 62000, PhaseState::red, PhaseState::green),
        act(2000, 5000, PhaseState::red, PhaseState::red),
    };
    FeatureTable t0 = extract_features(acts, build_timeline(cycle_events(40)), cfg);
    const std::int64_t delta = 7 * 3600000LL;
    std::vector<Actuation> shifted = acts;
    for (auto& a : shifted) {
        a.on_ms += delta;
        a.off_ms += delta;
    }
    FeatureTable t1 = extract_features(shifted, build_timeline(cycle_events(40, delta)), cfg);
    REQUIRE(t0.rows.size() == t1.rows.size());
    for (std::size_t i = 0; i < t0.rows.size(); ++i) {
        CHECK(t1.rows[i].hour_start_ms == t0.rows[i].hour_start_ms + delta);
        CHECK(t1.rows[i].occ_sum_s == doctest::Approx(t0.rows[i].occ_sum_s).epsilon(1e-12));
        CHECK(t1.rows[i].wait_mean_s == doctest::Approx(t0.rows[i].wait_mean_s).epsilon(1e-12));
        CHECK(t1.rows[i].label_delay_s ==
              doctest::Approx(t0.rows[i].label_delay_s).epsilon(1e-12));
        CHECK(t1.rows[i].total_count == t0.rows[i].total_count);
    }
}

TEST_CASE("label and wait bounded by longest red overlapping the hour") {
    auto cfg = one_movement_config();
    SignalTimeline tl = build_timeline(cycle_events(40));
    std::vector<Actuation> acts{act(10000, 12000, PhaseState::red, PhaseState::red),
                                act(95000, 97000, PhaseState::red, PhaseState::red)};
    FeatureTable t = extract_features(acts, tl, cfg);
    for (const auto& r : t.rows) {
        CHECK(r.label_delay_s <= 60.0 + 1e-12);
        CHECK(r.wait_mean_s <= 60.0 + 1e-12);
    }
}

TEST_CASE("feature CSV round-trip") {
    auto cfg = one_movement_config();
    SignalTimeline tl = build_timeline(cycle_events(40));
    std::vector<Actuation> acts{act(1000, 62000, PhaseState::red, PhaseState::green),
                                act(2000, 5000, PhaseState::red, PhaseState::red)};
    FeatureTable t = extract_features(acts, tl, cfg);
    std::ostringstream out;
    write_feature_csv(out, t);
    std::istringstream in(out.str());
    FeatureTable back = read_feature_csv(in);
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(back.rows[i].intersection_id == t.rows[i].intersection_id);
        CHECK(back.rows[i].movement == t.rows[i].movement);
        CHECK(back.rows[i].hour_start_ms == t.rows[i].hour_start_ms);
        CHECK(back.rows[i].total_count == t.rows[i].total_count);
        CHECK(back.rows[i].label_delay_s ==
              doctest::Approx(t.rows[i].label_delay_s).epsilon(1e-6));
    }
    // second serialization is byte-stable
    std::ostringstream out2;
    write_feature_csv(out2, back);
    CHECK(out2.str() == out.str());
}

TEST_CASE("feature CSV rejects duplicates and bad headers") {
    std::istringstream bad("wrong,header\n");
    CHECK_THROWS_AS(read_feature_csv(bad), CsvError);

    std::ostringstream out;
    FeatureTable t;
    FeatureRow r;
    r.intersection_id = "A";
    t.rows.push_back(r);
    t.rows.push_back(r);  // duplicate key
    write_feature_csv(out, t);
    std::istringstream in(out.str());
    CHECK_THROWS_AS(read_feature_csv(in), CsvError);
}

TEST_CASE("manifest order matches the feature vector") {
    auto names = FeatureTable::default_manifest();
    REQUIRE(names.size() == 11);
    CHECK(names[0] == "count_rg");
    CHECK(names[6] == "wait_mean_s");
    CHECK(names[10] == "shared_lane");
    FeatureRow r;
    r.count_rg = 3;
    r.wait_mean_s = 12.5;
    r.shared_lane = 1;
    auto x = FeatureTable::features(r);
    REQUIRE(x.size() == names.size());
    CHECK(x[0] == 3.0);
    CHECK(x[6] == 12.5);
    CHECK(x[10] == 1.0);
}

TEST_CASE("hour_of_day wraps modulo 24") {
    auto cfg = one_movement_config();
    const std::int64_t day1_h2 = 26 * 3600000LL;
    SignalTimeline tl = build_timeline(cycle_events(40, day1_h2));
    FeatureTable t = extract_features({}, tl, cfg);
    REQUIRE(!t.rows.empty());
    CHECK(t.rows[0].hour_of_day == 2);
}
