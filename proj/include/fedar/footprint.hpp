#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace fedar {

// One smart-plug power time series at a fixed sampling rate.
struct TimeSeries {
    std::vector<double> readings; // watts
    double start_time = 0.0;      // epoch seconds of readings[0]
    double sample_interval = 1.0; // seconds per reading

    std::size_t size() const { return readings.size(); }
};

// Segmentation thresholds. phi1 is the absolute jump in watts, phi2 the
// relative change; epsilon guards the relative test near zero watts.
struct Thresholds {
    double phi1 = 30.0;
    double phi2 = 0.2;
    double epsilon = 1.0;
};

enum class PowerState { Off, On };

// A low-variation stretch of readings opened by a switch point. `values`
// begins at the post-jump reading x[start_index]; every later value passes
// the steady test against its predecessor.
struct SteadyPeriod {
    std::size_t start_index = 0; // index of the switch point that opens it
    std::vector<double> values;  // x[start_index .. start_index+m-1]
    PowerState state = PowerState::Off;

    std::size_t length() const { return values.size(); }
};

struct FootprintSource {
    std::string series_id;
    std::size_t start_index = 0;
};

// Consecutive differences of an ON steady period; the classifier input.
struct Footprint {
    std::vector<double> diffs;
    std::optional<FootprintSource> source;
};

struct ExtractionConfig {
    std::size_t min_steady_len = 10;
    std::size_t max_steady_len = 600;
};

struct ExtractionStats {
    std::size_t switch_points = 0;
    std::size_t on_periods = 0;
    std::size_t off_periods = 0;
    std::size_t skipped_switches = 0; // no qualifying steady run
};

// Indices t (with a predecessor) where |x[t]-x[t-1]| exceeds phi1 and the
// same jump exceeds phi2*x[t]. The relative test is kept multiplication-only
// so x[t] == 0 needs no special case. Sorted ascending.
std::vector<std::size_t> detect_switch_points(const TimeSeries& ts, const Thresholds& th);

// Maximal steady run following the switch point, clamped to max_len readings
// total (the opening reading counts). Absent when shorter than min_len.
std::optional<SteadyPeriod> find_steady_period(const TimeSeries& ts, std::size_t switch_index,
                                               const Thresholds& th, std::size_t min_len,
                                               std::size_t max_len);

// ON iff power rose across the period: x[switch_index-1] < x[switch_index+m-1].
PowerState classify_state(const TimeSeries& ts, std::size_t switch_index, std::size_t m);

// m-1 consecutive differences of an ON period of length m.
Footprint compute_footprint(const SteadyPeriod& sp);

// Full pipeline: switch points -> steady periods -> ON filter -> footprints,
// in temporal order. Never throws on an eventless series.
std::vector<Footprint> extract_footprints(const TimeSeries& ts, const Thresholds& th,
                                          const ExtractionConfig& cfg,
                                          ExtractionStats* stats = nullptr);

// Extends every diff vector with trailing zeros to target_len.
std::vector<std::vector<double>> pad_footprints(const std::vector<Footprint>& fps,
                                                std::size_t target_len);

} // namespace fedar
