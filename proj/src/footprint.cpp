#include "fedar/footprint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedar {

namespace {

void validate_series(const TimeSeries& ts) {
    if (ts.readings.empty())
        throw std::invalid_argument("time series has no readings");
    if (!(ts.sample_interval > 0.0))
        throw std::invalid_argument("sample_interval must be positive");
    for (double v : ts.readings) {
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("readings must be finite and non-negative");
    }
}

void validate_thresholds(const Thresholds& th) {
    if (!(th.phi1 > 0.0))
        throw std::invalid_argument("phi1 must be positive");
    if (!(th.phi2 > 0.0 && th.phi2 < 1.0))
        throw std::invalid_argument("phi2 must be in (0,1)");
    if (!(th.epsilon >= 0.0))
        throw std::invalid_argument("epsilon must be non-negative");
}

inline bool is_switch(const std::vector<double>& x, std::size_t t, const Thresholds& th) {
    const double delta = std::abs(x[t] - x[t - 1]);
    return delta > th.phi1 && delta > th.phi2 * x[t];
}

inline bool is_steady(const std::vector<double>& x, std::size_t t, const Thresholds& th) {
    const double delta = std::abs(x[t] - x[t - 1]);
    return delta < th.phi2 * std::max(x[t], th.epsilon);
}

} // namespace

std::vector<std::size_t> detect_switch_points(const TimeSeries& ts, const Thresholds& th) {
    validate_series(ts);
    validate_thresholds(th);
    if (ts.readings.size() < 2)
        throw std::invalid_argument("need at least 2 readings to detect switch points");

    std::vector<std::size_t> out;
    for (std::size_t t = 1; t < ts.readings.size(); ++t) {
        if (is_switch(ts.readings, t, th))
            out.push_back(t);
    }
    return out;
}

std::optional<SteadyPeriod> find_steady_period(const TimeSeries& ts, std::size_t switch_index,
                                               const Thresholds& th, std::size_t min_len,
                                               std::size_t max_len) {
    validate_series(ts);
    validate_thresholds(th);
    if (min_len < 2)
        throw std::invalid_argument("min_len must be at least 2");
    if (max_len < min_len)
        throw std::invalid_argument("max_len must be >= min_len");
    const auto& x = ts.readings;
    if (switch_index == 0 || switch_index >= x.size())
        throw std::invalid_argument("switch_index out of range");

    // Grow the run one reading at a time; stop at the first unsteady point,
    // at the next switch point, or once the period holds max_len readings.
    std::size_t m = 1; // the opening reading x[switch_index]
    std::size_t u = switch_index + 1;
    while (u < x.size() && m < max_len && is_steady(x, u, th) && !is_switch(x, u, th)) {
        ++m;
        ++u;
    }
    if (m < min_len)
        return std::nullopt;

    SteadyPeriod sp;
    sp.start_index = switch_index;
    sp.values.assign(x.begin() + static_cast<std::ptrdiff_t>(switch_index),
                     x.begin() + static_cast<std::ptrdiff_t>(switch_index + m));
    sp.state = classify_state(ts, switch_index, m);
    return sp;
}

PowerState classify_state(const TimeSeries& ts, std::size_t switch_index, std::size_t m) {
    const auto& x = ts.readings;
    if (switch_index == 0 || m == 0 || switch_index + m > x.size())
        throw std::invalid_argument("classify_state: period out of range");
    const double before = x[switch_index - 1];
    const double last = x[switch_index + m - 1];
    return before - last < 0.0 ? PowerState::On : PowerState::Off;
}

Footprint compute_footprint(const SteadyPeriod& sp) {
    if (sp.state != PowerState::On)
        throw std::invalid_argument("compute_footprint: period is not an ON period");
    if (sp.values.size() < 2)
        throw std::invalid_argument("compute_footprint: period too short");
    Footprint fp;
    fp.diffs.resize(sp.values.size() - 1);
    for (std::size_t i = 0; i + 1 < sp.values.size(); ++i)
        fp.diffs[i] = sp.values[i + 1] - sp.values[i];
    return fp;
}

std::vector<Footprint> extract_footprints(const TimeSeries& ts, const Thresholds& th,
                                          const ExtractionConfig& cfg, ExtractionStats* stats) {
    ExtractionStats local;
    if (ts.readings.size() < 2) {
        validate_series(ts);
        if (stats)
            *stats = local;
        return {};
    }
    const auto switches = detect_switch_points(ts, th);
    local.switch_points = switches.size();

    std::vector<Footprint> out;
    for (std::size_t t : switches) {
        auto sp = find_steady_period(ts, t, th, cfg.min_steady_len, cfg.max_steady_len);
        if (!sp) {
            ++local.skipped_switches;
            continue;
        }
        if (sp->state == PowerState::On) {
            ++local.on_periods;
            Footprint fp = compute_footprint(*sp);
            fp.source = FootprintSource{"", t};
            out.push_back(std::move(fp));
        } else {
            ++local.off_periods;
        }
    }
    if (stats)
        *stats = local;
    return out;
}

std::vector<std::vector<double>> pad_footprints(const std::vector<Footprint>& fps,
                                                std::size_t target_len) {
    for (const auto& fp : fps) {
        if (fp.diffs.size() > target_len)
            throw std::invalid_argument("pad_footprints: target_len " + std::to_string(target_len) +
                                        " shorter than footprint of length " +
                                        std::to_string(fp.diffs.size()));
    }
    std::vector<std::vector<double>> out;
    out.reserve(fps.size());
    for (const auto& fp : fps) {
        std::vector<double> v = fp.diffs;
        v.resize(target_len, 0.0);
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace fedar
