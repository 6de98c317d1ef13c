#pragma once

#include "fedar/footprint.hpp"

#include <filesystem>
#include <vector>

namespace fedar {

// Reads a `timestamp,watts` CSV. Timestamps must be strictly increasing.
// The sample interval is the median timestamp gap over the whole file and a
// gap wider than 3x the median splits the recording into separate series.
std::vector<TimeSeries> load_trace_csv(const std::filesystem::path& path);

void save_trace_csv(const TimeSeries& ts, const std::filesystem::path& path);

} // namespace fedar
