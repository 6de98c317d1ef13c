#include "fedar/trace_io.hpp"

#include "fedar/io_util.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fedar {

namespace {

double parse_number(const std::string& field, const std::filesystem::path& path, std::size_t line) {
    const char* begin = field.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                                 ": not a number: '" + field + "'");
    return v;
}

} // namespace

std::vector<TimeSeries> load_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open trace: " + path.string());

    std::vector<double> times;
    std::vector<double> watts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (lineno == 1) {
            if (line != "timestamp,watts")
                throw std::runtime_error(path.string() + ":1: expected header 'timestamp,watts'");
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected 'timestamp,watts'");
        double t = parse_number(line.substr(0, comma), path, lineno);
        double w = parse_number(line.substr(comma + 1), path, lineno);
        if (!times.empty() && t <= times.back())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": timestamps must be strictly increasing");
        times.push_back(t);
        watts.push_back(w);
    }
    if (times.empty())
        throw std::runtime_error(path.string() + ": no readings");

    double interval = 1.0;
    if (times.size() > 1) {
        std::vector<double> gaps(times.size() - 1);
        for (std::size_t i = 1; i < times.size(); ++i)
            gaps[i - 1] = times[i] - times[i - 1];
        auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
        std::nth_element(gaps.begin(), mid, gaps.end());
        interval = *mid;
        if (gaps.size() % 2 == 0) {
            double lower = *std::max_element(gaps.begin(), mid);
            interval = 0.5 * (lower + interval);
        }
    }

    std::vector<TimeSeries> out;
    TimeSeries cur;
    cur.start_time = times[0];
    cur.sample_interval = interval;
    cur.readings.push_back(watts[0]);
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i] - times[i - 1] > 3.0 * interval) {
            out.push_back(std::move(cur));
            cur = TimeSeries{};
            cur.start_time = times[i];
            cur.sample_interval = interval;
        }
        cur.readings.push_back(watts[i]);
    }
    out.push_back(std::move(cur));
    return out;
}

void save_trace_csv(const TimeSeries& ts, const std::filesystem::path& path) {
    std::string body = "timestamp,watts\n";
    for (std::size_t i = 0; i < ts.readings.size(); ++i) {
        double t = ts.start_time + static_cast<double>(i) * ts.sample_interval;
        body += format_g9(t);
        body += ',';
        body += format_g9(ts.readings[i]);
        body += '\n';
    }
    atomic_write_file(path, body);
}

} // namespace fedar
