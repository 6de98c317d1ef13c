#include "fedar/dataset.hpp"

#include "fedar/io_util.hpp"
#include "fedar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace fedar {

namespace {

// Unbiased bounded draw; a fixed algorithm so seeded results never depend on
// library internals.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0)
        throw std::logic_error("uniform_below(0)");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = rng();
    while (v >= limit)
        v = rng();
    return v % n;
}

void fisher_yates(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

// First k entries of a seeded partial shuffle: a uniform sample without
// replacement, in draw order.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t k,
                                                    std::mt19937_64& rng) {
    for (std::size_t i = 0; i < k; ++i)
        std::swap(pool[i], pool[i + uniform_below(rng, pool.size() - i)]);
    pool.resize(k);
    return pool;
}

void validate_dataset(const Dataset& ds) {
    if (ds.class_names.empty())
        throw std::invalid_argument("dataset has no classes");
    for (const auto& inst : ds.instances) {
        if (inst.features.size() != ds.instance_length)
            throw std::invalid_argument("instance length mismatch");
        if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= ds.class_names.size())
            throw std::invalid_argument("instance label out of range");
    }
}

Dataset empty_like(const Dataset& ds) {
    Dataset out;
    out.class_names = ds.class_names;
    out.instance_length = ds.instance_length;
    return out;
}

Dataset gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out = empty_like(ds);
    out.instances.reserve(idx.size());
    for (std::size_t i : idx)
        out.instances.push_back(ds.instances[i]);
    return out;
}

// Largest-remainder apportionment of `total` across real quotas; ties go to
// the lower index.
std::vector<std::size_t> apportion(const std::vector<double>& quotas, std::size_t total) {
    const std::size_t n = quotas.size();
    std::vector<std::size_t> out(n);
    std::vector<std::pair<double, std::size_t>> rem(n);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double base = std::floor(quotas[i]);
        out[i] = static_cast<std::size_t>(base);
        assigned += out[i];
        rem[i] = {quotas[i] - base, i};
    }
    if (assigned > total)
        throw std::logic_error("apportion: floor sum exceeds total");
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        return a.first > b.first;
    });
    std::size_t left = total - assigned;
    for (std::size_t i = 0; i < n && left > 0; ++i) {
        if (rem[i].first <= 0.0)
            break;
        ++out[rem[i].second];
        --left;
    }
    if (left > 0) { // all remainders zero but rounding still owes some
        for (std::size_t i = 0; i < n && left > 0; ++i) {
            ++out[rem[i].second];
            --left;
        }
    }
    return out;
}

} // namespace

std::pair<Dataset, std::vector<bool>> inject_label_noise(const Dataset& ds, const NoiseSpec& spec) {
    validate_dataset(ds);
    if (spec.fraction < 0.0 || spec.fraction > 1.0)
        throw std::invalid_argument("noise fraction must be in [0,1]");
    const std::size_t n = ds.size();
    const std::size_t flips =
        static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
    Dataset out = ds;
    std::vector<bool> mask(n, false);
    if (flips == 0)
        return {std::move(out), std::move(mask)};
    const std::size_t c = ds.num_classes();
    if (c < 2)
        throw std::invalid_argument("label flipping needs at least 2 classes");

    auto rng = make_rng(spec.seed);
    auto chosen = sample_without_replacement(iota_indices(n), flips, rng);
    for (std::size_t i : chosen) {
        mask[i] = true;
        const auto old = static_cast<std::uint64_t>(out.instances[i].label);
        std::uint64_t repl = uniform_below(rng, c - 1);
        if (repl >= old)
            ++repl;
        out.instances[i].label = static_cast<int>(repl);
    }
    return {std::move(out), std::move(mask)};
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double train_fraction,
                                             std::uint64_t seed) {
    validate_dataset(ds);
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must be in (0,1)");
    if (ds.size() < 2)
        throw std::invalid_argument("need at least 2 instances to split");

    const std::size_t n = ds.size();
    const auto n_train = static_cast<std::size_t>(
        std::ceil(train_fraction * static_cast<double>(n)));
    auto rng = make_rng(seed);
    auto idx = iota_indices(n);
    fisher_yates(idx, rng);
    std::vector<std::size_t> train_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> test_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return {gather(ds, train_idx), gather(ds, test_idx)};
}

std::vector<Dataset> partition_noniid(const Dataset& ds, const PartitionSpec& spec) {
    validate_dataset(ds);
    const std::size_t k = spec.num_clients;
    if (k < 1)
        throw std::invalid_argument("num_clients must be >= 1");
    if (!(spec.alpha > 0.0))
        throw std::invalid_argument("alpha must be positive");
    if (spec.overlap < 0.0 || spec.overlap >= 1.0)
        throw std::invalid_argument("overlap must be in [0,1)");
    if (k > ds.size())
        throw std::invalid_argument("more clients than instances");

    auto rng = make_rng(spec.seed);
    const std::size_t c = ds.num_classes();
    std::vector<std::vector<std::size_t>> chunks(k);

    std::gamma_distribution<double> gamma(spec.alpha, 1.0);
    for (std::size_t cls = 0; cls < c; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.size(); ++i)
            if (static_cast<std::size_t>(ds.instances[i].label) == cls)
                members.push_back(i);
        if (members.empty())
            continue;

        std::vector<double> draw(k);
        double sum = 0.0;
        for (auto& g : draw) {
            g = gamma(rng);
            sum += g;
        }
        std::vector<double> quotas(k);
        for (std::size_t j = 0; j < k; ++j) {
            double p = sum > 0.0 ? draw[j] / sum : 1.0 / static_cast<double>(k);
            quotas[j] = p * static_cast<double>(members.size());
        }
        auto counts = apportion(quotas, members.size());

        fisher_yates(members, rng);
        std::size_t next = 0;
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t t = 0; t < counts[j]; ++t)
                chunks[j].push_back(members[next++]);
    }

    // No client may sit out a round with nothing to train on.
    for (std::size_t j = 0; j < k; ++j) {
        if (!chunks[j].empty())
            continue;
        std::size_t largest = 0;
        for (std::size_t t = 1; t < k; ++t)
            if (chunks[t].size() > chunks[largest].size())
                largest = t;
        if (chunks[largest].size() < 2)
            throw std::runtime_error("cannot rebalance empty client chunk");
        chunks[j].push_back(chunks[largest].back());
        chunks[largest].pop_back();
    }

    if (spec.overlap > 0.0 && k > 1) {
        const std::vector<std::vector<std::size_t>> dealt = chunks;
        for (std::size_t j = 0; j < k; ++j) {
            std::vector<std::size_t> others;
            for (std::size_t t = 0; t < k; ++t)
                if (t != j)
                    others.insert(others.end(), dealt[t].begin(), dealt[t].end());
            auto want = static_cast<std::size_t>(
                std::ceil(spec.overlap * static_cast<double>(dealt[j].size())));
            want = std::min(want, others.size());
            auto copies = sample_without_replacement(std::move(others), want, rng);
            chunks[j].insert(chunks[j].end(), copies.begin(), copies.end());
        }
    }

    std::vector<Dataset> out;
    out.reserve(k);
    for (const auto& chunk : chunks)
        out.push_back(gather(ds, chunk));
    return out;
}

std::vector<Dataset> partition_iid(const Dataset& ds, std::size_t num_clients,
                                   std::uint64_t seed) {
    validate_dataset(ds);
    if (num_clients < 1)
        throw std::invalid_argument("num_clients must be >= 1");
    if (num_clients > ds.size())
        throw std::invalid_argument("more clients than instances");
    auto rng = make_rng(seed);
    auto idx = iota_indices(ds.size());
    fisher_yates(idx, rng);
    std::vector<std::vector<std::size_t>> chunks(num_clients);
    for (std::size_t i = 0; i < idx.size(); ++i)
        chunks[i % num_clients].push_back(idx[i]);
    std::vector<Dataset> out;
    out.reserve(num_clients);
    for (const auto& chunk : chunks)
        out.push_back(gather(ds, chunk));
    return out;
}

Dataset make_auxiliary(const Dataset& train, double fraction, std::uint64_t seed) {
    validate_dataset(train);
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("auxiliary fraction must be in (0,1)");
    const std::size_t n = train.size();
    const auto total =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (total == 0)
        throw std::invalid_argument("auxiliary selection is empty");

    const std::size_t c = train.num_classes();
    std::vector<std::vector<std::size_t>> per_class(c);
    for (std::size_t i = 0; i < n; ++i)
        per_class[static_cast<std::size_t>(train.instances[i].label)].push_back(i);

    std::vector<double> quotas(c);
    for (std::size_t cls = 0; cls < c; ++cls)
        quotas[cls] = fraction * static_cast<double>(per_class[cls].size());
    auto counts = apportion(quotas, total);

    auto rng = make_rng(seed);
    std::vector<std::size_t> picked;
    picked.reserve(total);
    for (std::size_t cls = 0; cls < c; ++cls) {
        if (counts[cls] > per_class[cls].size())
            throw std::logic_error("stratified quota exceeds class size");
        auto take = sample_without_replacement(per_class[cls], counts[cls], rng);
        picked.insert(picked.end(), take.begin(), take.end());
    }
    return gather(train, picked);
}

namespace {

double triangle_ripple(std::size_t i, double amp, std::size_t period) {
    const double half = static_cast<double>(period) / 2.0;
    const double t = static_cast<double>(i % period);
    return t < half ? -amp + 2.0 * amp * (t / half) : amp - 2.0 * amp * ((t - half) / half);
}

} // namespace

TimeSeries synth_tsc(const SynthSpec& spec, std::size_t class_id) {
    if (spec.profiles.empty())
        throw std::invalid_argument("synth spec has no class profiles");
    if (class_id >= spec.profiles.size())
        throw std::invalid_argument("class_id out of range");
    if (spec.duration == 0)
        throw std::invalid_argument("duration must be positive");
    if (spec.noise_sigma < 0.0)
        throw std::invalid_argument("noise sigma must be non-negative");
    const ClassProfile& p = spec.profiles[class_id];
    if (p.base_watts < 0.0 || p.on_watts <= p.base_watts)
        throw std::invalid_argument("profile watt levels invalid");
    if (p.on_watts - p.ripple_amp - p.base_watts <= spec.min_jump)
        throw std::invalid_argument("profile ON step does not clear the switch threshold");
    if (p.min_pulse_len < 2 || p.max_pulse_len < p.min_pulse_len)
        throw std::invalid_argument("pulse length range invalid");
    if (p.min_gap_len < 1 || p.max_gap_len < p.min_gap_len)
        throw std::invalid_argument("gap length range invalid");
    if (p.ripple_period < 2)
        throw std::invalid_argument("ripple period must be >= 2");

    auto rng = make_rng(spec.seed);
    std::vector<double> readings;
    readings.reserve(spec.duration);
    for (std::size_t pulse = 0; pulse < p.pulses_per_series; ++pulse) {
        const std::size_t gap =
            p.min_gap_len + uniform_below(rng, p.max_gap_len - p.min_gap_len + 1);
        const std::size_t plen =
            p.min_pulse_len + uniform_below(rng, p.max_pulse_len - p.min_pulse_len + 1);
        readings.insert(readings.end(), gap, p.base_watts);
        for (std::size_t i = 0; i < plen; ++i)
            readings.push_back(p.on_watts + triangle_ripple(i, p.ripple_amp, p.ripple_period));
    }
    if (readings.size() > spec.duration)
        throw std::invalid_argument("duration too short for the requested pulses");
    readings.insert(readings.end(), spec.duration - readings.size(), p.base_watts);

    if (spec.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (auto& v : readings)
            v = std::max(0.0, v + noise(rng));
    }

    TimeSeries ts;
    ts.readings = std::move(readings);
    ts.start_time = 0.0;
    ts.sample_interval = 1.0;
    return ts;
}

namespace {

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i)
            out += ',';
        out += names[i];
    }
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_double_strict(const std::string& field, const std::filesystem::path& path,
                           std::size_t line) {
    const char* begin = field.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v))
        throw std::runtime_error(path.string() + ":" + std::to_string(line) +
                                 ": bad numeric field '" + field + "'");
    return v;
}

} // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  const std::map<std::string, std::string>& provenance) {
    validate_dataset(ds);
    for (const auto& name : ds.class_names)
        if (name.empty() || name.find_first_of(",\n\r") != std::string::npos)
            throw std::invalid_argument("class name unusable in CSV: '" + name + "'");

    std::string csv = "label";
    for (std::size_t i = 0; i < ds.instance_length; ++i)
        csv += ",f" + std::to_string(i);
    csv += '\n';
    for (const auto& inst : ds.instances) {
        csv += ds.class_names[static_cast<std::size_t>(inst.label)];
        for (double f : inst.features) {
            csv += ',';
            csv += format_g9(f);
        }
        csv += '\n';
    }
    atomic_write_file(path, csv);

    std::string manifest;
    manifest += "class_names=" + join_names(ds.class_names) + '\n';
    manifest += "instance_length=" + std::to_string(ds.instance_length) + '\n';
    manifest += "instances=" + std::to_string(ds.size()) + '\n';
    for (const auto& [key, value] : provenance) {
        if (key == "class_names" || key == "instance_length" || key == "instances")
            throw std::invalid_argument("provenance key collides with reserved key: " + key);
        if (key.find_first_of("=\n") != std::string::npos ||
            value.find('\n') != std::string::npos)
            throw std::invalid_argument("provenance entry unusable: " + key);
        manifest += key + '=' + value + '\n';
    }
    std::filesystem::path mpath = path;
    mpath += ".manifest";
    atomic_write_file(mpath, manifest);
}

Dataset load_dataset(const std::filesystem::path& path, UnknownLabelPolicy policy) {
    std::filesystem::path mpath = path;
    mpath += ".manifest";
    std::ifstream min(mpath);
    if (!min)
        throw std::runtime_error("missing dataset manifest: " + mpath.string());

    Dataset ds;
    std::size_t declared_instances = 0;
    bool have_names = false, have_len = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(min, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(mpath.string() + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "class_names") {
            ds.class_names = split_on(value, ',');
            have_names = true;
        } else if (key == "instance_length") {
            ds.instance_length = static_cast<std::size_t>(std::stoull(value));
            have_len = true;
        } else if (key == "instances") {
            declared_instances = static_cast<std::size_t>(std::stoull(value));
        } // provenance keys pass through silently
    }
    if (!have_names || ds.class_names.empty() || !have_len)
        throw std::runtime_error(mpath.string() + ": manifest needs class_names and instance_length");

    std::unordered_map<std::string, int> name_to_id;
    for (std::size_t i = 0; i < ds.class_names.size(); ++i)
        name_to_id[ds.class_names[i]] = static_cast<int>(i);
    int unknown_id = -1;

    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open dataset: " + path.string());
    std::string expected_header = "label";
    for (std::size_t i = 0; i < ds.instance_length; ++i)
        expected_header += ",f" + std::to_string(i);

    lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (lineno == 1) {
            if (line != expected_header)
                throw std::runtime_error(path.string() + ":1: header does not match manifest");
            continue;
        }
        auto fields = split_on(line, ',');
        if (fields.size() != ds.instance_length + 1)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(ds.instance_length + 1) + " fields, got " +
                                     std::to_string(fields.size()));
        Instance inst;
        auto it = name_to_id.find(fields[0]);
        if (it == name_to_id.end()) {
            if (policy == UnknownLabelPolicy::Drop)
                continue;
            if (unknown_id < 0) {
                unknown_id = static_cast<int>(ds.class_names.size());
                ds.class_names.push_back("__unknown__");
            }
            inst.label = unknown_id;
        } else {
            inst.label = it->second;
        }
        inst.features.reserve(ds.instance_length);
        for (std::size_t f = 1; f < fields.size(); ++f)
            inst.features.push_back(parse_double_strict(fields[f], path, lineno));
        ds.instances.push_back(std::move(inst));
    }
    if (ds.instances.empty())
        throw std::runtime_error(path.string() + ": no instances");
    if (declared_instances != 0 && policy == UnknownLabelPolicy::Keep &&
        ds.instances.size() != declared_instances)
        throw std::runtime_error(path.string() + ": instance count differs from manifest");
    return ds;
}

} // namespace fedar
