#pragma once

#include "fedar/footprint.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace fedar {

struct Instance {
    std::vector<double> features; // padded footprint, length = dataset instance_length
    int label = 0;                // index into class_names
};

struct Dataset {
    std::vector<Instance> instances;
    std::vector<std::string> class_names;
    std::size_t instance_length = 0;

    std::size_t size() const { return instances.size(); }
    std::size_t num_classes() const { return class_names.size(); }
};

// Uniform label flipping: each selected instance gets a different label drawn
// uniformly from the remaining classes.
struct NoiseSpec {
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

struct PartitionSpec {
    std::size_t num_clients = 10;
    double alpha = 0.9;   // Dirichlet concentration
    double overlap = 0.2; // fraction of each chunk duplicated in from other chunks
    std::uint64_t seed = 0;
};

struct ClassProfile {
    std::string name;
    double base_watts = 2.0;
    double on_watts = 200.0;
    std::size_t min_pulse_len = 20; // samples per ON pulse
    std::size_t max_pulse_len = 33;
    std::size_t min_gap_len = 10; // OFF samples between pulses
    std::size_t max_gap_len = 40;
    std::size_t pulses_per_series = 15;
    // Triangle ripple riding on the ON level; pure square waves difference to
    // all zeros, so the ripple carries the whole class signature.
    double ripple_amp = 6.0;
    std::size_t ripple_period = 4;
};

struct SynthSpec {
    std::vector<ClassProfile> profiles;
    double noise_sigma = 0.0; // Gaussian noise stddev (mean 0), clamped at 0 W
    std::size_t duration = 1200;
    std::uint64_t seed = 0;
    double min_jump = 30.0; // every profile's ON step must exceed this
};

// Exactly round(fraction*N) labels flipped; the mask marks the flipped rows.
std::pair<Dataset, std::vector<bool>> inject_label_noise(const Dataset& ds, const NoiseSpec& spec);

// Seeded shuffle, then sizes ceil(f*N) / N - ceil(f*N).
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double train_fraction,
                                             std::uint64_t seed);

// Per-class Dirichlet dealing plus cross-chunk overlap copies; every chunk
// non-empty. The de-duplicated union of the chunks equals the input.
std::vector<Dataset> partition_noniid(const Dataset& ds, const PartitionSpec& spec);

// Seeded shuffle dealt round-robin; chunk sizes differ by at most one.
std::vector<Dataset> partition_iid(const Dataset& ds, std::size_t num_clients, std::uint64_t seed);

// Class-stratified sample of round(fraction*N) instances.
Dataset make_auxiliary(const Dataset& train, double fraction, std::uint64_t seed);

// Square-wave trace for one class: OFF gaps at base watts, ON pulses at
// on_watts plus the class ripple, then pointwise Gaussian noise.
TimeSeries synth_tsc(const SynthSpec& spec, std::size_t class_id);

enum class UnknownLabelPolicy { Drop, Keep };

// Dataset CSV `label,f0..f{m-1}` with a required `<path>.manifest` sidecar
// holding class_names order, instance_length, and provenance keys.
Dataset load_dataset(const std::filesystem::path& path,
                     UnknownLabelPolicy policy = UnknownLabelPolicy::Drop);
void save_dataset(const Dataset& ds, const std::filesystem::path& path,
                  const std::map<std::string, std::string>& provenance = {});

} // namespace fedar
