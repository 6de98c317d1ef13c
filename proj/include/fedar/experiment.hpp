#pragma once

#include "fedar/dataset.hpp"
#include "fedar/fed.hpp"
#include "fedar/footprint.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fedar {

// Flat key=value text, '#' comments, dotted section prefixes. Unknown keys
// are rejected so typos fail loudly.
class Config {
  public:
    static Config parse_file(const std::filesystem::path& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    std::size_t get_size(const std::string& key, std::size_t def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& def) const;

    void set(const std::string& key, const std::string& value);
    const std::map<std::string, std::string>& entries() const { return entries_; }

  private:
    std::map<std::string, std::string> entries_;
};

// Six square-wave appliance profiles separated only by their ON-ripple shape;
// classes is clamped to the palette size.
std::vector<ClassProfile> default_profiles(std::size_t classes);

// Generates per-class traces, extracts footprints, pads, labels. pad_to = 0
// pads to the longest footprint seen.
Dataset build_synth_dataset(const SynthSpec& spec, std::size_t series_per_class,
                            const Thresholds& th, const ExtractionConfig& ecfg,
                            std::size_t pad_to = 0);

struct ExperimentSettings {
    // data source: exactly one of dataset_file / trace_dir / synthetic
    std::filesystem::path dataset_file;
    std::filesystem::path trace_dir;
    std::size_t synth_classes = 6;
    std::size_t synth_series_per_class = 10;
    double synth_sigma = 0.4;
    std::size_t synth_duration = 1200;

    Thresholds thresholds;
    ExtractionConfig extraction;
    std::size_t pad_to = 0;

    double train_fraction = 0.8;
    double aux_fraction = 0.2;
    bool aux_noisy = false;

    PartitionSpec partition; // seed filled from the master seed
    bool partition_iid_mode = false;

    std::vector<double> noise_fractions{0.0, 0.05, 0.1, 0.2, 0.3};
    bool run_fedar = true;      // noise handling off
    bool run_fedarplus = true;  // noise handling on
    bool write_noise_audit = false;

    FedConfig fed;
    std::uint64_t master_seed = 42;
    std::filesystem::path out_dir = "out";
    bool verbose = false;
};

ExperimentSettings settings_from_config(const Config& cfg);

// Subcommand bodies; each returns 0 on success and throws on failure.
int cmd_synth(const ExperimentSettings& s);
int cmd_extract(const ExperimentSettings& s);
int cmd_run(const ExperimentSettings& s);
int cmd_compare(const ExperimentSettings& s);

// Shared by cmd_run/cmd_compare and the test harness: builds train/test/aux
// and the per-client datasets for one partition mode.
struct PreparedData {
    Dataset train; // pre-noise training split
    Dataset test;
    Dataset aux;
    std::vector<Dataset> chunks; // per-client, before aux append and noise
};

PreparedData prepare_data(const Dataset& full, const ExperimentSettings& s, bool iid);

// Assembles clients: injects label noise into each chunk (never the aux block
// unless aux_noisy), appends the aux block, records chunk sizes. Noise seeds
// depend on (master seed, rho, client) only, so method variants see the same
// flips.
std::vector<ClientState> make_clients(const PreparedData& data, const ExperimentSettings& s,
                                      double rho);

} // namespace fedar
