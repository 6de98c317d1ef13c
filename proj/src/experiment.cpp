#include "fedar/experiment.hpp"

#include "fedar/io_util.hpp"
#include "fedar/metrics.hpp"
#include "fedar/rng.hpp"
#include "fedar/trace_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>

namespace fedar {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': bad number '" + v + "'");
    return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': bad integer '" + v + "'");
    return x;
}

std::string num_tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace

Config Config::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_string(text);
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::size_t lineno = 0;
    std::string line;
    for (std::size_t pos = 0; pos <= text.size();) {
        const auto nl = text.find('\n', pos);
        line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) +
                                        ": expected key=value, got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
        cfg.entries_[key] = value;
    }
    return cfg;
}

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& def) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? def : parse_double(key, it->second);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? def : parse_u64(key, it->second);
}

std::size_t Config::get_size(const std::string& key, std::size_t def) const {
    return static_cast<std::size_t>(get_u64(key, def));
}

bool Config::get_bool(const std::string& key, bool def) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
        return def;
    const std::string& v = it->second;
    if (v == "true" || v == "yes" || v == "on" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "off" || v == "0")
        return false;
    throw std::invalid_argument("config key '" + key + "': bad boolean '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key,
                                            const std::vector<double>& def) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
        return def;
    std::vector<double> out;
    for (const auto& part : split_list(it->second, ','))
        if (!part.empty())
            out.push_back(parse_double(key, part));
    if (out.empty())
        throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::vector<ClassProfile> default_profiles(std::size_t classes) {
    // Same square-wave skeleton everywhere; only the ON-ripple differs, so the
    // per-step slope 4*amp/period is the feature the classifier must learn.
    std::vector<ClassProfile> palette(6);
    palette[0] = {"fridge", 2.0, 180.0, 20, 33, 10, 40, 15, 6.0, 4};
    palette[1] = {"kettle", 2.0, 200.0, 20, 33, 10, 40, 15, 6.0, 6};
    palette[2] = {"tv", 2.0, 190.0, 20, 33, 10, 40, 15, 9.0, 5};
    palette[3] = {"washer", 2.0, 210.0, 20, 33, 10, 40, 15, 9.0, 8};
    palette[4] = {"aircon", 2.0, 220.0, 20, 33, 10, 40, 15, 12.0, 6};
    palette[5] = {"grinder", 2.0, 170.0, 20, 33, 10, 40, 15, 12.0, 10};
    if (classes == 0)
        throw std::invalid_argument("need at least one class");
    palette.resize(std::min(classes, palette.size()));
    return palette;
}

namespace {

std::string series_role(std::size_t class_id, std::size_t series) {
    return "synth/class=" + std::to_string(class_id) + "/series=" + std::to_string(series);
}

} // namespace

Dataset build_synth_dataset(const SynthSpec& spec, std::size_t series_per_class,
                            const Thresholds& th, const ExtractionConfig& ecfg,
                            std::size_t pad_to) {
    if (spec.profiles.empty())
        throw std::invalid_argument("no class profiles");
    if (series_per_class == 0)
        throw std::invalid_argument("series_per_class must be >= 1");

    std::vector<Footprint> fps;
    std::vector<int> labels;
    std::size_t max_len = 0;
    for (std::size_t c = 0; c < spec.profiles.size(); ++c) {
        for (std::size_t k = 0; k < series_per_class; ++k) {
            SynthSpec sp = spec;
            sp.seed = derive_seed(spec.seed, series_role(c, k));
            const TimeSeries ts = synth_tsc(sp, c);
            for (auto& fp : extract_footprints(ts, th, ecfg)) {
                if (fp.source)
                    fp.source->series_id =
                        spec.profiles[c].name + "__" + std::to_string(k);
                max_len = std::max(max_len, fp.diffs.size());
                fps.push_back(std::move(fp));
                labels.push_back(static_cast<int>(c));
            }
        }
    }
    if (fps.empty())
        throw std::runtime_error("no footprints extracted from synthetic traces");
    const std::size_t target = pad_to == 0 ? max_len : pad_to;
    const auto padded = pad_footprints(fps, target);

    Dataset ds;
    for (const auto& p : spec.profiles)
        ds.class_names.push_back(p.name);
    ds.instance_length = target;
    ds.instances.reserve(padded.size());
    for (std::size_t i = 0; i < padded.size(); ++i)
        ds.instances.push_back({padded[i], labels[i]});
    return ds;
}

ExperimentSettings settings_from_config(const Config& cfg) {
    static const std::set<std::string> known{
        "data.dataset_file", "data.trace_dir",
        "synth.classes", "synth.series_per_class", "synth.sigma", "synth.duration",
        "extract.phi1", "extract.phi2", "extract.epsilon",
        "extract.min_steady_len", "extract.max_steady_len", "extract.pad_to",
        "split.train_fraction",
        "aux.fraction", "aux.noisy",
        "partition.mode", "partition.clients", "partition.alpha", "partition.overlap",
        "noise.fractions", "noise.audit",
        "variants",
        "fed.rounds", "fed.aggregation", "fed.local_epochs", "fed.optimizer",
        "fed.learning_rate", "fed.damping", "fed.backend", "fed.conv_channels",
        "fed.pretrain_epochs", "fed.retrain_each_round", "fed.pin_auxiliary_onehot",
        "fed.grad_tol",
        "seed", "out", "verbose",
    };
    for (const auto& [key, value] : cfg.entries())
        if (known.count(key) == 0)
            throw std::invalid_argument("unknown config key: " + key);

    ExperimentSettings s;
    s.dataset_file = cfg.get_string("data.dataset_file", "");
    s.trace_dir = cfg.get_string("data.trace_dir", "");
    if (!s.dataset_file.empty() && !s.trace_dir.empty())
        throw std::invalid_argument("choose one data source: data.dataset_file or data.trace_dir");

    s.synth_classes = cfg.get_size("synth.classes", s.synth_classes);
    s.synth_series_per_class = cfg.get_size("synth.series_per_class", s.synth_series_per_class);
    s.synth_sigma = cfg.get_double("synth.sigma", s.synth_sigma);
    s.synth_duration = cfg.get_size("synth.duration", s.synth_duration);

    s.thresholds.phi1 = cfg.get_double("extract.phi1", s.thresholds.phi1);
    s.thresholds.phi2 = cfg.get_double("extract.phi2", s.thresholds.phi2);
    s.thresholds.epsilon = cfg.get_double("extract.epsilon", s.thresholds.epsilon);
    s.extraction.min_steady_len = cfg.get_size("extract.min_steady_len", s.extraction.min_steady_len);
    s.extraction.max_steady_len = cfg.get_size("extract.max_steady_len", s.extraction.max_steady_len);
    s.pad_to = cfg.get_size("extract.pad_to", s.pad_to);

    s.train_fraction = cfg.get_double("split.train_fraction", s.train_fraction);
    if (!(s.train_fraction > 0.0) || !(s.train_fraction < 1.0))
        throw std::invalid_argument("split.train_fraction must lie in (0,1)");

    s.aux_fraction = cfg.get_double("aux.fraction", s.aux_fraction);
    if (!(s.aux_fraction > 0.0) || s.aux_fraction > 1.0)
        throw std::invalid_argument("aux.fraction must lie in (0,1]");
    s.aux_noisy = cfg.get_bool("aux.noisy", s.aux_noisy);

    const std::string mode = cfg.get_string("partition.mode", "dirichlet");
    if (mode == "dirichlet")
        s.partition_iid_mode = false;
    else if (mode == "iid")
        s.partition_iid_mode = true;
    else
        throw std::invalid_argument("partition.mode must be dirichlet or iid");
    s.partition.num_clients = cfg.get_size("partition.clients", s.partition.num_clients);
    if (s.partition.num_clients == 0)
        throw std::invalid_argument("partition.clients must be >= 1");
    s.partition.alpha = cfg.get_double("partition.alpha", s.partition.alpha);
    s.partition.overlap = cfg.get_double("partition.overlap", s.partition.overlap);

    s.noise_fractions = cfg.get_double_list("noise.fractions", s.noise_fractions);
    for (double rho : s.noise_fractions)
        if (rho < 0.0 || rho >= 1.0)
            throw std::invalid_argument("noise.fractions entries must lie in [0,1)");
    s.write_noise_audit = cfg.get_bool("noise.audit", s.write_noise_audit);

    if (cfg.has("variants")) {
        s.run_fedar = false;
        s.run_fedarplus = false;
        for (const auto& v : split_list(cfg.get_string("variants", ""), ',')) {
            if (v == "fedar")
                s.run_fedar = true;
            else if (v == "fedar+" || v == "fedarplus")
                s.run_fedarplus = true;
            else if (!v.empty())
                throw std::invalid_argument("variants: unknown variant '" + v + "'");
        }
        if (!s.run_fedar && !s.run_fedarplus)
            throw std::invalid_argument("variants: nothing selected");
    }

    s.fed.rounds = cfg.get_size("fed.rounds", s.fed.rounds);
    if (s.fed.rounds == 0)
        throw std::invalid_argument("fed.rounds must be >= 1");
    const std::string agg = cfg.get_string("fed.aggregation", "mean");
    if (agg == "mean")
        s.fed.aggregation = Aggregation::Mean;
    else if (agg == "fedavg")
        s.fed.aggregation = Aggregation::FedAvg;
    else
        throw std::invalid_argument("fed.aggregation must be mean or fedavg");
    s.fed.hyper.local_epochs = cfg.get_size("fed.local_epochs", s.fed.hyper.local_epochs);
    if (s.fed.hyper.local_epochs == 0)
        throw std::invalid_argument("fed.local_epochs must be >= 1");
    const std::string optim = cfg.get_string("fed.optimizer", "newton");
    if (optim == "newton")
        s.fed.hyper.optimizer = Optimizer::Newton;
    else if (optim == "sgd")
        s.fed.hyper.optimizer = Optimizer::Sgd;
    else
        throw std::invalid_argument("fed.optimizer must be newton or sgd");
    s.fed.hyper.learning_rate = cfg.get_double("fed.learning_rate", s.fed.hyper.learning_rate);
    s.fed.hyper.damping = cfg.get_double("fed.damping", s.fed.hyper.damping);
    const std::string backend = cfg.get_string("fed.backend", "softmax_reg");
    if (backend == "softmax_reg")
        s.fed.hyper.backend = Backend::SoftmaxReg;
    else if (backend == "tiny_conv")
        s.fed.hyper.backend = Backend::TinyConv;
    else
        throw std::invalid_argument("fed.backend must be softmax_reg or tiny_conv");
    s.fed.hyper.conv_channels = cfg.get_size("fed.conv_channels", s.fed.hyper.conv_channels);
    s.fed.hyper.grad_tol = cfg.get_double("fed.grad_tol", s.fed.hyper.grad_tol);
    s.fed.pretrain_epochs = cfg.get_size("fed.pretrain_epochs", s.fed.pretrain_epochs);
    s.fed.retrain_each_round = cfg.get_bool("fed.retrain_each_round", s.fed.retrain_each_round);
    s.fed.pin_auxiliary_onehot =
        cfg.get_bool("fed.pin_auxiliary_onehot", s.fed.pin_auxiliary_onehot);

    s.master_seed = cfg.get_u64("seed", s.master_seed);
    s.out_dir = cfg.get_string("out", s.out_dir.string());
    s.verbose = cfg.get_bool("verbose", s.verbose);
    return s;
}

namespace {

SynthSpec make_synth_spec(const ExperimentSettings& s) {
    SynthSpec sp;
    sp.profiles = default_profiles(s.synth_classes);
    sp.noise_sigma = s.synth_sigma;
    sp.duration = s.synth_duration;
    sp.seed = s.master_seed;
    sp.min_jump = s.thresholds.phi1;
    return sp;
}

struct TraceHarvest {
    std::map<std::string, std::vector<Footprint>> per_class;
    std::size_t max_len = 0;
};

TraceHarvest harvest_traces(const ExperimentSettings& s) {
    if (s.trace_dir.empty())
        throw std::invalid_argument("data.trace_dir is not set");
    if (!std::filesystem::is_directory(s.trace_dir))
        throw std::runtime_error("not a directory: " + s.trace_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(s.trace_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error("no trace files in " + s.trace_dir.string());

    TraceHarvest h;
    for (const auto& file : files) {
        const std::string stem = file.stem().string();
        const auto sep = stem.find("__");
        if (sep == std::string::npos || sep == 0)
            throw std::runtime_error("trace file name must be <class>__*.csv: " +
                                     file.filename().string());
        const std::string cls = stem.substr(0, sep);
        for (const auto& ts : load_trace_csv(file)) {
            for (auto& fp : extract_footprints(ts, s.thresholds, s.extraction)) {
                if (fp.source)
                    fp.source->series_id = file.filename().string();
                h.max_len = std::max(h.max_len, fp.diffs.size());
                h.per_class[cls].push_back(std::move(fp));
            }
        }
    }
    return h;
}

Dataset dataset_from_traces(const ExperimentSettings& s,
                            std::vector<std::pair<std::string, std::size_t>>* counts = nullptr) {
    const TraceHarvest h = harvest_traces(s);
    std::size_t total = 0;
    for (const auto& [cls, fps] : h.per_class)
        total += fps.size();
    if (total == 0)
        throw std::runtime_error("no footprints extracted from " + s.trace_dir.string());
    const std::size_t target = s.pad_to == 0 ? h.max_len : s.pad_to;

    Dataset ds;
    ds.instance_length = target;
    for (const auto& [cls, fps] : h.per_class) {
        const int label = static_cast<int>(ds.class_names.size());
        ds.class_names.push_back(cls);
        for (auto& padded : pad_footprints(fps, target))
            ds.instances.push_back({std::move(padded), label});
        if (counts)
            counts->emplace_back(cls, fps.size());
    }
    return ds;
}

Dataset load_full(const ExperimentSettings& s) {
    if (!s.dataset_file.empty())
        return load_dataset(s.dataset_file);
    if (!s.trace_dir.empty())
        return dataset_from_traces(s);
    return build_synth_dataset(make_synth_spec(s), s.synth_series_per_class, s.thresholds,
                               s.extraction, s.pad_to);
}

} // namespace

PreparedData prepare_data(const Dataset& full, const ExperimentSettings& s, bool iid) {
    PreparedData out;
    auto [train, test] = train_test_split(full, s.train_fraction,
                                          derive_seed(s.master_seed, "split"));
    out.train = std::move(train);
    out.test = std::move(test);
    out.aux = make_auxiliary(out.train, s.aux_fraction, derive_seed(s.master_seed, "aux"));
    if (iid) {
        out.chunks = partition_iid(out.train, s.partition.num_clients,
                                   derive_seed(s.master_seed, "partition"));
    } else {
        PartitionSpec spec = s.partition;
        spec.seed = derive_seed(s.master_seed, "partition");
        out.chunks = partition_noniid(out.train, spec);
    }
    return out;
}

std::vector<ClientState> make_clients(const PreparedData& data, const ExperimentSettings& s,
                                      double rho) {
    Dataset aux_block = data.aux;
    if (rho > 0.0 && s.aux_noisy)
        aux_block = inject_label_noise(
                        aux_block, {rho, derive_seed(s.master_seed, "noise/rho=" + num_tag(rho) +
                                                                        "/aux")})
                        .first;
    std::vector<ClientState> clients;
    clients.reserve(data.chunks.size());
    for (std::size_t j = 0; j < data.chunks.size(); ++j) {
        Dataset local = data.chunks[j];
        if (rho > 0.0)
            local = inject_label_noise(local, {rho, derive_seed(s.master_seed,
                                                                "noise/rho=" + num_tag(rho) +
                                                                    "/client=" + std::to_string(j))})
                        .first;
        ClientState c;
        c.client_id = j;
        c.chunk_size = local.size();
        local.instances.insert(local.instances.end(), aux_block.instances.begin(),
                               aux_block.instances.end());
        c.local_data = std::move(local);
        clients.push_back(std::move(c));
    }
    return clients;
}

int cmd_synth(const ExperimentSettings& s) {
    const SynthSpec spec = make_synth_spec(s);
    std::filesystem::create_directories(s.out_dir);
    for (std::size_t c = 0; c < spec.profiles.size(); ++c) {
        for (std::size_t k = 0; k < s.synth_series_per_class; ++k) {
            SynthSpec sp = spec;
            sp.seed = derive_seed(spec.seed, series_role(c, k));
            const TimeSeries ts = synth_tsc(sp, c);
            char suffix[16];
            std::snprintf(suffix, sizeof(suffix), "%04zu", k);
            save_trace_csv(ts, s.out_dir / (spec.profiles[c].name + "__" + suffix + ".csv"));
        }
        std::cout << spec.profiles[c].name << ": " << s.synth_series_per_class << " traces\n";
    }
    std::cout << "wrote " << (s.out_dir / "").string() << "\n";
    return 0;
}

int cmd_extract(const ExperimentSettings& s) {
    std::vector<std::pair<std::string, std::size_t>> counts;
    const Dataset ds = dataset_from_traces(s, &counts);
    std::filesystem::create_directories(s.out_dir);
    const auto path = s.out_dir / "dataset.csv";
    save_dataset(ds, path,
                 {{"source", "traces:" + s.trace_dir.string()},
                  {"phi1", format_g9(s.thresholds.phi1)},
                  {"phi2", format_g9(s.thresholds.phi2)},
                  {"epsilon", format_g9(s.thresholds.epsilon)},
                  {"min_steady_len", std::to_string(s.extraction.min_steady_len)},
                  {"max_steady_len", std::to_string(s.extraction.max_steady_len)}});
    for (const auto& [cls, n] : counts)
        std::cout << cls << ": " << n << " instances\n";
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

namespace {

struct CellResult {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

CellResult run_cell(const PreparedData& prep, const ExperimentSettings& s, double rho,
                    bool noise_handling, const std::string& tag) {
    auto clients = make_clients(prep, s, rho);
    FedConfig cfg = s.fed;
    cfg.noise_handling = noise_handling;
    cfg.seed = derive_seed(s.master_seed, "fed");
    const FederationResult res = run_federation(clients, cfg, prep.test);
    save_round_log_csv(res.logs, s.out_dir / ("rounds_" + tag + ".csv"));
    const ConfusionMatrix cm = evaluate(res.params, prep.test);
    save_metrics_csv(cm, prep.test.class_names, s.out_dir / ("metrics_" + tag + ".csv"));
    if (s.write_noise_audit && noise_handling)
        for (const auto& client : clients)
            if (client.yd)
                save_noise_audit(*client.yd, client.local_data,
                                 s.out_dir / ("noise_audit_" + tag + "_client" +
                                              std::to_string(client.client_id) + ".csv"));
    const auto mac = macro_average(cm);
    return {accuracy(cm), mac.f1};
}

} // namespace

int cmd_run(const ExperimentSettings& s) {
    const Dataset full = load_full(s);
    std::filesystem::create_directories(s.out_dir);
    const PreparedData prep = prepare_data(full, s, s.partition_iid_mode);

    std::string summary = "rho,variant,accuracy,macro_f1\n";
    for (double rho : s.noise_fractions) {
        for (const bool plus : {false, true}) {
            if (plus ? !s.run_fedarplus : !s.run_fedar)
                continue;
            const std::string variant = plus ? "fedarplus" : "fedar";
            const std::string tag = "rho" + num_tag(rho) + "_" + variant;
            CellResult cell;
            try {
                cell = run_cell(prep, s, rho, plus, tag);
            } catch (const std::exception& e) {
                throw std::runtime_error("cell " + tag + ": " + e.what());
            }
            summary += num_tag(rho) + "," + variant + "," + format_g9(cell.accuracy) + "," +
                       format_g9(cell.macro_f1) + "\n";
            if (s.verbose)
                std::cout << tag << ": accuracy " << format_g9(cell.accuracy) << ", macro F1 "
                          << format_g9(cell.macro_f1) << "\n";
        }
    }
    const auto path = s.out_dir / "summary.csv";
    atomic_write_file(path, summary);
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

int cmd_compare(const ExperimentSettings& s) {
    const Dataset full = load_full(s);
    std::filesystem::create_directories(s.out_dir);

    std::string table = "partition,aggregation,accuracy,macro_f1\n";
    for (const bool iid : {true, false}) {
        const PreparedData prep = prepare_data(full, s, iid);
        for (const auto agg : {Aggregation::Mean, Aggregation::FedAvg}) {
            const std::string tag = std::string(iid ? "iid" : "noniid") + "_" +
                                    (agg == Aggregation::Mean ? "mean" : "fedavg");
            try {
                auto clients = make_clients(prep, s, 0.0);
                FedConfig cfg = s.fed;
                cfg.noise_handling = false;
                cfg.aggregation = agg;
                cfg.seed = derive_seed(s.master_seed, "fed");
                const FederationResult res = run_federation(clients, cfg, prep.test);
                const ConfusionMatrix cm = evaluate(res.params, prep.test);
                const auto mac = macro_average(cm);
                table += std::string(iid ? "iid" : "noniid") + "," +
                         (agg == Aggregation::Mean ? "mean" : "fedavg") + "," +
                         format_g9(accuracy(cm)) + "," + format_g9(mac.f1) + "\n";
                if (s.verbose)
                    std::cout << tag << ": accuracy " << format_g9(accuracy(cm)) << "\n";
            } catch (const std::exception& e) {
                throw std::runtime_error("cell " + tag + ": " + e.what());
            }
        }
    }
    const auto path = s.out_dir / "compare.csv";
    atomic_write_file(path, table);
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

} // namespace fedar
