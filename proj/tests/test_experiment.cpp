#include <doctest.h>

#include "fedar/experiment.hpp"
#include "fedar/io_util.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <string>

using namespace fedar;

namespace {

std::filesystem::path tmp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "fedar_experiment_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("config: parses values, comments, and whitespace") {
    const auto cfg = Config::parse_string(
        "# a comment\n"
        "  seed = 17 \n"
        "fed.rounds=5\n"
        "\n"
        "noise.fractions = 0, 0.1 ,0.3\n"
        "aux.noisy = true\n");
    CHECK(cfg.get_u64("seed", 0) == 17);
    CHECK(cfg.get_size("fed.rounds", 0) == 5);
    CHECK(cfg.get_double_list("noise.fractions", {}) == std::vector<double>{0, 0.1, 0.3});
    CHECK(cfg.get_bool("aux.noisy", false));
    CHECK(cfg.get_string("absent", "dflt") == "dflt");
    CHECK_FALSE(cfg.has("absent"));
}

TEST_CASE("config: malformed lines and values are rejected") {
    CHECK_THROWS(Config::parse_string("novalue\n"));
    CHECK_THROWS(Config::parse_string("= 3\n"));
    const auto cfg = Config::parse_string("x = abc\ny = maybe\n");
    CHECK_THROWS(cfg.get_double("x", 0));
    CHECK_THROWS(cfg.get_u64("x", 0));
    CHECK_THROWS(cfg.get_bool("y", false));
}

TEST_CASE("settings: unknown keys fail loudly") {
    CHECK_THROWS_WITH_AS(settings_from_config(Config::parse_string("fed.rouds = 30\n")),
                         doctest::Contains("fed.rouds"), std::invalid_argument);
}

TEST_CASE("settings: defaults mirror the benchmark and validation bites") {
    const auto s = settings_from_config(Config::parse_string(""));
    CHECK(s.synth_classes == 6);
    CHECK(s.train_fraction == 0.8);
    CHECK(s.aux_fraction == 0.2);
    CHECK(s.partition.num_clients == 10);
    CHECK(s.partition.alpha == 0.9);
    CHECK(s.partition.overlap == 0.2);
    CHECK(s.fed.rounds == 30);
    CHECK(s.fed.hyper.local_epochs == 50);
    CHECK(s.fed.hyper.learning_rate == 0.1);
    CHECK(s.fed.hyper.damping == 1e-3);
    CHECK(s.noise_fractions == std::vector<double>{0.0, 0.05, 0.1, 0.2, 0.3});
    CHECK(s.run_fedar);
    CHECK(s.run_fedarplus);
    CHECK(s.master_seed == 42);

    CHECK_THROWS(settings_from_config(Config::parse_string("split.train_fraction = 1.2\n")));
    CHECK_THROWS(settings_from_config(Config::parse_string("partition.mode = fancy\n")));
    CHECK_THROWS(settings_from_config(Config::parse_string("noise.fractions = 0.5, 1.0\n")));
    CHECK_THROWS(settings_from_config(Config::parse_string("variants = neither\n")));
    CHECK_THROWS(settings_from_config(Config::parse_string("fed.aggregation = median\n")));
    CHECK_THROWS(settings_from_config(Config::parse_string("fed.backend = resnet\n")));
    CHECK_THROWS(settings_from_config(
        Config::parse_string("data.dataset_file = a\ndata.trace_dir = b\n")));
}

TEST_CASE("settings: variant list controls the sweep") {
    auto s = settings_from_config(Config::parse_string("variants = fedar\n"));
    CHECK(s.run_fedar);
    CHECK_FALSE(s.run_fedarplus);
    s = settings_from_config(Config::parse_string("variants = fedar+\n"));
    CHECK_FALSE(s.run_fedar);
    CHECK(s.run_fedarplus);
    s = settings_from_config(Config::parse_string("variants = fedar, fedarplus\n"));
    CHECK(s.run_fedar);
    CHECK(s.run_fedarplus);
}

TEST_CASE("default profiles: palette clamp and distinct ripples") {
    const auto six = default_profiles(6);
    REQUIRE(six.size() == 6);
    std::set<std::string> names;
    std::set<std::pair<double, std::size_t>> ripples;
    for (const auto& p : six) {
        names.insert(p.name);
        ripples.insert({p.ripple_amp, p.ripple_period});
    }
    CHECK(names.size() == 6);
    CHECK(ripples.size() == 6);
    CHECK(default_profiles(3).size() == 3);
    CHECK(default_profiles(20).size() == 6);
    CHECK_THROWS(default_profiles(0));
}

TEST_CASE("synthetic dataset: noiseless build hits the generator counts") {
    SynthSpec spec;
    spec.profiles = default_profiles(3);
    spec.noise_sigma = 0.0;
    spec.duration = 1200;
    spec.seed = 5;
    const auto ds = build_synth_dataset(spec, 2, {}, {});
    CHECK(ds.num_classes() == 3);
    // 3 classes x 2 series x 15 pulses each
    CHECK(ds.size() == 3 * 2 * 15);
    std::vector<std::size_t> per_class(3, 0);
    for (const auto& inst : ds.instances) {
        REQUIRE(inst.features.size() == ds.instance_length);
        ++per_class[static_cast<std::size_t>(inst.label)];
    }
    for (auto n : per_class)
        CHECK(n == 30);
    CHECK(ds.instance_length >= 19); // longest pulse is at least min_pulse_len
    CHECK(ds.instance_length <= 32);
}

TEST_CASE("synthetic dataset: deterministic per seed") {
    SynthSpec spec;
    spec.profiles = default_profiles(2);
    spec.noise_sigma = 0.4;
    spec.duration = 900;
    spec.seed = 6;
    const auto a = build_synth_dataset(spec, 2, {}, {});
    const auto b = build_synth_dataset(spec, 2, {}, {});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.instances[i].features == b.instances[i].features);
        CHECK(a.instances[i].label == b.instances[i].label);
    }
}

TEST_CASE("prepare_data: shapes and client assembly") {
    ExperimentSettings s;
    s.synth_classes = 3;
    s.synth_series_per_class = 2;
    s.synth_sigma = 0.0;
    s.master_seed = 11;
    s.partition.num_clients = 5;
    const auto full = build_synth_dataset(
        [&] {
            SynthSpec sp;
            sp.profiles = default_profiles(3);
            sp.noise_sigma = 0;
            sp.duration = 1200;
            sp.seed = 11;
            return sp;
        }(),
        2, {}, {});
    const auto prep = prepare_data(full, s, false);
    CHECK(prep.train.size() == 72); // ceil(0.8 * 90)
    CHECK(prep.test.size() == 18);
    CHECK(prep.aux.size() == 14); // round(0.2 * 72)
    CHECK(prep.chunks.size() == 5);

    const auto clients = make_clients(prep, s, 0.3);
    REQUIRE(clients.size() == 5);
    for (std::size_t j = 0; j < clients.size(); ++j) {
        CHECK(clients[j].client_id == j);
        CHECK(clients[j].chunk_size == prep.chunks[j].size());
        CHECK(clients[j].local_data.size() == prep.chunks[j].size() + prep.aux.size());
        // auxiliary block appended clean
        for (std::size_t i = 0; i < prep.aux.size(); ++i) {
            const auto& got = clients[j].local_data.instances[clients[j].chunk_size + i];
            CHECK(got.label == prep.aux.instances[i].label);
            CHECK(got.features == prep.aux.instances[i].features);
        }
    }

    // same rho: flips agree across calls (seeds do not depend on the variant)
    const auto again = make_clients(prep, s, 0.3);
    for (std::size_t j = 0; j < clients.size(); ++j)
        for (std::size_t i = 0; i < clients[j].local_data.size(); ++i)
            CHECK(clients[j].local_data.instances[i].label ==
                  again[j].local_data.instances[i].label);
}

TEST_CASE("cmd_synth then cmd_extract reproduces the direct synthetic build") {
    const auto traces = tmp_dir("synth_traces");
    const auto extracted = tmp_dir("synth_extract");
    ExperimentSettings s;
    s.synth_classes = 2;
    s.synth_series_per_class = 2;
    s.synth_sigma = 0.0;
    s.synth_duration = 1200;
    s.master_seed = 21;
    s.out_dir = traces;
    CHECK(cmd_synth(s) == 0);

    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(traces))
        files += e.path().extension() == ".csv";
    CHECK(files == 4);

    ExperimentSettings e = s;
    e.trace_dir = traces;
    e.out_dir = extracted;
    CHECK(cmd_extract(e) == 0);
    const auto ds = load_dataset(extracted / "dataset.csv");
    const auto direct = build_synth_dataset(
        [&] {
            SynthSpec sp;
            sp.profiles = default_profiles(2);
            sp.noise_sigma = 0;
            sp.duration = 1200;
            sp.seed = 21;
            return sp;
        }(),
        2, {}, {});
    CHECK(ds.size() == direct.size());
    CHECK(ds.num_classes() == direct.num_classes());
}

TEST_CASE("cmd_extract: empty directory and bad names are rejected") {
    ExperimentSettings s;
    s.trace_dir = tmp_dir("empty_traces");
    s.out_dir = tmp_dir("empty_out");
    CHECK_THROWS(cmd_extract(s));

    const auto bad = tmp_dir("bad_names");
    atomic_write_file(bad / "noseparator.csv", "timestamp,watts\n0,1\n1,2\n");
    ExperimentSettings b;
    b.trace_dir = bad;
    b.out_dir = tmp_dir("bad_out");
    CHECK_THROWS(cmd_extract(b));
}

TEST_CASE("cmd_run: one-cell smoke emits every declared file deterministically") {
    ExperimentSettings base = settings_from_config(Config::parse_string(
        "synth.classes = 2\n"
        "synth.series_per_class = 2\n"
        "synth.sigma = 0\n"
        "partition.clients = 3\n"
        "noise.fractions = 0\n"
        "variants = fedar\n"
        "fed.rounds = 2\n"
        "fed.local_epochs = 2\n"
        "seed = 31\n"));
    const auto dir_a = tmp_dir("run_a");
    const auto dir_b = tmp_dir("run_b");
    for (const auto& dir : {dir_a, dir_b}) {
        ExperimentSettings s = base;
        s.out_dir = dir;
        CHECK(cmd_run(s) == 0);
        CHECK(std::filesystem::exists(dir / "summary.csv"));
        CHECK(std::filesystem::exists(dir / "rounds_rho0_fedar.csv"));
        CHECK(std::filesystem::exists(dir / "metrics_rho0_fedar.csv"));
    }
    for (const auto& name : {"summary.csv", "rounds_rho0_fedar.csv", "metrics_rho0_fedar.csv"})
        CHECK(read_file(dir_a / name) == read_file(dir_b / name));
}

TEST_CASE("cmd_compare: exactly four data cells") {
    ExperimentSettings s = settings_from_config(Config::parse_string(
        "synth.classes = 2\n"
        "synth.series_per_class = 2\n"
        "synth.sigma = 0\n"
        "partition.clients = 3\n"
        "fed.rounds = 2\n"
        "fed.local_epochs = 2\n"
        "seed = 33\n"));
    s.out_dir = tmp_dir("compare_out");
    CHECK(cmd_compare(s) == 0);
    const auto text = read_file(s.out_dir / "compare.csv");
    CHECK(text.rfind("partition,aggregation,accuracy,macro_f1\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    for (const char* cell : {"iid,mean,", "iid,fedavg,", "noniid,mean,", "noniid,fedavg,"})
        CHECK(text.find(cell) != std::string::npos);
}
