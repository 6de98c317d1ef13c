#include <doctest.h>

#include "fedar/fed.hpp"
#include "fedar/io_util.hpp"
#include "fedar/rng.hpp"

#include <filesystem>
#include <fstream>
#include <vector>

using namespace fedar;

namespace {

Dataset cluster_dataset(std::size_t n, std::size_t m, std::size_t classes, std::uint64_t seed) {
    Dataset ds;
    ds.instance_length = m;
    for (std::size_t c = 0; c < classes; ++c)
        ds.class_names.push_back("c" + std::to_string(c));
    auto rng = make_rng(seed);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (std::size_t i = 0; i < n; ++i) {
        Instance inst;
        inst.label = static_cast<int>(i % classes);
        for (std::size_t j = 0; j < m; ++j) {
            const double center = (j % classes == static_cast<std::size_t>(inst.label)) ? 2.0 : -1.0;
            inst.features.push_back(center + 0.4 * (unit() - 0.5));
        }
        ds.instances.push_back(std::move(inst));
    }
    return ds;
}

ModelParams params_with(std::vector<double> w, std::size_t m, std::size_t classes) {
    ModelParams p;
    p.backend = Backend::SoftmaxReg;
    p.shape.input_len = m;
    p.shape.num_classes = classes;
    p.weights = std::move(w);
    return p;
}

FedConfig small_cfg(std::size_t rounds, std::size_t epochs) {
    FedConfig cfg;
    cfg.rounds = rounds;
    cfg.hyper.local_epochs = epochs;
    cfg.seed = 99;
    return cfg;
}

} // namespace

TEST_CASE("mean aggregation: identical updates return bitwise identical params") {
    const auto p = init_params(Backend::SoftmaxReg, 3, 2, 5);
    const auto out = aggregate_mean({p, p, p});
    CHECK(out.weights == p.weights);
}

TEST_CASE("mean aggregation: elementwise average") {
    const auto a = params_with({0.0, 2.0}, 0, 1);
    const auto b = params_with({1.0, 4.0}, 0, 1);
    // zero-length input would be invalid elsewhere; shapes only need to agree here
    const auto out = aggregate_mean({a, b});
    CHECK(out.weights == std::vector<double>{0.5, 3.0});
}

TEST_CASE("fedavg: equal sizes reduce to the unweighted mean bit for bit") {
    const auto a = init_params(Backend::SoftmaxReg, 6, 3, 7);
    const auto b = init_params(Backend::SoftmaxReg, 6, 3, 8);
    const auto c = init_params(Backend::SoftmaxReg, 6, 3, 9);
    const auto mean = aggregate_mean({a, b, c});
    const auto avg = aggregate_fedavg({{a, 41}, {b, 41}, {c, 41}});
    CHECK(mean.weights == avg.weights);
}

TEST_CASE("fedavg: size weighting is exact for representable weights") {
    const auto a = params_with({1.0}, 0, 1);
    const auto b = params_with({5.0}, 0, 1);
    const auto out = aggregate_fedavg({{a, 1}, {b, 3}});
    CHECK(out.weights[0] == 0.25 * 1.0 + 0.75 * 5.0);
}

TEST_CASE("aggregation validation") {
    CHECK_THROWS(aggregate_mean({}));
    CHECK_THROWS(aggregate_fedavg({}));
    const auto a = init_params(Backend::SoftmaxReg, 3, 2, 1);
    const auto b = init_params(Backend::SoftmaxReg, 4, 2, 1);
    CHECK_THROWS(aggregate_mean({a, b}));
    CHECK_THROWS(aggregate_fedavg({{a, 0}}));
}

TEST_CASE("local update without noise handling equals plain fitting") {
    const auto ds = cluster_dataset(30, 4, 3, derive_seed(20, "lu"));
    const auto global = init_params(Backend::SoftmaxReg, 4, 3, 21);
    ClientState client;
    client.client_id = 0;
    client.local_data = ds;
    client.chunk_size = ds.size();
    FedConfig cfg = small_cfg(1, 4);
    const auto upd = local_update(client, global, cfg);
    FitOptions opt;
    opt.epochs = 4;
    const auto direct = fit_ce(global, ds, opt);
    CHECK(upd.weights == direct.weights);
    CHECK(client.params.weights == direct.weights);
    CHECK_FALSE(client.yd.has_value());
}

TEST_CASE("local update with noise handling records label distributions") {
    const auto ds = cluster_dataset(24, 4, 3, derive_seed(22, "lu+"));
    const auto global = init_params(Backend::SoftmaxReg, 4, 3, 23);
    ClientState client;
    client.client_id = 1;
    client.local_data = ds;
    client.chunk_size = 16;
    FedConfig cfg = small_cfg(1, 3);
    cfg.noise_handling = true;
    cfg.pin_auxiliary_onehot = true;
    local_update(client, global, cfg);
    REQUIRE(client.yd.has_value());
    CHECK(client.yd->size() == ds.size());
    for (std::size_t i = 16; i < ds.size(); ++i) {
        const auto truth = static_cast<std::size_t>(ds.instances[i].label);
        CHECK(client.yd->rows[i][truth] > 0.99); // pinned auxiliary block
    }
}

TEST_CASE("single client federation equals one long centralized fit") {
    const auto ds = cluster_dataset(36, 4, 3, derive_seed(24, "k1"));
    std::vector<ClientState> clients(1);
    clients[0].client_id = 0;
    clients[0].local_data = ds;
    clients[0].chunk_size = ds.size();
    FedConfig cfg = small_cfg(3, 2);
    const auto res = run_federation(clients, cfg, ds);

    FitOptions opt;
    opt.epochs = 6; // 3 rounds x 2 local epochs, continued from the same init
    const auto central = fit_ce(
        init_params(cfg.hyper.backend, 4, 3, derive_seed(cfg.seed, "init")), ds, opt);
    CHECK(res.params.weights == central.weights);
}

TEST_CASE("identical clients make federation equal centralized training bit for bit") {
    const auto ds = cluster_dataset(30, 4, 3, derive_seed(26, "same"));
    std::vector<ClientState> clients(4);
    for (std::size_t j = 0; j < clients.size(); ++j) {
        clients[j].client_id = j;
        clients[j].local_data = ds;
        clients[j].chunk_size = ds.size();
    }
    FedConfig cfg = small_cfg(5, 2);
    const auto res = run_federation(clients, cfg, ds);
    FitOptions opt;
    opt.epochs = 10;
    const auto central = fit_ce(
        init_params(cfg.hyper.backend, 4, 3, derive_seed(cfg.seed, "init")), ds, opt);
    CHECK(res.params.weights == central.weights);
}

TEST_CASE("client visit order is by id, not vector position") {
    const auto ds = cluster_dataset(40, 4, 2, derive_seed(28, "order"));
    auto chunks = std::vector<Dataset>{ds, ds};
    chunks[0].instances.resize(20);
    chunks[1].instances.erase(chunks[1].instances.begin(), chunks[1].instances.begin() + 20);

    auto build = [&](bool swapped) {
        std::vector<ClientState> clients(2);
        for (std::size_t j = 0; j < 2; ++j) {
            const std::size_t idx = swapped ? 1 - j : j;
            clients[j].client_id = idx;
            clients[j].local_data = chunks[idx];
            clients[j].chunk_size = chunks[idx].size();
        }
        return clients;
    };
    FedConfig cfg = small_cfg(2, 2);
    auto a = build(false);
    auto b = build(true);
    const auto ra = run_federation(a, cfg, ds);
    const auto rb = run_federation(b, cfg, ds);
    CHECK(ra.params.weights == rb.params.weights);
    CHECK(ra.logs.back().client_losses == rb.logs.back().client_losses);
}

TEST_CASE("round logs: shapes, gap floor, and csv layout") {
    const auto ds = cluster_dataset(30, 4, 3, derive_seed(30, "logs"));
    std::vector<ClientState> clients(3);
    for (std::size_t j = 0; j < 3; ++j) {
        clients[j].client_id = j;
        clients[j].local_data = ds;
        clients[j].chunk_size = ds.size();
    }
    FedConfig cfg = small_cfg(4, 2);
    const auto res = run_federation(clients, cfg, ds);
    REQUIRE(res.logs.size() == 4);
    double min_gap = 1e9;
    for (std::size_t t = 0; t < res.logs.size(); ++t) {
        CHECK(res.logs[t].round == t + 1);
        CHECK(res.logs[t].client_losses.size() == 3);
        CHECK(res.logs[t].gap >= 0.0);
        min_gap = std::min(min_gap, res.logs[t].gap);
        CHECK(res.logs[t].test_accuracy >= 0.0);
        CHECK(res.logs[t].test_accuracy <= 1.0);
    }
    CHECK(min_gap == 0.0);

    const auto dir = std::filesystem::temp_directory_path() / "fedar_fed_tests";
    std::filesystem::create_directories(dir);
    const auto path = dir / "rounds.csv";
    save_round_log_csv(res.logs, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "round,client_id,local_loss,global_loss,test_accuracy,test_f1,gap");
    std::size_t rows = 0, global_rows = 0;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        ++rows;
        if (line.find(",global,") != std::string::npos)
            ++global_rows;
    }
    CHECK(rows == 4 * (3 + 1));
    CHECK(global_rows == 4);
}

TEST_CASE("optimality gap: subtracts the run minimum") {
    std::vector<RoundLog> logs(3);
    logs[0].global_loss = 0.5;
    logs[1].global_loss = 0.2;
    logs[2].global_loss = 0.3;
    const auto gaps = optimality_gap(logs);
    CHECK(gaps == std::vector<double>{0.5 - 0.2, 0.0, 0.3 - 0.2});
    CHECK(optimality_gap({}).empty());
}

TEST_CASE("federation validation") {
    std::vector<ClientState> none;
    FedConfig cfg = small_cfg(1, 1);
    const auto ds = cluster_dataset(10, 4, 2, derive_seed(32, "val"));
    CHECK_THROWS(run_federation(none, cfg, ds));

    std::vector<ClientState> empty_client(1);
    empty_client[0].local_data.class_names = ds.class_names;
    empty_client[0].local_data.instance_length = 4;
    CHECK_THROWS(run_federation(empty_client, cfg, ds));

    std::vector<ClientState> ok(1);
    ok[0].local_data = ds;
    ok[0].chunk_size = ds.size();
    FedConfig zero = cfg;
    zero.rounds = 0;
    CHECK_THROWS(run_federation(ok, zero, ds));
}

TEST_CASE("failures carry round and client identity") {
    const auto ds = cluster_dataset(10, 4, 2, derive_seed(34, "err"));
    std::vector<ClientState> clients(2);
    clients[0].client_id = 0;
    clients[0].local_data = ds;
    clients[0].chunk_size = ds.size();
    clients[1].client_id = 7;
    clients[1].local_data = ds;
    clients[1].local_data.instances[0].features.pop_back(); // shape break inside training
    clients[1].chunk_size = ds.size();
    FedConfig cfg = small_cfg(1, 1);
    try {
        run_federation(clients, cfg, ds);
        FAIL("expected a throw");
    } catch (const std::exception& e) {
        const std::string msg = e.what();
        CHECK(msg.find("client 7") != std::string::npos);
        CHECK(msg.find("round 1") != std::string::npos);
    }
}
