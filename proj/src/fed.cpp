#include "fedar/fed.hpp"

#include "fedar/io_util.hpp"
#include "fedar/metrics.hpp"
#include "fedar/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fedar {

namespace {

FitOptions fit_options(const Hyperparams& h) {
    FitOptions opt;
    opt.optimizer = h.optimizer;
    opt.eta = h.learning_rate;
    opt.epochs = h.local_epochs;
    opt.damping = h.damping;
    opt.dense_cap = h.dense_hessian_cap;
    opt.grad_tol = h.grad_tol;
    return opt;
}

void check_shapes(const std::vector<ModelParams>& updates) {
    if (updates.empty())
        throw std::invalid_argument("nothing to aggregate");
    for (const auto& u : updates)
        if (u.weights.size() != updates.front().weights.size() ||
            u.backend != updates.front().backend)
            throw std::invalid_argument("aggregation requires identical model shapes");
}

ModelParams weighted_sum(const std::vector<const ModelParams*>& updates,
                         const std::vector<double>& weights) {
    // identical inputs aggregate to themselves, bit for bit
    bool all_equal = true;
    for (std::size_t j = 1; j < updates.size() && all_equal; ++j)
        all_equal = updates[j]->weights == updates.front()->weights;
    if (all_equal)
        return *updates.front();

    ModelParams out = *updates.front();
    for (auto& w : out.weights)
        w = 0.0;
    for (std::size_t j = 0; j < updates.size(); ++j)
        for (std::size_t i = 0; i < out.weights.size(); ++i)
            out.weights[i] += weights[j] * updates[j]->weights[i];
    return out;
}

} // namespace

ModelParams aggregate_mean(const std::vector<ModelParams>& updates) {
    check_shapes(updates);
    std::vector<const ModelParams*> ptrs;
    for (const auto& u : updates)
        ptrs.push_back(&u);
    const std::vector<double> w(updates.size(), 1.0 / static_cast<double>(updates.size()));
    return weighted_sum(ptrs, w);
}

ModelParams aggregate_fedavg(const std::vector<std::pair<ModelParams, std::size_t>>& updates) {
    if (updates.empty())
        throw std::invalid_argument("nothing to aggregate");
    std::vector<ModelParams> shapes;
    std::vector<const ModelParams*> ptrs;
    std::size_t total = 0;
    for (const auto& [params, n] : updates) {
        if (n == 0)
            throw std::invalid_argument("client reported zero instances");
        ptrs.push_back(&params);
        total += n;
    }
    for (const auto& [params, n] : updates)
        if (params.weights.size() != ptrs.front()->weights.size() ||
            params.backend != ptrs.front()->backend)
            throw std::invalid_argument("aggregation requires identical model shapes");
    std::vector<double> w;
    for (const auto& [params, n] : updates)
        w.push_back(static_cast<double>(n) / static_cast<double>(total));
    return weighted_sum(ptrs, w);
}

ModelParams local_update(ClientState& client, const ModelParams& global_params,
                         const FedConfig& cfg) {
    client.params = global_params;
    if (!cfg.noise_handling) {
        client.params = fit_ce(std::move(client.params), client.local_data,
                               fit_options(cfg.hyper));
    } else {
        AdaptiveOptions opt;
        opt.fit = fit_options(cfg.hyper);
        opt.pretrain = opt.fit;
        if (cfg.pretrain_epochs > 0)
            opt.pretrain.epochs = cfg.pretrain_epochs;
        opt.skip_pretrain = client.yd.has_value() && !cfg.retrain_each_round;
        if (cfg.pin_auxiliary_onehot)
            opt.pin_onehot_from = client.chunk_size;
        auto res = adaptive_fit(std::move(client.params), client.local_data, opt);
        client.params = std::move(res.params);
        client.yd = std::move(res.yd);
    }
    return client.params;
}

FederationResult run_federation(std::vector<ClientState>& clients, const FedConfig& cfg,
                                const Dataset& test) {
    if (clients.empty())
        throw std::invalid_argument("no clients");
    if (cfg.rounds == 0)
        throw std::invalid_argument("rounds must be >= 1");
    for (const auto& c : clients) {
        if (c.local_data.instances.empty())
            throw std::invalid_argument("client " + std::to_string(c.client_id) +
                                        " has no data");
        if (c.local_data.instance_length != clients.front().local_data.instance_length ||
            c.local_data.num_classes() != clients.front().local_data.num_classes())
            throw std::invalid_argument("clients disagree on data shape");
    }

    std::vector<ClientState*> order;
    for (auto& c : clients)
        order.push_back(&c);
    std::sort(order.begin(), order.end(),
              [](const ClientState* a, const ClientState* b) { return a->client_id < b->client_id; });

    Dataset pooled = clients.front().local_data;
    pooled.instances.clear();
    for (const auto* c : order)
        pooled.instances.insert(pooled.instances.end(), c->local_data.instances.begin(),
                                c->local_data.instances.end());

    const std::size_t m = pooled.instance_length;
    const std::size_t num_classes = pooled.num_classes();
    ModelParams global = init_params(cfg.hyper.backend, m, num_classes,
                                     derive_seed(cfg.seed, "init"), cfg.hyper.conv_channels);

    FederationResult result;
    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        std::vector<ModelParams> updates;
        std::vector<std::pair<ModelParams, std::size_t>> weighted;
        RoundLog log;
        log.round = round;
        for (auto* client : order) {
            ModelParams upd;
            try {
                upd = local_update(*client, global, cfg);
            } catch (const std::exception& e) {
                throw std::runtime_error("round " + std::to_string(round) + ", client " +
                                         std::to_string(client->client_id) + ": " + e.what());
            }
            log.client_ids.push_back(client->client_id);
            log.client_losses.push_back(ce_loss(upd, client->local_data));
            weighted.emplace_back(upd, client->local_data.size());
            updates.push_back(std::move(upd));
        }
        global = cfg.aggregation == Aggregation::Mean ? aggregate_mean(updates)
                                                      : aggregate_fedavg(weighted);

        log.global_loss = ce_loss(global, pooled);
        ConfusionMatrix train_cm = evaluate(global, pooled);
        log.train_accuracy = accuracy(train_cm);
        ConfusionMatrix test_cm = evaluate(global, test);
        log.test_accuracy = accuracy(test_cm);
        const auto mac = macro_average(test_cm);
        log.test_precision = mac.precision;
        log.test_recall = mac.recall;
        log.test_f1 = mac.f1;
        result.logs.push_back(std::move(log));
    }

    const auto gaps = optimality_gap(result.logs);
    for (std::size_t t = 0; t < gaps.size(); ++t)
        result.logs[t].gap = gaps[t];
    result.params = std::move(global);
    return result;
}

std::vector<double> optimality_gap(const std::vector<RoundLog>& logs) {
    if (logs.empty())
        return {};
    double best = logs.front().global_loss;
    for (const auto& l : logs)
        best = std::min(best, l.global_loss);
    std::vector<double> gaps;
    gaps.reserve(logs.size());
    for (const auto& l : logs)
        gaps.push_back(l.global_loss - best);
    return gaps;
}

void save_round_log_csv(const std::vector<RoundLog>& logs, const std::filesystem::path& path) {
    std::string out = "round,client_id,local_loss,global_loss,test_accuracy,test_f1,gap\n";
    for (const auto& l : logs) {
        for (std::size_t j = 0; j < l.client_losses.size(); ++j)
            out += std::to_string(l.round) + ',' +
                   std::to_string(j < l.client_ids.size() ? l.client_ids[j] : j) + ',' +
                   format_g9(l.client_losses[j]) + ",,,,\n";
        out += std::to_string(l.round) + ",global,," + format_g9(l.global_loss) + ',' +
               format_g9(l.test_accuracy) + ',' + format_g9(l.test_f1) + ',' + format_g9(l.gap) +
               '\n';
    }
    atomic_write_file(path, out);
}

} // namespace fedar
