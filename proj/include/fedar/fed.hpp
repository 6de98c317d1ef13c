#pragma once

#include "fedar/dataset.hpp"
#include "fedar/model.hpp"
#include "fedar/noise_adapt.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace fedar {

enum class Aggregation { Mean, FedAvg };

struct ClientState {
    std::size_t client_id = 0;
    Dataset local_data;          // own chunk first, auxiliary block appended
    std::size_t chunk_size = 0;  // instances before the auxiliary block
    ModelParams params;
    std::optional<LabelDistributions> yd; // present once noise handling has run
};

struct FedConfig {
    std::size_t rounds = 30;
    Aggregation aggregation = Aggregation::Mean;
    bool noise_handling = false;     // adaptive local updates when true
    bool retrain_each_round = false; // redo the full pretrain every round
    bool pin_auxiliary_onehot = false;
    std::size_t pretrain_epochs = 0; // 0 means hyper.local_epochs
    Hyperparams hyper;
    std::uint64_t seed = 0;
};

struct RoundLog {
    std::size_t round = 0;                // 1-based
    std::vector<std::size_t> client_ids;  // ascending
    std::vector<double> client_losses;    // post-update loss on each client's data
    double global_loss = 0.0;            // aggregated params on the pooled client data
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double test_precision = 0.0; // macro
    double test_recall = 0.0;
    double test_f1 = 0.0;
    double gap = 0.0; // global_loss minus the run's best global_loss
};

// Installs global_params on the client and trains for the configured local
// epochs; adaptive (label-distribution) training when noise_handling is set.
// Updates client.params (and client.yd) and returns the new params.
ModelParams local_update(ClientState& client, const ModelParams& global_params,
                         const FedConfig& cfg);

// Elementwise unweighted mean, reduced in index order.
ModelParams aggregate_mean(const std::vector<ModelParams>& updates);
// Size-weighted mean; with equal sizes the weights reduce to exactly 1/K.
ModelParams aggregate_fedavg(const std::vector<std::pair<ModelParams, std::size_t>>& updates);

struct FederationResult {
    ModelParams params;
    std::vector<RoundLog> logs;
};

// Seeded global init, then rounds of broadcast / local update / aggregate,
// evaluating on the test set after each aggregation. Clients are visited in
// client_id order; the whole run is deterministic per (cfg.seed, data).
FederationResult run_federation(std::vector<ClientState>& clients, const FedConfig& cfg,
                                const Dataset& test);

// gap_t = loss_t - min over the whole run
std::vector<double> optimality_gap(const std::vector<RoundLog>& logs);

// `round,client_id,local_loss,global_loss,test_accuracy,test_f1,gap`;
// one row per client plus a `global` row per round.
void save_round_log_csv(const std::vector<RoundLog>& logs, const std::filesystem::path& path);

} // namespace fedar
