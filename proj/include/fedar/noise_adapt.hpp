#pragma once

#include "fedar/dataset.hpp"
#include "fedar/model.hpp"

#include <cstddef>
#include <filesystem>
#include <limits>
#include <vector>

namespace fedar {

inline constexpr double kLabelDistFloor = 1e-6;

// Per-instance probability vectors over the classes, learned jointly with the
// model weights. Rows live on the open simplex (entries >= kLabelDistFloor).
struct LabelDistributions {
    std::vector<std::vector<double>> rows;
    std::size_t size() const { return rows.size(); }
};

// Row i = forward(params, x_i), floored and renormalized only when flooring
// actually clipped something, so confident rows stay bitwise at the model
// output and the update fixed point is exact.
LabelDistributions estimate_label_distributions(const ModelParams& params, const Dataset& ds);

// (1/N) sum_i KL(yd_i || forward(params, x_i))
double kl_loss(const LabelDistributions& yd, const ModelParams& params, const Dataset& ds);

// Entry (i,c) = (1/N) * (log(yd_ic / H_c(x_i)) + 1)
std::vector<std::vector<double>> kl_grad_yd(const LabelDistributions& yd, const ModelParams& params,
                                            const Dataset& ds);

// Tangent-space step: per row, subtract the row-mean of the gradient, step,
// then rescale the above-floor surplus so every entry keeps at least the
// floor and the row sums to one. A constant gradient row changes nothing.
LabelDistributions update_label_distributions(const LabelDistributions& yd,
                                              const std::vector<std::vector<double>>& grad,
                                              double eta);

struct AdaptiveOptions {
    FitOptions fit;      // step-3 fine-tuning
    FitOptions pretrain; // step-1 cross-entropy training
    bool skip_pretrain = false; // treat the incoming params as step-1 output
    // Rows at or past this index keep their given labels as (floored) one-hot
    // distributions throughout; used to anchor a trusted auxiliary block.
    std::size_t pin_onehot_from = std::numeric_limits<std::size_t>::max();
    double yd_eta = 0.1;
    double yd_tol = 1e-4;       // stabilized when max row change drops below
    std::size_t yd_max_iters = 200;
    std::size_t max_halvings = 10; // eta halvings allowed on a KL increase
};

struct AdaptiveResult {
    ModelParams params;
    LabelDistributions yd;
    std::size_t yd_iters = 0;
    double final_kl = 0.0;
};

// Three steps: cross-entropy pretraining, label-distribution estimation, then
// KL refinement of the distributions followed by soft-target fine-tuning.
AdaptiveResult adaptive_fit(ModelParams params, const Dataset& ds, const AdaptiveOptions& opt);

// Diagnostic CSV: instance index, given label, yd argmax, yd max probability.
void save_noise_audit(const LabelDistributions& yd, const Dataset& ds,
                      const std::filesystem::path& path);

} // namespace fedar
