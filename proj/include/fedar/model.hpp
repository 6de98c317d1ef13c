#pragma once

#include "fedar/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fedar {

enum class Backend { SoftmaxReg, TinyConv };
enum class Optimizer { Newton, Sgd };
enum class Pooling { Flatten, GlobalAvg };

struct ShapeMeta {
    std::size_t input_len = 0;   // m
    std::size_t num_classes = 0; // C
    // TinyConv only: three pointwise conv layers of conv_channels each,
    // flattened (m <= 64) or average-pooled into the dense head.
    std::size_t conv_channels = 128;
    Pooling pooling = Pooling::Flatten;
};

struct ModelParams {
    Backend backend = Backend::SoftmaxReg;
    ShapeMeta shape;
    std::vector<double> weights; // flat, layout fixed per backend
};

std::size_t param_count(Backend backend, const ShapeMeta& shape);

// Seeded uniform init in [-0.05, 0.05]. Pooling picked by input length
// unless overridden.
ModelParams init_params(Backend backend, std::size_t input_len, std::size_t num_classes,
                        std::uint64_t seed, std::size_t conv_channels = 128);

struct Hyperparams {
    double learning_rate = 0.1;
    std::size_t local_epochs = 50;
    double damping = 1e-3; // lambda added to the curvature before solving
    Backend backend = Backend::SoftmaxReg;
    std::size_t conv_channels = 128;
    Optimizer optimizer = Optimizer::Newton;
    std::size_t dense_hessian_cap = 20000;
    double grad_tol = 0.0; // > 0 stops local epochs early once ||g||_inf falls below
};

struct Probabilities {
    std::vector<double> values; // strictly positive, sums to 1 within 1e-9
};

// Dense symmetric curvature for SoftmaxReg, diagonal Gauss-Newton for
// TinyConv. Damping is applied at solve time, not stored.
struct Curvature {
    std::size_t dim = 0;
    bool is_diagonal = false;
    std::vector<double> values; // row-major dim*dim, or dim entries if diagonal
};

Probabilities softmax(const std::vector<double>& logits);
Probabilities forward(const ModelParams& params, const std::vector<double>& x);
int predict(const ModelParams& params, const std::vector<double>& x); // argmax, lowest index wins ties

double ce_loss(const ModelParams& params, const Dataset& ds);
std::vector<double> ce_gradient(const ModelParams& params, const Dataset& ds);
Curvature ce_hessian(const ModelParams& params, const Dataset& ds, std::size_t dense_cap = 20000);

// Cross-entropy against per-instance probability targets instead of one-hot
// labels; targets[i] has one entry per class. The curvature is target-free,
// so ce_hessian serves both.
double soft_ce_loss(const ModelParams& params, const Dataset& ds,
                    const std::vector<std::vector<double>>& targets);
std::vector<double> soft_ce_gradient(const ModelParams& params, const Dataset& ds,
                                     const std::vector<std::vector<double>>& targets);

// Solves (H + lambda*I) d = g without forming an inverse; Cholesky for dense,
// elementwise for diagonal. On factorization failure retries with
// lambda <- max(10*lambda, 1e-4), at most 8 escalations.
std::vector<double> damped_solve(const Curvature& H, const std::vector<double>& g, double lambda);

// theta <- theta - eta * (H + lambda*I)^{-1} g
ModelParams newton_step(const ModelParams& params, const std::vector<double>& g, const Curvature& H,
                        double eta, double lambda);

struct FitOptions {
    Optimizer optimizer = Optimizer::Newton;
    double eta = 0.1;
    std::size_t epochs = 50;
    double damping = 1e-3;
    std::size_t dense_cap = 20000;
    double grad_tol = 0.0; // > 0 stops epochs early once ||g||_inf falls below
};

// Full-batch training: one gradient (or Newton) step per epoch.
ModelParams fit_ce(ModelParams params, const Dataset& ds, const FitOptions& opt);
ModelParams fit_soft(ModelParams params, const Dataset& ds,
                     const std::vector<std::vector<double>>& targets, const FitOptions& opt);

// Text checkpoint with hexfloat weights; round-trips bit-exactly.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

} // namespace fedar
