#include "fedar/model.hpp"

#include "fedar/io_util.hpp"
#include "fedar/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedar {

namespace {

constexpr double kProbFloor = 1e-300; // keeps log(p) finite without renormalizing

std::size_t conv_feature_len(const ShapeMeta& s) {
    return s.pooling == Pooling::Flatten ? s.input_len * s.conv_channels : s.conv_channels;
}

struct ConvOffsets {
    std::size_t w1, b1, w2, b2, w3, b3, wd, bd, total;
};

ConvOffsets conv_offsets(const ShapeMeta& s) {
    const std::size_t ch = s.conv_channels;
    const std::size_t f = conv_feature_len(s);
    ConvOffsets o{};
    o.w1 = 0;
    o.b1 = o.w1 + ch;
    o.w2 = o.b1 + ch;
    o.b2 = o.w2 + ch * ch;
    o.w3 = o.b2 + ch;
    o.b3 = o.w3 + ch * ch;
    o.wd = o.b3 + ch;
    o.bd = o.wd + s.num_classes * f;
    o.total = o.bd + s.num_classes;
    return o;
}

void validate_params(const ModelParams& p) {
    if (p.shape.input_len == 0 || p.shape.num_classes == 0)
        throw std::invalid_argument("model shape not set");
    if (p.weights.size() != param_count(p.backend, p.shape))
        throw std::invalid_argument("weight vector does not match shape");
}

void validate_input(const ModelParams& p, const std::vector<double>& x) {
    if (x.size() != p.shape.input_len)
        throw std::invalid_argument("input length " + std::to_string(x.size()) +
                                    " does not match model input " +
                                    std::to_string(p.shape.input_len));
}

void validate_nonempty(const Dataset& ds, const ModelParams& p) {
    if (ds.instances.empty())
        throw std::invalid_argument("dataset is empty");
    if (ds.instance_length != p.shape.input_len)
        throw std::invalid_argument("dataset instance length does not match model");
    if (ds.num_classes() != p.shape.num_classes)
        throw std::invalid_argument("dataset class count does not match model");
    for (const auto& inst : ds.instances)
        validate_input(p, inst.features);
}

std::vector<double> softmax_reg_logits(const ModelParams& p, const std::vector<double>& x) {
    const std::size_t m = p.shape.input_len;
    const std::size_t c = p.shape.num_classes;
    std::vector<double> logits(c);
    for (std::size_t k = 0; k < c; ++k) {
        const double* row = p.weights.data() + k * (m + 1);
        double z = row[m]; // bias
        for (std::size_t i = 0; i < m; ++i)
            z += row[i] * x[i];
        logits[k] = z;
    }
    return logits;
}

// Forward activations of the conv backend, kept for backpropagation.
struct ConvTrace {
    // post-relu activations, position-major [t*ch + o]
    std::vector<double> h1, h2, h3;
    std::vector<double> feat;
    std::vector<double> logits;
};

ConvTrace conv_forward(const ModelParams& p, const std::vector<double>& x) {
    const ShapeMeta& s = p.shape;
    const std::size_t m = s.input_len, ch = s.conv_channels, c = s.num_classes;
    const ConvOffsets o = conv_offsets(s);
    const double* w = p.weights.data();

    ConvTrace tr;
    tr.h1.resize(m * ch);
    tr.h2.resize(m * ch);
    tr.h3.resize(m * ch);
    for (std::size_t t = 0; t < m; ++t)
        for (std::size_t a = 0; a < ch; ++a)
            tr.h1[t * ch + a] = std::max(0.0, w[o.w1 + a] * x[t] + w[o.b1 + a]);
    auto dense_layer = [&](const std::vector<double>& in, std::vector<double>& out,
                           std::size_t wofs, std::size_t bofs) {
        for (std::size_t t = 0; t < m; ++t) {
            const double* src = in.data() + t * ch;
            double* dst = out.data() + t * ch;
            for (std::size_t a = 0; a < ch; ++a) {
                const double* row = w + wofs + a * ch;
                double z = w[bofs + a];
                for (std::size_t b = 0; b < ch; ++b)
                    z += row[b] * src[b];
                dst[a] = std::max(0.0, z);
            }
        }
    };
    dense_layer(tr.h1, tr.h2, o.w2, o.b2);
    dense_layer(tr.h2, tr.h3, o.w3, o.b3);

    const std::size_t f = conv_feature_len(s);
    if (s.pooling == Pooling::Flatten) {
        tr.feat = tr.h3;
    } else {
        tr.feat.assign(ch, 0.0);
        for (std::size_t t = 0; t < m; ++t)
            for (std::size_t a = 0; a < ch; ++a)
                tr.feat[a] += tr.h3[t * ch + a];
        for (auto& v : tr.feat)
            v /= static_cast<double>(m);
    }
    tr.logits.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        const double* row = w + o.wd + k * f;
        double z = w[o.bd + k];
        for (std::size_t i = 0; i < f; ++i)
            z += row[i] * tr.feat[i];
        tr.logits[k] = z;
    }
    return tr;
}

// Backpropagates d(logits) into the flat gradient buffer. `accumulate` adds
// raw per-instance contributions; callers divide by N.
void conv_backward(const ModelParams& p, const std::vector<double>& x, const ConvTrace& tr,
                   const std::vector<double>& dlogits, double* grad) {
    const ShapeMeta& s = p.shape;
    const std::size_t m = s.input_len, ch = s.conv_channels, c = s.num_classes;
    const std::size_t f = conv_feature_len(s);
    const ConvOffsets o = conv_offsets(s);
    const double* w = p.weights.data();

    std::vector<double> dfeat(f, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
        const double dz = dlogits[k];
        grad[o.bd + k] += dz;
        double* grow = grad + o.wd + k * f;
        const double* row = w + o.wd + k * f;
        for (std::size_t i = 0; i < f; ++i) {
            grow[i] += dz * tr.feat[i];
            dfeat[i] += dz * row[i];
        }
    }

    std::vector<double> dh3(m * ch);
    if (s.pooling == Pooling::Flatten) {
        dh3 = dfeat;
    } else {
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t t = 0; t < m; ++t)
            for (std::size_t a = 0; a < ch; ++a)
                dh3[t * ch + a] = dfeat[a] * inv;
    }

    auto dense_back = [&](const std::vector<double>& out_act, const std::vector<double>& in_act,
                          std::vector<double>& dout, std::vector<double>& din, std::size_t wofs,
                          std::size_t bofs) {
        din.assign(m * ch, 0.0);
        for (std::size_t t = 0; t < m; ++t) {
            const double* in = in_act.data() + t * ch;
            double* dsrc = din.data() + t * ch;
            for (std::size_t a = 0; a < ch; ++a) {
                if (out_act[t * ch + a] <= 0.0)
                    continue; // relu gate
                const double dz = dout[t * ch + a];
                grad[bofs + a] += dz;
                double* grow = grad + wofs + a * ch;
                const double* row = w + wofs + a * ch;
                for (std::size_t b = 0; b < ch; ++b) {
                    grow[b] += dz * in[b];
                    dsrc[b] += dz * row[b];
                }
            }
        }
    };
    std::vector<double> dh2, dh1;
    dense_back(tr.h3, tr.h2, dh3, dh2, o.w3, o.b3);
    dense_back(tr.h2, tr.h1, dh2, dh1, o.w2, o.b2);
    for (std::size_t t = 0; t < m; ++t)
        for (std::size_t a = 0; a < ch; ++a) {
            if (tr.h1[t * ch + a] <= 0.0)
                continue;
            const double dz = dh1[t * ch + a];
            grad[o.b1 + a] += dz;
            grad[o.w1 + a] += dz * x[t];
        }
}

std::vector<double> instance_logits(const ModelParams& p, const std::vector<double>& x) {
    return p.backend == Backend::SoftmaxReg ? softmax_reg_logits(p, x) : conv_forward(p, x).logits;
}

double uniform_pm(std::mt19937_64& rng, double half_width) {
    // 53-bit mantissa draw in [0,1); fixed bit recipe, no library distribution
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return -half_width + 2.0 * half_width * u;
}

} // namespace

std::size_t param_count(Backend backend, const ShapeMeta& shape) {
    if (backend == Backend::SoftmaxReg)
        return shape.num_classes * (shape.input_len + 1);
    return conv_offsets(shape).total;
}

ModelParams init_params(Backend backend, std::size_t input_len, std::size_t num_classes,
                        std::uint64_t seed, std::size_t conv_channels) {
    if (input_len == 0 || num_classes == 0)
        throw std::invalid_argument("model dimensions must be positive");
    ModelParams p;
    p.backend = backend;
    p.shape.input_len = input_len;
    p.shape.num_classes = num_classes;
    p.shape.conv_channels = conv_channels;
    p.shape.pooling = input_len <= 64 ? Pooling::Flatten : Pooling::GlobalAvg;
    p.weights.resize(param_count(backend, p.shape));
    auto rng = make_rng(seed);
    for (auto& w : p.weights)
        w = uniform_pm(rng, 0.05);
    return p;
}

Probabilities softmax(const std::vector<double>& logits) {
    if (logits.empty())
        throw std::invalid_argument("softmax of empty vector");
    for (double z : logits)
        if (!std::isfinite(z))
            throw std::invalid_argument("softmax input not finite");
    const double zmax = *std::max_element(logits.begin(), logits.end());
    Probabilities out;
    out.values.resize(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.values[i] = std::exp(logits[i] - zmax);
        sum += out.values[i];
    }
    for (auto& v : out.values)
        v = std::max(v / sum, kProbFloor);
    return out;
}

Probabilities forward(const ModelParams& p, const std::vector<double>& x) {
    validate_params(p);
    validate_input(p, x);
    return softmax(instance_logits(p, x));
}

int predict(const ModelParams& p, const std::vector<double>& x) {
    const auto probs = forward(p, x).values;
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best])
            best = i;
    return static_cast<int>(best);
}

double ce_loss(const ModelParams& p, const Dataset& ds) {
    validate_params(p);
    validate_nonempty(ds, p);
    double sum = 0.0;
    for (const auto& inst : ds.instances) {
        const auto probs = softmax(instance_logits(p, inst.features)).values;
        sum -= std::log(probs[static_cast<std::size_t>(inst.label)]);
    }
    return sum / static_cast<double>(ds.size());
}

double soft_ce_loss(const ModelParams& p, const Dataset& ds,
                    const std::vector<std::vector<double>>& targets) {
    validate_params(p);
    validate_nonempty(ds, p);
    if (targets.size() != ds.size())
        throw std::invalid_argument("target rows do not match dataset");
    double sum = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (targets[i].size() != p.shape.num_classes)
            throw std::invalid_argument("target row width does not match class count");
        const auto probs = softmax(instance_logits(p, ds.instances[i].features)).values;
        for (std::size_t c = 0; c < probs.size(); ++c)
            sum -= targets[i][c] * std::log(probs[c]);
    }
    return sum / static_cast<double>(ds.size());
}

namespace {

// Shared CE gradient: target row = one-hot(label) or a soft distribution.
std::vector<double> ce_gradient_impl(const ModelParams& p, const Dataset& ds,
                                     const std::vector<std::vector<double>>* targets) {
    const std::size_t m = p.shape.input_len;
    const std::size_t c = p.shape.num_classes;
    std::vector<double> grad(p.weights.size(), 0.0);
    std::vector<double> dlogits(c);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& x = ds.instances[i].features;
        if (p.backend == Backend::SoftmaxReg) {
            const auto probs = softmax(softmax_reg_logits(p, x)).values;
            for (std::size_t k = 0; k < c; ++k)
                dlogits[k] = probs[k];
            if (targets)
                for (std::size_t k = 0; k < c; ++k)
                    dlogits[k] -= (*targets)[i][k];
            else
                dlogits[static_cast<std::size_t>(ds.instances[i].label)] -= 1.0;
            for (std::size_t k = 0; k < c; ++k) {
                double* row = grad.data() + k * (m + 1);
                const double d = dlogits[k];
                for (std::size_t j = 0; j < m; ++j)
                    row[j] += d * x[j];
                row[m] += d;
            }
        } else {
            const ConvTrace tr = conv_forward(p, x);
            const auto probs = softmax(tr.logits).values;
            for (std::size_t k = 0; k < c; ++k)
                dlogits[k] = probs[k];
            if (targets)
                for (std::size_t k = 0; k < c; ++k)
                    dlogits[k] -= (*targets)[i][k];
            else
                dlogits[static_cast<std::size_t>(ds.instances[i].label)] -= 1.0;
            conv_backward(p, x, tr, dlogits, grad.data());
        }
    }
    const double inv = 1.0 / static_cast<double>(ds.size());
    for (auto& g : grad)
        g *= inv;
    return grad;
}

} // namespace

std::vector<double> ce_gradient(const ModelParams& p, const Dataset& ds) {
    validate_params(p);
    validate_nonempty(ds, p);
    return ce_gradient_impl(p, ds, nullptr);
}

std::vector<double> soft_ce_gradient(const ModelParams& p, const Dataset& ds,
                                     const std::vector<std::vector<double>>& targets) {
    validate_params(p);
    validate_nonempty(ds, p);
    if (targets.size() != ds.size())
        throw std::invalid_argument("target rows do not match dataset");
    for (const auto& t : targets)
        if (t.size() != p.shape.num_classes)
            throw std::invalid_argument("target row width does not match class count");
    return ce_gradient_impl(p, ds, &targets);
}

Curvature ce_hessian(const ModelParams& p, const Dataset& ds, std::size_t dense_cap) {
    validate_params(p);
    validate_nonempty(ds, p);
    const std::size_t dim = p.weights.size();
    Curvature h;
    h.dim = dim;

    if (p.backend == Backend::SoftmaxReg) {
        if (dim > dense_cap)
            throw std::invalid_argument("dense Hessian of " + std::to_string(dim) +
                                        " parameters exceeds cap " + std::to_string(dense_cap));
        const std::size_t m = p.shape.input_len;
        const std::size_t c = p.shape.num_classes;
        const std::size_t d = m + 1;
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                  static_cast<Eigen::Index>(dim));
        Eigen::VectorXd a(static_cast<Eigen::Index>(d));
        Eigen::MatrixXd outer(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (const auto& inst : ds.instances) {
            const auto probs = softmax(softmax_reg_logits(p, inst.features)).values;
            for (std::size_t j = 0; j < m; ++j)
                a[static_cast<Eigen::Index>(j)] = inst.features[j];
            a[static_cast<Eigen::Index>(m)] = 1.0;
            outer.noalias() = a * a.transpose();
            for (std::size_t r = 0; r < c; ++r) {
                for (std::size_t s = r; s < c; ++s) {
                    const double lam = r == s ? probs[r] * (1.0 - probs[r]) : -probs[r] * probs[s];
                    H.block(static_cast<Eigen::Index>(r * d), static_cast<Eigen::Index>(s * d),
                            static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))
                        .noalias() += lam * outer;
                }
            }
        }
        // mirror the strictly-upper blocks; each block is itself symmetric
        for (std::size_t r = 0; r < c; ++r)
            for (std::size_t s = r + 1; s < c; ++s)
                H.block(static_cast<Eigen::Index>(s * d), static_cast<Eigen::Index>(r * d),
                        static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) =
                    H.block(static_cast<Eigen::Index>(r * d), static_cast<Eigen::Index>(s * d),
                            static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        H /= static_cast<double>(ds.size());
        h.is_diagonal = false;
        h.values.assign(H.data(), H.data() + dim * dim);
        return h;
    }

    // Diagonal Gauss-Newton: sum over classes of squared Jacobian rows seeded
    // with M = diag(sqrt(p)) (I - 1 p^T), since M^T M = diag(p) - p p^T.
    h.is_diagonal = true;
    h.values.assign(dim, 0.0);
    const std::size_t c = p.shape.num_classes;
    std::vector<double> seed(c);
    std::vector<double> row(dim);
    for (const auto& inst : ds.instances) {
        const ConvTrace tr = conv_forward(p, inst.features);
        const auto probs = softmax(tr.logits).values;
        for (std::size_t r = 0; r < c; ++r) {
            const double sq = std::sqrt(probs[r]);
            for (std::size_t s = 0; s < c; ++s)
                seed[s] = sq * ((r == s ? 1.0 : 0.0) - probs[s]);
            std::fill(row.begin(), row.end(), 0.0);
            conv_backward(p, inst.features, tr, seed, row.data());
            for (std::size_t j = 0; j < dim; ++j)
                h.values[j] += row[j] * row[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(ds.size());
    for (auto& v : h.values)
        v *= inv;
    return h;
}

std::vector<double> damped_solve(const Curvature& H, const std::vector<double>& g, double lambda) {
    if (g.size() != H.dim)
        throw std::invalid_argument("gradient does not match curvature dimension");
    if (lambda < 0.0)
        throw std::invalid_argument("damping must be non-negative");

    double lam = lambda;
    for (int attempt = 0; attempt <= 8; ++attempt, lam = std::max(10.0 * lam, 1e-4)) {
        if (H.is_diagonal) {
            bool ok = true;
            std::vector<double> d(H.dim);
            for (std::size_t i = 0; i < H.dim; ++i) {
                const double denom = H.values[i] + lam;
                if (!(denom > 0.0)) {
                    ok = false;
                    break;
                }
                d[i] = g[i] / denom;
            }
            if (ok)
                return d;
        } else {
            const auto n = static_cast<Eigen::Index>(H.dim);
            Eigen::Map<const Eigen::MatrixXd> Hm(H.values.data(), n, n);
            Eigen::MatrixXd A = Hm;
            A.diagonal().array() += lam;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() == Eigen::Success) {
                Eigen::Map<const Eigen::VectorXd> gv(g.data(), n);
                Eigen::VectorXd d = llt.solve(gv);
                return std::vector<double>(d.data(), d.data() + H.dim);
            }
        }
    }
    throw std::runtime_error("curvature solve failed after 8 damping escalations");
}

ModelParams newton_step(const ModelParams& params, const std::vector<double>& g,
                        const Curvature& H, double eta, double lambda) {
    validate_params(params);
    if (params.weights.size() != H.dim)
        throw std::invalid_argument("params do not match curvature dimension");
    const auto d = damped_solve(H, g, lambda);
    ModelParams out = params;
    for (std::size_t i = 0; i < out.weights.size(); ++i)
        out.weights[i] -= eta * d[i];
    return out;
}

namespace {

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::abs(x));
    return m;
}

ModelParams fit_impl(ModelParams params, const Dataset& ds,
                     const std::vector<std::vector<double>>* targets, const FitOptions& opt) {
    if (!(opt.eta > 0.0))
        throw std::invalid_argument("learning rate must be positive");
    if (opt.epochs < 1)
        throw std::invalid_argument("epochs must be >= 1");
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        const auto g = targets ? soft_ce_gradient(params, ds, *targets) : ce_gradient(params, ds);
        if (opt.grad_tol > 0.0 && inf_norm(g) < opt.grad_tol)
            break;
        if (opt.optimizer == Optimizer::Newton) {
            const auto H = ce_hessian(params, ds, opt.dense_cap);
            params = newton_step(params, g, H, opt.eta, opt.damping);
        } else {
            for (std::size_t i = 0; i < params.weights.size(); ++i)
                params.weights[i] -= opt.eta * g[i];
        }
    }
    return params;
}

} // namespace

ModelParams fit_ce(ModelParams params, const Dataset& ds, const FitOptions& opt) {
    validate_params(params);
    validate_nonempty(ds, params);
    return fit_impl(std::move(params), ds, nullptr, opt);
}

ModelParams fit_soft(ModelParams params, const Dataset& ds,
                     const std::vector<std::vector<double>>& targets, const FitOptions& opt) {
    validate_params(params);
    validate_nonempty(ds, params);
    if (targets.size() != ds.size())
        throw std::invalid_argument("target rows do not match dataset");
    return fit_impl(std::move(params), ds, &targets, opt);
}

void save_checkpoint(const ModelParams& p, const std::filesystem::path& path) {
    validate_params(p);
    std::string out = "fedar-checkpoint 1\n";
    out += std::string("backend ") + (p.backend == Backend::SoftmaxReg ? "softmax_reg" : "tiny_conv") + '\n';
    out += "input_len " + std::to_string(p.shape.input_len) + '\n';
    out += "num_classes " + std::to_string(p.shape.num_classes) + '\n';
    out += "conv_channels " + std::to_string(p.shape.conv_channels) + '\n';
    out += std::string("pooling ") + (p.shape.pooling == Pooling::Flatten ? "flatten" : "gap") + '\n';
    out += "weights " + std::to_string(p.weights.size()) + '\n';
    char buf[48];
    for (double w : p.weights) {
        std::snprintf(buf, sizeof(buf), "%a\n", w);
        out += buf;
    }
    atomic_write_file(path, out);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open checkpoint: " + path.string());
    auto expect = [&](const std::string& key) {
        std::string k;
        if (!(in >> k) || k != key)
            throw std::runtime_error(path.string() + ": expected '" + key + "'");
    };
    expect("fedar-checkpoint");
    int version = 0;
    in >> version;
    if (version != 1)
        throw std::runtime_error(path.string() + ": unsupported checkpoint version");

    ModelParams p;
    std::string word;
    expect("backend");
    in >> word;
    if (word == "softmax_reg")
        p.backend = Backend::SoftmaxReg;
    else if (word == "tiny_conv")
        p.backend = Backend::TinyConv;
    else
        throw std::runtime_error(path.string() + ": unknown backend '" + word + "'");
    expect("input_len");
    in >> p.shape.input_len;
    expect("num_classes");
    in >> p.shape.num_classes;
    expect("conv_channels");
    in >> p.shape.conv_channels;
    expect("pooling");
    in >> word;
    if (word == "flatten")
        p.shape.pooling = Pooling::Flatten;
    else if (word == "gap")
        p.shape.pooling = Pooling::GlobalAvg;
    else
        throw std::runtime_error(path.string() + ": unknown pooling '" + word + "'");
    expect("weights");
    std::size_t n = 0;
    in >> n;
    if (!in)
        throw std::runtime_error(path.string() + ": truncated header");
    p.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> word))
            throw std::runtime_error(path.string() + ": truncated weights");
        char* end = nullptr;
        p.weights[i] = std::strtod(word.c_str(), &end);
        if (end == word.c_str() || *end != '\0')
            throw std::runtime_error(path.string() + ": bad weight '" + word + "'");
    }
    validate_params(p);
    return p;
}

} // namespace fedar
