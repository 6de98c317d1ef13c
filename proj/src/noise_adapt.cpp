#include "fedar/noise_adapt.hpp"

#include "fedar/io_util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedar {

namespace {

void validate_rows(const LabelDistributions& yd, const Dataset& ds, std::size_t num_classes) {
    if (yd.size() != ds.size())
        throw std::invalid_argument("label distribution rows do not match dataset");
    for (const auto& row : yd.rows)
        if (row.size() != num_classes)
            throw std::invalid_argument("label distribution row width does not match class count");
}

std::vector<std::vector<double>> forward_rows(const ModelParams& params, const Dataset& ds) {
    std::vector<std::vector<double>> h;
    h.reserve(ds.size());
    for (const auto& inst : ds.instances)
        h.push_back(forward(params, inst.features).values);
    return h;
}

double kl_from(const LabelDistributions& yd, const std::vector<std::vector<double>>& h) {
    double sum = 0.0;
    for (std::size_t i = 0; i < yd.size(); ++i)
        for (std::size_t c = 0; c < yd.rows[i].size(); ++c)
            sum += yd.rows[i][c] * std::log(yd.rows[i][c] / h[i][c]);
    return sum / static_cast<double>(yd.size());
}

std::vector<std::vector<double>> grad_from(const LabelDistributions& yd,
                                           const std::vector<std::vector<double>>& h) {
    const double inv = 1.0 / static_cast<double>(yd.size());
    std::vector<std::vector<double>> g(yd.size());
    for (std::size_t i = 0; i < yd.size(); ++i) {
        g[i].resize(yd.rows[i].size());
        for (std::size_t c = 0; c < yd.rows[i].size(); ++c)
            g[i][c] = inv * (std::log(yd.rows[i][c] / h[i][c]) + 1.0);
    }
    return g;
}

std::vector<double> floored_onehot(std::size_t num_classes, int label) {
    std::vector<double> row(num_classes, kLabelDistFloor);
    row[static_cast<std::size_t>(label)] =
        1.0 - kLabelDistFloor * static_cast<double>(num_classes - 1);
    return row;
}

} // namespace

LabelDistributions estimate_label_distributions(const ModelParams& params, const Dataset& ds) {
    if (ds.instances.empty())
        throw std::invalid_argument("dataset is empty");
    LabelDistributions yd;
    yd.rows.reserve(ds.size());
    for (const auto& inst : ds.instances) {
        auto row = forward(params, inst.features).values;
        bool clipped = false;
        for (auto& v : row)
            if (v < kLabelDistFloor) {
                v = kLabelDistFloor;
                clipped = true;
            }
        if (clipped) {
            double sum = 0.0;
            for (double v : row)
                sum += v;
            for (auto& v : row)
                v /= sum;
        }
        yd.rows.push_back(std::move(row));
    }
    return yd;
}

double kl_loss(const LabelDistributions& yd, const ModelParams& params, const Dataset& ds) {
    validate_rows(yd, ds, params.shape.num_classes);
    return kl_from(yd, forward_rows(params, ds));
}

std::vector<std::vector<double>> kl_grad_yd(const LabelDistributions& yd, const ModelParams& params,
                                            const Dataset& ds) {
    validate_rows(yd, ds, params.shape.num_classes);
    return grad_from(yd, forward_rows(params, ds));
}

LabelDistributions update_label_distributions(const LabelDistributions& yd,
                                              const std::vector<std::vector<double>>& grad,
                                              double eta) {
    if (grad.size() != yd.size())
        throw std::invalid_argument("gradient rows do not match distributions");
    if (!(eta > 0.0))
        throw std::invalid_argument("step size must be positive");
    LabelDistributions out;
    out.rows.reserve(yd.size());
    for (std::size_t i = 0; i < yd.size(); ++i) {
        const auto& row = yd.rows[i];
        const auto& g = grad[i];
        if (g.size() != row.size())
            throw std::invalid_argument("gradient row width does not match distributions");
        bool constant = true;
        for (double v : g)
            constant = constant && v == g.front();
        if (constant) { // a constant row is tangent to nothing: keep bits intact
            out.rows.push_back(row);
            continue;
        }
        double mean = 0.0;
        for (double v : g)
            mean += v;
        mean /= static_cast<double>(g.size());
        std::vector<double> next(row.size());
        bool changed = false;
        for (std::size_t c = 0; c < row.size(); ++c) {
            next[c] = row[c] - eta * (g[c] - mean);
            changed = changed || next[c] != row[c];
        }
        if (!changed) {
            out.rows.push_back(row);
            continue;
        }
        // project back onto the floored simplex: clamp, then rescale the
        // above-floor surplus so entries keep the floor and sum to one
        double surplus = 0.0;
        for (auto& v : next) {
            v = std::max(v, kLabelDistFloor) - kLabelDistFloor;
            surplus += v;
        }
        const double budget = 1.0 - kLabelDistFloor * static_cast<double>(next.size());
        if (surplus > 0.0) {
            const double scale = budget / surplus;
            for (auto& v : next)
                v = kLabelDistFloor + v * scale;
        } else {
            for (auto& v : next)
                v = 1.0 / static_cast<double>(next.size());
        }
        out.rows.push_back(std::move(next));
    }
    return out;
}

AdaptiveResult adaptive_fit(ModelParams params, const Dataset& ds, const AdaptiveOptions& opt) {
    if (ds.instances.empty())
        throw std::invalid_argument("dataset is empty");
    if (!opt.skip_pretrain)
        params = fit_ce(std::move(params), ds, opt.pretrain);

    LabelDistributions yd = estimate_label_distributions(params, ds);
    if (opt.pin_onehot_from < yd.size())
        for (std::size_t i = opt.pin_onehot_from; i < yd.size(); ++i)
            yd.rows[i] = floored_onehot(params.shape.num_classes, ds.instances[i].label);

    const auto h = forward_rows(params, ds);
    double kl_cur = kl_from(yd, h);
    double eta = opt.yd_eta;
    std::size_t iters = 0;
    for (std::size_t iter = 0; iter < opt.yd_max_iters; ++iter) {
        auto grad = grad_from(yd, h);
        for (std::size_t i = opt.pin_onehot_from; i < grad.size(); ++i)
            std::fill(grad[i].begin(), grad[i].end(), 0.0);

        LabelDistributions cand;
        double kl_new = 0.0;
        bool accepted = false;
        for (std::size_t halvings = 0; halvings <= opt.max_halvings; ++halvings) {
            cand = update_label_distributions(yd, grad, eta);
            kl_new = kl_from(cand, h);
            if (kl_new <= kl_cur) {
                accepted = true;
                break;
            }
            eta /= 2.0;
        }
        if (!accepted)
            break;
        double max_change = 0.0;
        for (std::size_t i = 0; i < yd.size(); ++i)
            for (std::size_t c = 0; c < yd.rows[i].size(); ++c)
                max_change = std::max(max_change, std::abs(cand.rows[i][c] - yd.rows[i][c]));
        yd = std::move(cand);
        kl_cur = kl_new;
        ++iters;
        if (max_change < opt.yd_tol)
            break;
    }

    params = fit_soft(std::move(params), ds, yd.rows, opt.fit);
    return {std::move(params), std::move(yd), iters, kl_cur};
}

void save_noise_audit(const LabelDistributions& yd, const Dataset& ds,
                      const std::filesystem::path& path) {
    if (yd.size() != ds.size())
        throw std::invalid_argument("label distribution rows do not match dataset");
    std::string out = "instance,given_label,inferred_label,inferred_prob\n";
    for (std::size_t i = 0; i < yd.size(); ++i) {
        const auto& row = yd.rows[i];
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[best])
                best = c;
        out += std::to_string(i) + ',' + std::to_string(ds.instances[i].label) + ',' +
               std::to_string(best) + ',' + format_g9(row[best]) + '\n';
    }
    atomic_write_file(path, out);
}

} // namespace fedar
