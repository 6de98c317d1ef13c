#include "fedar/metrics.hpp"

#include "fedar/io_util.hpp"

#include <numeric>
#include <stdexcept>

namespace fedar {

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < num_classes; ++c)
        t += at(c, c);
    return t;
}

ConfusionMatrix evaluate(const ModelParams& params, const Dataset& test) {
    if (test.instances.empty())
        throw std::invalid_argument("test set is empty");
    ConfusionMatrix cm;
    cm.num_classes = params.shape.num_classes;
    cm.counts.assign(cm.num_classes * cm.num_classes, 0);
    for (const auto& inst : test.instances) {
        const auto truth = static_cast<std::size_t>(inst.label);
        if (truth >= cm.num_classes)
            throw std::invalid_argument("test label out of model range");
        const auto pred = static_cast<std::size_t>(predict(params, inst.features));
        ++cm.at(truth, pred);
    }
    return cm;
}

ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t c) {
    if (c >= cm.num_classes)
        throw std::invalid_argument("class index out of range");
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < cm.num_classes; ++k) {
        predicted += cm.at(k, c);
        actual += cm.at(c, k);
    }
    const auto tp = static_cast<double>(cm.at(c, c));
    ClassMetrics m;
    m.precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    m.recall = actual == 0 ? 0.0 : tp / static_cast<double>(actual);
    const double pr = m.precision + m.recall;
    m.f1 = pr == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / pr;
    return m;
}

ClassMetrics macro_average(const ConfusionMatrix& cm) {
    if (cm.num_classes == 0)
        throw std::invalid_argument("empty confusion matrix");
    ClassMetrics sum;
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        const auto m = precision_recall_f1(cm, c);
        sum.precision += m.precision;
        sum.recall += m.recall;
        sum.f1 += m.f1;
    }
    const auto n = static_cast<double>(cm.num_classes);
    return {sum.precision / n, sum.recall / n, sum.f1 / n};
}

double accuracy(const ConfusionMatrix& cm) {
    const auto n = cm.total();
    return n == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(n);
}

void save_metrics_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                      const std::filesystem::path& path) {
    if (class_names.size() != cm.num_classes)
        throw std::invalid_argument("class name count does not match confusion matrix");
    std::string out = "class,precision,recall,f1\n";
    for (std::size_t c = 0; c < cm.num_classes; ++c) {
        const auto m = precision_recall_f1(cm, c);
        out += class_names[c] + ',' + format_g9(m.precision) + ',' + format_g9(m.recall) + ',' +
               format_g9(m.f1) + '\n';
    }
    const auto mac = macro_average(cm);
    out += "__macro__," + format_g9(mac.precision) + ',' + format_g9(mac.recall) + ',' +
           format_g9(mac.f1) + '\n';
    out += "__accuracy__," + format_g9(accuracy(cm)) + ",,\n";
    atomic_write_file(path, out);
}

} // namespace fedar
