#pragma once

#include "fedar/dataset.hpp"
#include "fedar/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fedar {

struct ConfusionMatrix {
    std::size_t num_classes = 0;
    std::vector<std::uint64_t> counts; // row-major; rows = true, cols = predicted

    std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * num_classes + p]; }
    std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * num_classes + p]; }
    std::uint64_t total() const;
    std::uint64_t trace() const;
};

ConfusionMatrix evaluate(const ModelParams& params, const Dataset& test);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Any 0/0 is reported as 0.
ClassMetrics precision_recall_f1(const ConfusionMatrix& cm, std::size_t c);
ClassMetrics macro_average(const ConfusionMatrix& cm); // unweighted over classes
double accuracy(const ConfusionMatrix& cm);

// `class,precision,recall,f1` rows per class, then `__macro__` and
// `__accuracy__` (accuracy in the precision column).
void save_metrics_csv(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                      const std::filesystem::path& path);

} // namespace fedar
