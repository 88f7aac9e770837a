#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cainet/grid.hpp"

namespace cainet {

enum class ZeroClass { Skip, Zero };

struct MetricOptions {
    ZeroClass zero_class = ZeroClass::Skip;
    bool include_unlabeled = true;  ///< count class 0 in the means
};

/// counts[i * k + j]: pixels of true class i predicted as j.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t num_classes);

    /// Throws DimensionError on extent mismatch, std::out_of_range on a
    /// class outside [0, k).
    void accumulate(const LabelMap& predicted, const LabelMap& truth);
    void merge(const ConfusionMatrix& other);

    std::size_t num_classes() const { return k_; }
    std::uint64_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
    std::uint64_t total() const;
    std::uint64_t row_sum(std::size_t c) const;
    std::uint64_t col_sum(std::size_t c) const;
    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

/// Per-class recall; NaN where the class has no true pixels.
std::vector<double> class_accuracy(const ConfusionMatrix& cm);
/// Per-class IoU; NaN where the union is empty.
std::vector<double> class_iou(const ConfusionMatrix& cm);

double macc(const ConfusionMatrix& cm, const MetricOptions& options = {});
double miou(const ConfusionMatrix& cm, const MetricOptions& options = {});

/// Fixed-width table followed by key=value lines.
std::string metrics_report(const ConfusionMatrix& cm, const std::vector<std::string>& class_names,
                           const MetricOptions& options = {});

}  // namespace cainet
