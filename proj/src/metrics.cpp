#include "cainet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace cainet {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes) : k_(num_classes), counts_(num_classes * num_classes, 0) {
    if (num_classes == 0) throw ConfigError("ConfusionMatrix: zero classes");
}

void ConfusionMatrix::accumulate(const LabelMap& predicted, const LabelMap& truth) {
    if (predicted.height != truth.height || predicted.width != truth.width) {
        throw DimensionError("accumulate: prediction " + std::to_string(predicted.height) + "x" +
                             std::to_string(predicted.width) + " vs truth " + std::to_string(truth.height) + "x" +
                             std::to_string(truth.width));
    }
    const auto k = static_cast<std::int32_t>(k_);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = truth.values[i], p = predicted.values[i];
        if (t < 0 || t >= k || p < 0 || p >= k) {
            throw std::out_of_range("accumulate: class " + std::to_string(t < 0 || t >= k ? t : p) + " at pixel " +
                                    std::to_string(i) + " outside [0, " + std::to_string(k - 1) + "]");
        }
    }
    for (std::size_t i = 0; i < truth.size(); ++i) ++counts_[truth.values[i] * k_ + predicted.values[i]];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw DimensionError("merge: class counts differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (auto v : counts_) s += v;
    return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += counts_[c * k_ + j];
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += counts_[i * k_ + c];
    return s;
}

std::vector<double> class_accuracy(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.num_classes());
    for (std::size_t c = 0; c < out.size(); ++c) {
        const auto row = cm.row_sum(c);
        out[c] = row ? double(cm(c, c)) / double(row) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

std::vector<double> class_iou(const ConfusionMatrix& cm) {
    std::vector<double> out(cm.num_classes());
    for (std::size_t c = 0; c < out.size(); ++c) {
        const auto uni = cm.row_sum(c) + cm.col_sum(c) - cm(c, c);
        out[c] = uni ? double(cm(c, c)) / double(uni) : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

namespace {

double mean_of(const std::vector<double>& v, const MetricOptions& o) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t c = o.include_unlabeled ? 0 : 1; c < v.size(); ++c) {
        if (std::isnan(v[c])) {
            if (o.zero_class == ZeroClass::Zero) ++n;
            continue;
        }
        s += v[c];
        ++n;
    }
    return n ? s / double(n) : 0.0;
}

}  // namespace

double macc(const ConfusionMatrix& cm, const MetricOptions& options) { return mean_of(class_accuracy(cm), options); }
double miou(const ConfusionMatrix& cm, const MetricOptions& options) { return mean_of(class_iou(cm), options); }

std::string metrics_report(const ConfusionMatrix& cm, const std::vector<std::string>& names,
                           const MetricOptions& options) {
    const auto acc = class_accuracy(cm);
    const auto iou = class_iou(cm);
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %10s %10s\n", "class", "Acc", "IoU");
    out += line;
    auto name = [&](std::size_t c) { return c < names.size() ? names[c] : "class" + std::to_string(c); };
    for (std::size_t c = 0; c < acc.size(); ++c) {
        std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f\n", name(c).c_str(), std::isnan(acc[c]) ? 0.0 : acc[c],
                      std::isnan(iou[c]) ? 0.0 : iou[c]);
        out += line;
    }
    const double ma = macc(cm, options), mi = miou(cm, options);
    std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f\n", "mean", ma, mi);
    out += line;
    for (std::size_t c = 0; c < acc.size(); ++c) {
        std::snprintf(line, sizeof line, "acc.%s=%.9g\niou.%s=%.9g\n", name(c).c_str(), acc[c], name(c).c_str(),
                      iou[c]);
        out += line;
    }
    std::snprintf(line, sizeof line, "macc=%.9g\nmiou=%.9g\npixels=%llu\n", ma, mi,
                  static_cast<unsigned long long>(cm.total()));
    out += line;
    return out;
}

}  // namespace cainet
