#pragma once

// Naive reference implementations, written without the library's kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "cainet/grid.hpp"
#include "cainet/tensor.hpp"

namespace oracle {

inline cainet::Tensor matmul(const cainet::Tensor& a, const cainet::Tensor& b) {
    const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
    cainet::Tensor out = cainet::Tensor::zeros({p, r});
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < q; ++k) s += double(a[i * q + k]) * b[k * r + j];
            out[i * r + j] = float(s);
        }
    return out;
}

inline cainet::Tensor conv(const cainet::Tensor& x, const cainet::Tensor& w, const cainet::Tensor& bias,
                           std::size_t stride, std::size_t pad) {
    const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0), k = w.dim(2);
    const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
    cainet::Tensor out = cainet::Tensor::zeros({cout, oh, ow});
    for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                double s = bias.defined() ? bias[o] : 0.0;
                for (std::size_t c = 0; c < cin; ++c)
                    for (std::size_t dy = 0; dy < k; ++dy)
                        for (std::size_t dx = 0; dx < k; ++dx) {
                            const long iy = long(y * stride + dy) - long(pad), ix = long(xx * stride + dx) - long(pad);
                            if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(wd)) continue;
                            s += double(x.at({c, std::size_t(iy), std::size_t(ix)})) * w.at({o, c, dy, dx});
                        }
                out.at({o, y, xx}) = float(s);
            }
    return out;
}

// Jaccard loss of an error set M against foreground F: |M| / |F u M|.
inline double jaccard_loss(const std::vector<bool>& fg, const std::vector<bool>& err) {
    std::size_t m = 0, u = 0;
    for (std::size_t i = 0; i < fg.size(); ++i) {
        m += err[i];
        u += fg[i] || err[i];
    }
    return u == 0 ? 0.0 : double(m) / double(u);
}

// Lovász extension as the threshold integral int_0^1 J({i : m_i >= t}) dt,
// evaluated piecewise between the distinct error values.
inline double lovasz_extension(const std::vector<double>& m, const std::vector<bool>& fg) {
    std::set<double> cuts(m.begin(), m.end());
    cuts.insert(0.0);
    std::vector<double> ts(cuts.begin(), cuts.end());
    double total = 0;
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
        const double mid = 0.5 * (ts[k] + ts[k + 1]);
        std::vector<bool> err(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) err[i] = m[i] >= mid;
        total += (ts[k + 1] - ts[k]) * jaccard_loss(fg, err);
    }
    return total;
}

inline double lovasz(const cainet::Tensor& probs, const cainet::LabelMap& labels, bool all_classes) {
    const std::size_t k = probs.dim(0), n = labels.size();
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<bool> fg(n);
        std::vector<double> m(n);
        bool present = false;
        for (std::size_t i = 0; i < n; ++i) {
            fg[i] = labels.values[i] == std::int32_t(c);
            present = present || fg[i];
            const double p = probs[c * n + i];
            m[i] = fg[i] ? 1.0 - p : p;
        }
        if (!present && !all_classes) continue;
        sum += lovasz_extension(m, fg);
        ++count;
    }
    return count ? sum / count : 0.0;
}

inline cainet::BinaryMap morph(const cainet::BinaryMap& b, std::size_t k, bool max) {
    cainet::BinaryMap out(b.height, b.width);
    const long r = long(k / 2);
    for (long y = 0; y < long(b.height); ++y)
        for (long x = 0; x < long(b.width); ++x) {
            std::uint8_t v = max ? 0 : 1;
            for (long dy = -r; dy <= r; ++dy)
                for (long dx = -r; dx <= r; ++dx) {
                    const long yy = y + dy, xx = x + dx;
                    const bool in = yy >= 0 && xx >= 0 && yy < long(b.height) && xx < long(b.width);
                    const std::uint8_t s = in ? b(yy, xx) : 0;
                    v = max ? std::max(v, s) : std::min(v, s);
                }
            out(y, x) = v;
        }
    return out;
}

struct SetMetrics {
    double macc = 0, miou = 0;
};

// Per-class pixel sets; classes with an empty denominator are skipped.
inline SetMetrics set_metrics(const cainet::LabelMap& truth, const cainet::LabelMap& pred, std::size_t k) {
    double acc = 0, iou = 0;
    int na = 0, ni = 0;
    for (std::int32_t c = 0; c < std::int32_t(k); ++c) {
        std::set<std::size_t> t, p, inter, uni;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth.values[i] == c) t.insert(i);
            if (pred.values[i] == c) p.insert(i);
        }
        std::set_intersection(t.begin(), t.end(), p.begin(), p.end(), std::inserter(inter, inter.end()));
        std::set_union(t.begin(), t.end(), p.begin(), p.end(), std::inserter(uni, uni.end()));
        if (!t.empty()) {
            acc += double(inter.size()) / double(t.size());
            ++na;
        }
        if (!uni.empty()) {
            iou += double(inter.size()) / double(uni.size());
            ++ni;
        }
    }
    return {na ? acc / na : 0.0, ni ? iou / ni : 0.0};
}

}  // namespace oracle
