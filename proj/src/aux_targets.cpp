#include "cainet/aux_targets.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace cainet {

namespace {

std::atomic<std::size_t> g_aux_targets{0};

BinaryMap morph(const BinaryMap& b, std::size_t k, bool take_max, const char* op) {
    if (k == 0 || k % 2 == 0) throw ConfigError(std::string(op) + ": kernel size must be odd, got " + std::to_string(k));
    const long r = static_cast<long>(k / 2);
    const long h = static_cast<long>(b.height), w = static_cast<long>(b.width);
    BinaryMap out(b.height, b.width);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            std::uint8_t v = take_max ? 0 : 1;
            for (long dy = -r; dy <= r; ++dy) {
                for (long dx = -r; dx <= r; ++dx) {
                    const long yy = y + dy, xx = x + dx;
                    const std::uint8_t s =
                        (yy < 0 || yy >= h || xx < 0 || xx >= w) ? 0 : (b(yy, xx) != 0);
                    v = take_max ? std::max(v, s) : std::min(v, s);
                }
            }
            out(y, x) = v;
        }
    }
    return out;
}

// Reflect-101 index for arbitrary offsets (period 2n - 2).
long reflect(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * n - 2;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

BinaryMap binary_target(const LabelMap& labels) {
    BinaryMap out(labels.height, labels.width);
    for (std::size_t i = 0; i < labels.size(); ++i) out.values[i] = labels.values[i] != 0;
    return out;
}

BinaryMap dilate(const BinaryMap& b, std::size_t k) { return morph(b, k, true, "dilate"); }
BinaryMap erode(const BinaryMap& b, std::size_t k) { return morph(b, k, false, "erode"); }

BinaryMap boundary_target(const BinaryMap& binary) {
    const BinaryMap inner = erode(binary, 3);
    BinaryMap out(binary.height, binary.width);
    for (std::size_t i = 0; i < binary.size(); ++i) out.values[i] = binary.values[i] != 0 && !inner.values[i];
    return out;
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw ConfigError("gaussian_blur: sigma must be positive");
    const long r = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double total = 0.0;
    for (long i = -r; i <= r; ++i) total += k[i + r] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
    for (double& v : k) v /= total;
    return k;
}

FloatMap gaussian_blur(const FloatMap& x, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const long r = static_cast<long>(k.size() / 2);
    const long h = static_cast<long>(x.height), w = static_cast<long>(x.width);
    std::vector<double> tmp(x.size());
    for (long y = 0; y < h; ++y)
        for (long c = 0; c < w; ++c) {
            double s = 0.0;
            for (long i = -r; i <= r; ++i) s += k[i + r] * x(y, reflect(c + i, w));
            tmp[y * w + c] = s;
        }
    FloatMap out(x.height, x.width);
    for (long y = 0; y < h; ++y)
        for (long c = 0; c < w; ++c) {
            double s = 0.0;
            for (long i = -r; i <= r; ++i) s += k[i + r] * tmp[reflect(y + i, h) * w + c];
            out(y, c) = static_cast<float>(s);
        }
    return out;
}

FloatMap attention_target(const BinaryMap& binary, const AuxTargetOptions& options) {
    const BinaryMap grown = dilate(binary, options.dilation);
    FloatMap f(grown.height, grown.width);
    for (std::size_t i = 0; i < grown.size(); ++i) f.values[i] = grown.values[i];
    FloatMap q = gaussian_blur(f, options.sigma);
    for (float& v : q.values) v = std::clamp(v, 0.0f, 1.0f);
    return q;
}

AuxTargets make_aux_targets(const LabelMap& labels, const AuxTargetOptions& options) {
    ++g_aux_targets;
    AuxTargets t;
    t.binary = binary_target(labels);
    t.boundary = boundary_target(t.binary);
    t.attention_q = attention_target(t.binary, options);
    return t;
}

std::size_t aux_target_count() { return g_aux_targets.load(); }

}  // namespace cainet
