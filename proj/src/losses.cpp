#include "cainet/losses.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cainet/aux_targets.hpp"
#include "cainet/ops.hpp"

namespace cainet {

namespace {

std::atomic<std::size_t> g_loss_evaluations{0};

float* grad_ptr(const std::shared_ptr<TensorImpl>& t) {
    t->ensure_grad();
    return t->grad.data();
}

void check_labels(const Tensor& scores, const LabelMap& labels, const char* op) {
    if (scores.rank() != 3 || scores.dim(1) != labels.height || scores.dim(2) != labels.width) {
        throw DimensionError(std::string(op) + ": scores " + shape_str(scores.shape()) + " vs labels " +
                             std::to_string(labels.height) + "x" + std::to_string(labels.width));
    }
    const auto k = static_cast<std::int32_t>(scores.dim(0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto v = labels.values[i];
        if (v < 0 || v >= k) {
            throw LabelRangeError(std::string(op) + ": label " + std::to_string(v) + " at pixel (" +
                                  std::to_string(i / labels.width) + ", " + std::to_string(i % labels.width) +
                                  ") outside [0, " + std::to_string(k - 1) + "]");
        }
    }
}

}  // namespace

std::size_t loss_evaluation_count() { return g_loss_evaluations.load(); }

ClassWeights enet_class_weights(std::span<const double> freqs) {
    ClassWeights out;
    double total = 0.0;
    for (double p : freqs) {
        if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("enet_class_weights: negative frequency");
        total += p;
    }
    if (total > 1.0 + 1e-6) throw std::invalid_argument("enet_class_weights: frequencies sum above 1");
    for (double p : freqs) {
        out.w.push_back(static_cast<float>(1.0 / std::log(1.02 + p)));
        out.source_frequencies.push_back(p);
    }
    return out;
}

Tensor attention_loss(const Tensor& pred, const Tensor& q, double eps) {
    if (pred.shape() != q.shape()) {
        throw DimensionError("attention_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                             shape_str(q.shape()));
    }
    ++g_loss_evaluations;
    const std::size_t n = pred.numel();
    const double inv_n = 1.0 / static_cast<double>(n);
    double mp = 0.0, mq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += pred[i];
        mq += q[i];
    }
    mp *= inv_n;
    mq *= inv_n;
    double mse = 0.0, cov = 0.0, vp = 0.0, vq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = pred[i] - mp, dq = q[i] - mq, e = double(pred[i]) - q[i];
        mse += e * e;
        cov += dp * dq;
        vp += dp * dp;
        vq += dq * dq;
    }
    mse *= inv_n;
    cov *= inv_n;
    vp *= inv_n;
    vq *= inv_n;
    const double sp = std::sqrt(vp), sq = std::sqrt(vq);
    const double den = sp * sq + eps;
    const double corr = cov / den;

    Tensor out = make_output({1}, {&pred});
    out[0] = static_cast<float>(mse - corr);
    on_backward(out, [pi = pred.impl(), qi = q.impl(), oi = out.impl(), n, inv_n, mp, mq, cov, sp, sq, den] {
        if (!pi->requires_grad) return;
        const double g = grad_ptr(oi)[0];
        float* d = grad_ptr(pi);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = pi->data[i], qv = qi->data[i];
            const double dmse = 2.0 * (p - qv) * inv_n;
            const double dcov = (qv - mq) * inv_n;
            const double dsp = sp > 0.0 ? (p - mp) * inv_n / sp : 0.0;
            const double dcorr = dcov / den - cov * sq * dsp / (den * den);
            d[i] += static_cast<float>(g * (dmse - dcorr));
        }
    });
    return out;
}

std::vector<double> lovasz_grad(std::span<const std::uint8_t> gt_sorted) {
    const std::size_t n = gt_sorted.size();
    std::vector<double> grad(n);
    double gts = 0.0;
    for (auto v : gt_sorted) gts += v;
    double cum_gt = 0.0, cum_bg = 0.0, previous = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cum_gt += gt_sorted[i];
        cum_bg += 1.0 - gt_sorted[i];
        const double inter = gts - cum_gt;
        const double uni = gts + cum_bg;
        const double jac = 1.0 - inter / uni;
        grad[i] = i == 0 ? jac : jac - previous;
        previous = jac;
    }
    return grad;
}

Tensor lovasz_softmax_probs(const Tensor& probs, const LabelMap& labels, const LovaszOptions& options) {
    check_labels(probs, labels, "lovasz_softmax");
    ++g_loss_evaluations;
    const std::size_t k = probs.dim(0), hw = labels.size();

    std::vector<std::size_t> pixels;
    pixels.reserve(hw);
    for (std::size_t i = 0; i < hw; ++i)
        if (!(options.ignore_unlabeled && labels.values[i] == 0)) pixels.push_back(i);

    struct ClassTerm {
        std::size_t cls;
        std::vector<std::size_t> order;  // pixel indices, decreasing error
        std::vector<double> grad;
        std::vector<std::uint8_t> fg;
    };
    std::vector<ClassTerm> terms;
    double total = 0.0;
    const std::size_t first = options.ignore_unlabeled ? 1 : 0;
    for (std::size_t c = first; c < k; ++c) {
        std::vector<std::uint8_t> fg(pixels.size());
        std::size_t present = 0;
        for (std::size_t j = 0; j < pixels.size(); ++j) {
            fg[j] = labels.values[pixels[j]] == static_cast<std::int32_t>(c);
            present += fg[j];
        }
        if (options.classes == LovaszClasses::Present && present == 0) continue;
        std::vector<double> err(pixels.size());
        for (std::size_t j = 0; j < pixels.size(); ++j)
            err[j] = std::abs(double(fg[j]) - probs[c * hw + pixels[j]]);
        std::vector<std::size_t> idx(pixels.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return err[a] > err[b]; });
        std::vector<std::uint8_t> fg_sorted(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) fg_sorted[r] = fg[idx[r]];
        ClassTerm term{c, {}, lovasz_grad(fg_sorted), std::move(fg_sorted)};
        term.order.resize(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            term.order[r] = pixels[idx[r]];
            total += err[idx[r]] * term.grad[r];
        }
        terms.push_back(std::move(term));
    }
    const double count = static_cast<double>(terms.size());
    Tensor out = make_output({1}, {&probs});
    out[0] = terms.empty() ? 0.0f : static_cast<float>(total / count);
    if (terms.empty()) return out;
    on_backward(out, [pi = probs.impl(), oi = out.impl(), terms = std::move(terms), hw, count] {
        if (!pi->requires_grad) return;
        const double g = grad_ptr(oi)[0] / count;
        float* d = grad_ptr(pi);
        for (const auto& t : terms) {
            for (std::size_t r = 0; r < t.order.size(); ++r) {
                // error = 1 - p on foreground pixels, p elsewhere
                const double sign = t.fg[r] ? -1.0 : 1.0;
                d[t.cls * hw + t.order[r]] += static_cast<float>(g * t.grad[r] * sign);
            }
        }
    });
    return out;
}

Tensor lovasz_softmax(const Tensor& logits, const LabelMap& labels, const LovaszOptions& options) {
    return lovasz_softmax_probs(softmax_axis(logits, 0), labels, options);
}

Tensor weighted_cross_entropy(const Tensor& logits, const LabelMap& labels, std::span<const float> weights,
                              bool ignore_unlabeled) {
    check_labels(logits, labels, "weighted_cross_entropy");
    const std::size_t k = logits.dim(0), hw = labels.size();
    if (!weights.empty() && weights.size() != k) {
        throw DimensionError("weighted_cross_entropy: " + std::to_string(weights.size()) + " weights for " +
                             std::to_string(k) + " classes");
    }
    ++g_loss_evaluations;
    std::vector<float> w(weights.begin(), weights.end());
    if (w.empty()) w.assign(k, 1.0f);

    // Softmax probabilities per pixel, kept for the adjoint.
    std::vector<float> prob(k * hw);
    std::vector<std::uint8_t> clamped(hw, 0);
    std::size_t counted = 0;
    double total = 0.0;
    const float* x = logits.ptr();
    for (std::size_t p = 0; p < hw; ++p) {
        double mx = x[p];
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, double(x[c * hw + p]));
        double z = 0.0;
        for (std::size_t c = 0; c < k; ++c) z += std::exp(x[c * hw + p] - mx);
        for (std::size_t c = 0; c < k; ++c) prob[c * hw + p] = static_cast<float>(std::exp(x[c * hw + p] - mx) / z);
        const auto y = static_cast<std::size_t>(labels.values[p]);
        if (ignore_unlabeled && y == 0) continue;
        ++counted;
        double logp = x[y * hw + p] - mx - std::log(z);
        if (logp < std::log(double(kProbClamp))) {
            logp = std::log(double(kProbClamp));
            clamped[p] = 1;
        }
        total -= w[y] * logp;
    }
    Tensor out = make_output({1}, {&logits});
    out[0] = counted ? static_cast<float>(total / static_cast<double>(counted)) : 0.0f;
    if (!counted) return out;
    on_backward(out, [li = logits.impl(), oi = out.impl(), prob = std::move(prob), clamped = std::move(clamped),
                      labels, w, k, hw, counted, ignore_unlabeled] {
        if (!li->requires_grad) return;
        const double g = grad_ptr(oi)[0] / static_cast<double>(counted);
        float* d = grad_ptr(li);
        for (std::size_t p = 0; p < hw; ++p) {
            const auto y = static_cast<std::size_t>(labels.values[p]);
            if ((ignore_unlabeled && y == 0) || clamped[p]) continue;
            const double s = g * w[y];
            for (std::size_t c = 0; c < k; ++c)
                d[c * hw + p] += static_cast<float>(s * (prob[c * hw + p] - (c == y ? 1.0 : 0.0)));
        }
    });
    return out;
}

Tensor weighted_binary_cross_entropy(const Tensor& pred, const BinaryMap& target, std::array<float, 2> weights) {
    if (pred.numel() != target.size() || pred.rank() != 3 || pred.dim(1) != target.height) {
        throw DimensionError("weighted_binary_cross_entropy: prediction " + shape_str(pred.shape()) + " vs target " +
                             std::to_string(target.height) + "x" + std::to_string(target.width));
    }
    ++g_loss_evaluations;
    const std::size_t n = pred.numel();
    const double lo = kProbClamp, hi = 1.0 - double(kProbClamp);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = std::clamp(double(pred[i]), lo, hi);
        const bool pos = target.values[i] != 0;
        total -= weights[pos] * (pos ? std::log(p) : std::log(1.0 - p));
    }
    Tensor out = make_output({1}, {&pred});
    out[0] = static_cast<float>(total / static_cast<double>(n));
    on_backward(out, [pi = pred.impl(), oi = out.impl(), target, weights, n, lo, hi] {
        if (!pi->requires_grad) return;
        const double g = grad_ptr(oi)[0] / static_cast<double>(n);
        float* d = grad_ptr(pi);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = pi->data[i];
            if (p <= lo || p >= hi) continue;
            const bool pos = target.values[i] != 0;
            d[i] += static_cast<float>(g * weights[pos] * (pos ? -1.0 / p : 1.0 / (1.0 - p)));
        }
    });
    return out;
}

std::string LossReport::log_fields() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "l_total=%.9g l_target=%.9g l_att1=%.9g l_att2=%.9g l_binary=%.9g "
                  "l_boundary=%.9g l_decoder=%.9g",
                  l_total, l_target, l_att1, l_att2, l_binary, l_boundary, l_decoder);
    return buf;
}

LossReport& LossReport::operator+=(const LossReport& o) {
    l_seg1 += o.l_seg1;
    l_seg2 += o.l_seg2;
    l_seg3 += o.l_seg3;
    l_seg4 += o.l_seg4;
    l_target += o.l_target;
    l_att1 += o.l_att1;
    l_att2 += o.l_att2;
    l_binary += o.l_binary;
    l_boundary += o.l_boundary;
    l_decoder += o.l_decoder;
    l_total += o.l_total;
    return *this;
}

LossReport LossReport::scaled(double f) const {
    LossReport r = *this;
    for (double* v : {&r.l_seg1, &r.l_seg2, &r.l_seg3, &r.l_seg4, &r.l_target, &r.l_att1, &r.l_att2, &r.l_binary,
                      &r.l_boundary, &r.l_decoder, &r.l_total})
        *v *= f;
    return r;
}

LossResult total_loss(const StreamOutputs& o, const LabelMap& labels, const AuxTargets& aux,
                      const LossWeights& weights, const LossToggles& toggles, const LovaszOptions& lovasz) {
    const std::size_t h = labels.height, w = labels.width;
    LossReport r;
    std::vector<Tensor> terms;
    auto up = [&](const Tensor& t) { return bilinear_resize(t, h, w); };
    auto take = [&](Tensor t, double& slot) {
        slot = t.item();
        terms.push_back(std::move(t));
    };

    if (toggles.target) {
        if (o.p1.defined()) take(lovasz_softmax(up(o.p1), labels, lovasz), r.l_seg1);
        if (o.p2.defined()) take(lovasz_softmax(up(o.p2), labels, lovasz), r.l_seg2);
        if (o.p3.defined()) take(weighted_cross_entropy(up(o.p3), labels, weights.seg.w, lovasz.ignore_unlabeled),
                                 r.l_seg3);
        if (o.p4.defined()) take(weighted_cross_entropy(up(o.p4), labels, weights.seg.w, lovasz.ignore_unlabeled),
                                 r.l_seg4);
        r.l_target = r.l_seg1 + r.l_seg2 + r.l_seg3 + r.l_seg4;
    }
    if (toggles.attention) {
        const Tensor q = to_tensor(aux.attention_q);
        if (o.att1.defined()) take(attention_loss(up(o.att1), q), r.l_att1);
        if (o.att2.defined()) take(attention_loss(up(o.att2), q), r.l_att2);
    }
    if (toggles.binary && o.binary_map.defined())
        take(weighted_binary_cross_entropy(up(o.binary_map), aux.binary, weights.binary), r.l_binary);
    if (toggles.boundary && o.boundary_map.defined())
        take(weighted_binary_cross_entropy(up(o.boundary_map), aux.boundary, weights.boundary), r.l_boundary);
    if (toggles.decoder) {
        double part = 0.0;
        for (const Tensor* s : {&o.s_rgb, &o.s_thermal, &o.s_global}) {
            if (!s->defined()) continue;
            take(weighted_cross_entropy(up(*s), labels, {}, lovasz.ignore_unlabeled), part);
            r.l_decoder += part;
        }
    }
    r.l_total = r.l_target + r.l_att1 + r.l_att2 + r.l_binary + r.l_boundary + r.l_decoder;

    LossResult result;
    result.report = r;
    if (terms.empty()) {
        result.total = Tensor::scalar(0.0f);
        return result;
    }
    Tensor total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    result.total = total;
    return result;
}

}  // namespace cainet
