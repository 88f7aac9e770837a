#include "cainet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"

#if !defined(NDEBUG) || defined(CAINET_FINITE_CHECKS)
#define CHECK_FINITE(t, name) ::cainet::check_finite(t, name)
#else
#define CHECK_FINITE(t, name) ((void)(name))
#endif

namespace cainet {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

float* grad_ptr(const ImplPtr& t) {
    t->ensure_grad();
    return t->grad.data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(t.shape()));
    }
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, const char* name, Fwd fwd, Bwd bwd) {
    Tensor out = make_output(x.shape(), {&x});
    const float* xs = x.ptr();
    float* os = out.ptr();
    for (std::size_t i = 0; i < x.numel(); ++i) os[i] = fwd(xs[i]);
    CHECK_FINITE(out, name);
    on_backward(out, [xi = x.impl(), oi = out.impl(), bwd] {
        if (!xi->requires_grad) return;
        const float* g = grad_ptr(oi);
        float* dx = grad_ptr(xi);
        for (std::size_t i = 0; i < xi->data.size(); ++i) dx[i] += bwd(xi->data[i], oi->data[i]) * g[i];
    });
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = make_output(a.shape(), {&a, &b});
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    CHECK_FINITE(out, "add");
    on_backward(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
        const float* g = grad_ptr(oi);
        for (const auto& t : {ai, bi}) {
            if (!t->requires_grad) continue;
            float* d = grad_ptr(t);
            for (std::size_t i = 0; i < t->data.size(); ++i) d[i] += g[i];
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = make_output(a.shape(), {&a, &b});
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    CHECK_FINITE(out, "sub");
    on_backward(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
        const float* g = grad_ptr(oi);
        if (ai->requires_grad) {
            float* d = grad_ptr(ai);
            for (std::size_t i = 0; i < ai->data.size(); ++i) d[i] += g[i];
        }
        if (bi->requires_grad) {
            float* d = grad_ptr(bi);
            for (std::size_t i = 0; i < bi->data.size(); ++i) d[i] -= g[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = make_output(a.shape(), {&a, &b});
    for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    CHECK_FINITE(out, "mul");
    on_backward(out, [ai = a.impl(), bi = b.impl(), oi = out.impl()] {
        const float* g = grad_ptr(oi);
        if (ai->requires_grad) {
            float* d = grad_ptr(ai);
            for (std::size_t i = 0; i < ai->data.size(); ++i) d[i] += g[i] * bi->data[i];
        }
        if (bi->requires_grad) {
            float* d = grad_ptr(bi);
            for (std::size_t i = 0; i < bi->data.size(); ++i) d[i] += g[i] * ai->data[i];
        }
    });
    return out;
}

Tensor scale(const Tensor& a, float factor) {
    return unary(
        a, "scale", [factor](float v) { return v * factor; }, [factor](float, float) { return factor; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, "relu", [](float v) { return v > 0.0f ? v : 0.0f; },
        [](float in, float) { return in > 0.0f ? 1.0f : 0.0f; });
}

Tensor relu6(const Tensor& x) {
    return unary(
        x, "relu6", [](float v) { return std::clamp(v, 0.0f, 6.0f); },
        [](float in, float) { return (in > 0.0f && in < 6.0f) ? 1.0f : 0.0f; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, "sigmoid",
        [](float v) {
            const double d = v;
            return static_cast<float>(d >= 0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d)));
        },
        [](float, float y) { return y * (1.0f - y); });
}

Tensor mul_channelwise(const Tensor& x, const Tensor& s) {
    require_rank(x, 3, "mul_channelwise");
    if (s.numel() != x.dim(0)) {
        throw DimensionError("mul_channelwise: scale " + shape_str(s.shape()) + " vs input " + shape_str(x.shape()));
    }
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out = make_output(x.shape(), {&x, &s});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) out[ch * hw + p] = x[ch * hw + p] * s[ch];
    CHECK_FINITE(out, "mul_channelwise");
    on_backward(out, [xi = x.impl(), si = s.impl(), oi = out.impl(), c, hw] {
        const float* g = grad_ptr(oi);
        if (xi->requires_grad) {
            float* dx = grad_ptr(xi);
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < hw; ++p) dx[ch * hw + p] += g[ch * hw + p] * si->data[ch];
        }
        if (si->requires_grad) {
            float* ds = grad_ptr(si);
            for (std::size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (std::size_t p = 0; p < hw; ++p) acc += double(g[ch * hw + p]) * xi->data[ch * hw + p];
                ds[ch] += static_cast<float>(acc);
            }
        }
    });
    return out;
}

Tensor mul_pixelwise(const Tensor& x, const Tensor& m) {
    require_rank(x, 3, "mul_pixelwise");
    if (m.rank() != 3 || m.dim(0) != 1 || m.dim(1) != x.dim(1) || m.dim(2) != x.dim(2)) {
        throw DimensionError("mul_pixelwise: map " + shape_str(m.shape()) + " vs input " + shape_str(x.shape()));
    }
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out = make_output(x.shape(), {&x, &m});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) out[ch * hw + p] = x[ch * hw + p] * m[p];
    CHECK_FINITE(out, "mul_pixelwise");
    on_backward(out, [xi = x.impl(), mi = m.impl(), oi = out.impl(), c, hw] {
        const float* g = grad_ptr(oi);
        if (xi->requires_grad) {
            float* dx = grad_ptr(xi);
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < hw; ++p) dx[ch * hw + p] += g[ch * hw + p] * mi->data[p];
        }
        if (mi->requires_grad) {
            std::vector<double> acc(hw, 0.0);
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < hw; ++p) acc[p] += double(g[ch * hw + p]) * xi->data[ch * hw + p];
            float* dm = grad_ptr(mi);
            for (std::size_t p = 0; p < hw; ++p) dm[p] += static_cast<float>(acc[p]);
        }
    });
    return out;
}

Tensor add_pixelwise(const Tensor& x, const Tensor& m) {
    require_rank(x, 3, "add_pixelwise");
    if (m.rank() != 3 || m.dim(0) != 1 || m.dim(1) != x.dim(1) || m.dim(2) != x.dim(2)) {
        throw DimensionError("add_pixelwise: map " + shape_str(m.shape()) + " vs input " + shape_str(x.shape()));
    }
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out = make_output(x.shape(), {&x, &m});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < hw; ++p) out[ch * hw + p] = x[ch * hw + p] + m[p];
    CHECK_FINITE(out, "add_pixelwise");
    on_backward(out, [xi = x.impl(), mi = m.impl(), oi = out.impl(), c, hw] {
        const float* g = grad_ptr(oi);
        if (xi->requires_grad) {
            float* dx = grad_ptr(xi);
            for (std::size_t i = 0; i < c * hw; ++i) dx[i] += g[i];
        }
        if (mi->requires_grad) {
            std::vector<double> acc(hw, 0.0);
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t p = 0; p < hw; ++p) acc[p] += g[ch * hw + p];
            float* dm = grad_ptr(mi);
            for (std::size_t p = 0; p < hw; ++p) dm[p] += static_cast<float>(acc[p]);
        }
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
    Tensor out = make_output({p, r}, {&a, &b});
    kernels::gemm(p, r, q, a.ptr(), b.ptr(), out.ptr(), false);
    CHECK_FINITE(out, "matmul");
    on_backward(out, [ai = a.impl(), bi = b.impl(), oi = out.impl(), p, q, r] {
        const float* g = grad_ptr(oi);
        if (ai->requires_grad) kernels::gemm_nt(p, q, r, g, bi->data.data(), grad_ptr(ai), true);
        if (bi->requires_grad) kernels::gemm_tn(q, r, p, ai->data.data(), g, grad_ptr(bi), true);
    });
    return out;
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    Tensor out = make_output({cols, rows}, {&a});
    kernels::transpose(rows, cols, a.ptr(), out.ptr());
    on_backward(out, [ai = a.impl(), oi = out.impl(), rows, cols] {
        if (!ai->requires_grad) return;
        const float* g = grad_ptr(oi);
        float* d = grad_ptr(ai);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[c * rows + r];
    });
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    Tensor out = make_output(std::move(shape), {&x});
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    on_backward(out, [xi = x.impl(), oi = out.impl()] {
        if (!xi->requires_grad) return;
        const float* g = grad_ptr(oi);
        float* d = grad_ptr(xi);
        for (std::size_t i = 0; i < xi->data.size(); ++i) d[i] += g[i];
    });
    return out;
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (in + 2 * padding < kernel) throw DimensionError("conv: kernel larger than padded input");
    return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
    std::size_t cin, h, w, k, stride, pad, ho, wo;
};

ConvGeometry conv_geometry(const Tensor& x, std::size_t k, ConvSpec spec, const char* op) {
    require_rank(x, 3, op);
    if (k % 2 == 0) throw ConfigError(std::string(op) + ": kernel size must be odd, got " + std::to_string(k));
    if (spec.stride == 0) throw ConfigError(std::string(op) + ": stride must be positive");
    const std::size_t pad = spec.padding < 0 ? k / 2 : static_cast<std::size_t>(spec.padding);
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), k, spec.stride, pad, 0, 0};
    g.ho = conv_out_extent(g.h, k, g.stride, pad);
    g.wo = conv_out_extent(g.w, k, g.stride, pad);
    return g;
}

void im2col(const ConvGeometry& g, const float* x, float* col) {
    const std::size_t p = g.ho * g.wo;
    for (std::size_t c = 0; c < g.cin; ++c) {
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                float* row = col + ((c * g.k + ky) * g.k + kx) * p;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                    float* dst = row + oy * g.wo;
                    if (iy < 0 || iy >= static_cast<long>(g.h)) {
                        std::fill(dst, dst + g.wo, 0.0f);
                        continue;
                    }
                    const float* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? 0.0f : src[ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvGeometry& g, const float* col, float* dx) {
    const std::size_t p = g.ho * g.wo;
    for (std::size_t c = 0; c < g.cin; ++c) {
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const float* row = col + ((c * g.k + ky) * g.k + kx) * p;
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    float* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.wo; ++ox) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                        if (ix >= 0 && ix < static_cast<long>(g.w)) dst[ix] += row[oy * g.wo + ox];
                    }
                }
            }
        }
    }
}

void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
    if (bias.defined() && bias.numel() != channels) {
        throw DimensionError(std::string(op) + ": bias " + shape_str(bias.shape()) + " for " +
                             std::to_string(channels) + " output channels");
    }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvSpec spec) {
    require_rank(w, 4, "conv2d");
    if (w.dim(2) != w.dim(3)) throw ConfigError("conv2d: kernel must be square, got " + shape_str(w.shape()));
    const ConvGeometry g = conv_geometry(x, w.dim(2), spec, "conv2d");
    if (w.dim(1) != g.cin) {
        throw DimensionError("conv2d: weight " + shape_str(w.shape()) + " does not accept input " +
                             shape_str(x.shape()));
    }
    const std::size_t cout = w.dim(0);
    check_bias(bias, cout, "conv2d");
    const std::size_t p = g.ho * g.wo;
    const std::size_t kk = g.cin * g.k * g.k;
    const bool direct = g.k == 1 && g.stride == 1 && g.pad == 0;

    std::shared_ptr<std::vector<float>> col;
    const float* colp = x.ptr();
    if (!direct) {
        col = std::make_shared<std::vector<float>>(kk * p);
        im2col(g, x.ptr(), col->data());
        colp = col->data();
    }

    Tensor out = make_output({cout, g.ho, g.wo}, {&x, &w, &bias});
    kernels::gemm(cout, p, kk, w.ptr(), colp, out.ptr(), false, bias.defined() ? bias.ptr() : nullptr);
    CHECK_FINITE(out, "conv2d");

    on_backward(out, [xi = x.impl(), wi = w.impl(), bi = bias.impl(), oi = out.impl(), col, g, cout, p, kk, direct] {
        const float* gout = grad_ptr(oi);
        const float* colp = direct ? xi->data.data() : col->data();
        if (wi->requires_grad) kernels::gemm_nt(cout, kk, p, gout, colp, grad_ptr(wi), true);
        if (bi && bi->requires_grad) {
            float* db = grad_ptr(bi);
            for (std::size_t c = 0; c < cout; ++c) {
                double acc = 0.0;
                for (std::size_t i = 0; i < p; ++i) acc += gout[c * p + i];
                db[c] += static_cast<float>(acc);
            }
        }
        if (xi->requires_grad) {
            if (direct) {
                kernels::gemm_tn(kk, p, cout, wi->data.data(), gout, grad_ptr(xi), true);
            } else {
                std::vector<float> dcol(kk * p);
                kernels::gemm_tn(kk, p, cout, wi->data.data(), gout, dcol.data(), false);
                col2im_add(g, dcol.data(), grad_ptr(xi));
            }
        }
    });
    return out;
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, ConvSpec spec) {
    require_rank(w, 4, "depthwise_conv2d");
    if (w.dim(2) != w.dim(3)) throw ConfigError("depthwise_conv2d: kernel must be square");
    const ConvGeometry g = conv_geometry(x, w.dim(2), spec, "depthwise_conv2d");
    if (w.dim(0) != g.cin || w.dim(1) != 1) {
        throw DimensionError("depthwise_conv2d: weight " + shape_str(w.shape()) + " does not match input " +
                             shape_str(x.shape()));
    }
    check_bias(bias, g.cin, "depthwise_conv2d");
    Tensor out = make_output({g.cin, g.ho, g.wo}, {&x, &w, &bias});
    const float* xs = x.ptr();
    const float* ws = w.ptr();
    for (std::size_t c = 0; c < g.cin; ++c) {
        const float* xc = xs + c * g.h * g.w;
        const float* wc = ws + c * g.k * g.k;
        const double b = bias.defined() ? bias[c] : 0.0;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
                double acc = b;
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                        if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                        acc += double(wc[ky * g.k + kx]) * xc[iy * static_cast<long>(g.w) + ix];
                    }
                }
                out[(c * g.ho + oy) * g.wo + ox] = static_cast<float>(acc);
            }
        }
    }
    CHECK_FINITE(out, "depthwise_conv2d");

    on_backward(out, [xi = x.impl(), wi = w.impl(), bi = bias.impl(), oi = out.impl(), g] {
        const float* gout = grad_ptr(oi);
        const float* xs = xi->data.data();
        const float* ws = wi->data.data();
        float* dx = xi->requires_grad ? grad_ptr(xi) : nullptr;
        float* dw = wi->requires_grad ? grad_ptr(wi) : nullptr;
        float* db = (bi && bi->requires_grad) ? grad_ptr(bi) : nullptr;
        std::vector<double> wacc(g.k * g.k);
        for (std::size_t c = 0; c < g.cin; ++c) {
            const float* xc = xs + c * g.h * g.w;
            const float* wc = ws + c * g.k * g.k;
            std::fill(wacc.begin(), wacc.end(), 0.0);
            double bacc = 0.0;
            for (std::size_t oy = 0; oy < g.ho; ++oy) {
                for (std::size_t ox = 0; ox < g.wo; ++ox) {
                    const float go = gout[(c * g.ho + oy) * g.wo + ox];
                    if (go == 0.0f) continue;
                    bacc += go;
                    for (std::size_t ky = 0; ky < g.k; ++ky) {
                        const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                        if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                        for (std::size_t kx = 0; kx < g.k; ++kx) {
                            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                            const std::size_t xo = c * g.h * g.w + iy * static_cast<long>(g.w) + ix;
                            if (dx) dx[xo] += go * wc[ky * g.k + kx];
                            wacc[ky * g.k + kx] += double(go) * xc[iy * static_cast<long>(g.w) + ix];
                        }
                    }
                }
            }
            if (dw)
                for (std::size_t t = 0; t < g.k * g.k; ++t) dw[c * g.k * g.k + t] += static_cast<float>(wacc[t]);
            if (db) db[c] += static_cast<float>(bacc);
        }
    });
    return out;
}

Tensor depthwise_separable_conv(const Tensor& x, const Tensor& w_dw, const Tensor& w_pw) {
    if (w_dw.rank() != 4 || w_pw.rank() != 4 || w_pw.dim(1) != w_dw.dim(0)) {
        throw DimensionError("depthwise_separable_conv: channel mismatch between depthwise " +
                             shape_str(w_dw.shape()) + " and pointwise " + shape_str(w_pw.shape()));
    }
    if (w_pw.dim(2) != 1) throw ConfigError("depthwise_separable_conv: pointwise kernel must be 1x1");
    return conv2d(depthwise_conv2d(x, w_dw), w_pw);
}

std::size_t depthwise_separable_param_count(std::size_t channels, std::size_t kernel, std::size_t out_channels) {
    return channels * kernel * kernel + channels * out_channels;
}

Tensor softmax_axis(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) {
        throw DimensionError("softmax_axis: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
    const std::size_t n = x.dim(axis);
    Tensor out = make_output(x.shape(), {&x});
    const float* xs = x.ptr();
    float* ys = out.ptr();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            float mx = xs[base];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xs[base + j * inner]);
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) total += std::exp(double(xs[base + j * inner]) - mx);
            for (std::size_t j = 0; j < n; ++j)
                ys[base + j * inner] = static_cast<float>(std::exp(double(xs[base + j * inner]) - mx) / total);
        }
    }
    CHECK_FINITE(out, "softmax_axis");
    on_backward(out, [xi = x.impl(), oi = out.impl(), outer, inner, n] {
        if (!xi->requires_grad) return;
        const float* g = grad_ptr(oi);
        const float* ys = oi->data.data();
        float* dx = grad_ptr(xi);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * n * inner + in;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += double(g[base + j * inner]) * ys[base + j * inner];
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t idx = base + j * inner;
                    dx[idx] += static_cast<float>(ys[idx] * (g[idx] - dot));
                }
            }
        }
    });
    return out;
}

namespace {

struct Taps {
    std::vector<std::size_t> lo, hi;
    std::vector<float> frac;
};

Taps resize_taps(std::size_t in, std::size_t out) {
    Taps t;
    t.lo.resize(out);
    t.hi.resize(out);
    t.frac.resize(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
        double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        std::size_t lo = static_cast<std::size_t>(src);
        if (lo > in - 1) lo = in - 1;
        t.lo[i] = lo;
        t.hi[i] = lo + 1 < in ? lo + 1 : in - 1;
        t.frac[i] = static_cast<float>(src - static_cast<double>(lo));
    }
    return t;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    require_rank(x, 3, "bilinear_resize");
    if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_resize: zero target extent");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out = make_output({c, out_h, out_w}, {&x});
    if (h == out_h && w == out_w) {
        std::copy(x.data().begin(), x.data().end(), out.data().begin());
        on_backward(out, [xi = x.impl(), oi = out.impl()] {
            if (!xi->requires_grad) return;
            const float* g = grad_ptr(oi);
            float* d = grad_ptr(xi);
            for (std::size_t i = 0; i < xi->data.size(); ++i) d[i] += g[i];
        });
        return out;
    }
    const Taps ty = resize_taps(h, out_h), tx = resize_taps(w, out_w);
    const float* xs = x.ptr();
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* plane = xs + ch * h * w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            const float fy = ty.frac[oy];
            const float* r0 = plane + ty.lo[oy] * w;
            const float* r1 = plane + ty.hi[oy] * w;
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const float fx = tx.frac[ox];
                const float top = (1.0f - fx) * r0[tx.lo[ox]] + fx * r0[tx.hi[ox]];
                const float bot = (1.0f - fx) * r1[tx.lo[ox]] + fx * r1[tx.hi[ox]];
                out[(ch * out_h + oy) * out_w + ox] = (1.0f - fy) * top + fy * bot;
            }
        }
    }
    CHECK_FINITE(out, "bilinear_resize");
    on_backward(out, [xi = x.impl(), oi = out.impl(), ty, tx, c, h, w, out_h, out_w] {
        if (!xi->requires_grad) return;
        const float* g = grad_ptr(oi);
        float* d = grad_ptr(xi);
        for (std::size_t ch = 0; ch < c; ++ch) {
            float* plane = d + ch * h * w;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                const float fy = ty.frac[oy];
                float* r0 = plane + ty.lo[oy] * w;
                float* r1 = plane + ty.hi[oy] * w;
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const float fx = tx.frac[ox];
                    const float go = g[(ch * out_h + oy) * out_w + ox];
                    r0[tx.lo[ox]] += (1.0f - fy) * (1.0f - fx) * go;
                    r0[tx.hi[ox]] += (1.0f - fy) * fx * go;
                    r1[tx.lo[ox]] += fy * (1.0f - fx) * go;
                    r1[tx.hi[ox]] += fy * fx * go;
                }
            }
        }
    });
    return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_channels: no inputs");
    std::size_t channels = 0;
    for (const auto& t : parts) {
        require_rank(t, 3, "concat_channels");
        if (t.dim(1) != parts[0].dim(1) || t.dim(2) != parts[0].dim(2)) {
            throw DimensionError("concat_channels: spatial mismatch " + shape_str(t.shape()) + " vs " +
                                 shape_str(parts[0].shape()));
        }
        channels += t.dim(0);
    }
    bool track = false;
    for (const auto& t : parts) track = track || t.requires_grad();
    Tensor out = Tensor::zeros({channels, parts[0].dim(1), parts[0].dim(2)});
    out.impl()->requires_grad = track && grad_enabled();
    std::vector<ImplPtr> impls;
    std::size_t offset = 0;
    for (const auto& t : parts) {
        std::copy(t.data().begin(), t.data().end(), out.data().begin() + static_cast<long>(offset));
        offset += t.numel();
        impls.push_back(t.impl());
    }
    on_backward(out, [impls, oi = out.impl()] {
        const float* g = grad_ptr(oi);
        std::size_t off = 0;
        for (const auto& t : impls) {
            if (t->requires_grad) {
                float* d = grad_ptr(t);
                for (std::size_t i = 0; i < t->data.size(); ++i) d[i] += g[off + i];
            }
            off += t->data.size();
        }
    });
    return out;
}

Tensor concat_channels(std::initializer_list<Tensor> parts) {
    return concat_channels(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor channel_max(const Tensor& x) {
    require_rank(x, 3, "channel_max");
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out = make_output({1, x.dim(1), x.dim(2)}, {&x});
    std::vector<std::size_t> arg(hw, 0);
    for (std::size_t p = 0; p < hw; ++p) {
        float best = x[p];
        for (std::size_t ch = 1; ch < c; ++ch) {
            if (x[ch * hw + p] > best) {
                best = x[ch * hw + p];
                arg[p] = ch;
            }
        }
        out[p] = best;
    }
    on_backward(out, [xi = x.impl(), oi = out.impl(), arg = std::move(arg), hw] {
        if (!xi->requires_grad) return;
        const float* g = grad_ptr(oi);
        float* d = grad_ptr(xi);
        for (std::size_t p = 0; p < hw; ++p) d[arg[p] * hw + p] += g[p];
    });
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    require_rank(x, 3, "global_avg_pool");
    const std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor out = make_output({c}, {&x});
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += x[ch * hw + p];
        out[ch] = static_cast<float>(acc / static_cast<double>(hw));
    }
    on_backward(out, [xi = x.impl(), oi = out.impl(), c, hw] {
        if (!xi->requires_grad) return;
        const float* g = grad_ptr(oi);
        float* d = grad_ptr(xi);
        const float inv = 1.0f / static_cast<float>(hw);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < hw; ++p) d[ch * hw + p] += g[ch] * inv;
    });
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require_rank(w, 2, "linear");
    if (x.numel() != w.dim(1)) {
        throw DimensionError("linear: weight " + shape_str(w.shape()) + " does not accept input " +
                             shape_str(x.shape()));
    }
    const std::size_t out_n = w.dim(0), in_n = w.dim(1);
    check_bias(bias, out_n, "linear");
    Tensor out = make_output({out_n}, {&x, &w, &bias});
    for (std::size_t o = 0; o < out_n; ++o) {
        double acc = bias.defined() ? bias[o] : 0.0;
        for (std::size_t i = 0; i < in_n; ++i) acc += double(w[o * in_n + i]) * x[i];
        out[o] = static_cast<float>(acc);
    }
    CHECK_FINITE(out, "linear");
    on_backward(out, [xi = x.impl(), wi = w.impl(), bi = bias.impl(), oi = out.impl(), out_n, in_n] {
        const float* g = grad_ptr(oi);
        if (xi->requires_grad) {
            float* dx = grad_ptr(xi);
            for (std::size_t i = 0; i < in_n; ++i) {
                double acc = 0.0;
                for (std::size_t o = 0; o < out_n; ++o) acc += double(g[o]) * wi->data[o * in_n + i];
                dx[i] += static_cast<float>(acc);
            }
        }
        if (wi->requires_grad) {
            float* dw = grad_ptr(wi);
            for (std::size_t o = 0; o < out_n; ++o)
                for (std::size_t i = 0; i < in_n; ++i) dw[o * in_n + i] += g[o] * xi->data[i];
        }
        if (bi && bi->requires_grad) {
            float* db = grad_ptr(bi);
            for (std::size_t o = 0; o < out_n; ++o) db[o] += g[o];
        }
    });
    return out;
}

Tensor sum(const Tensor& x) {
    Tensor out = make_output({1}, {&x});
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    out[0] = static_cast<float>(acc);
    on_backward(out, [xi = x.impl(), oi = out.impl()] {
        if (!xi->requires_grad) return;
        const float g = grad_ptr(oi)[0];
        float* d = grad_ptr(xi);
        for (std::size_t i = 0; i < xi->data.size(); ++i) d[i] += g;
    });
    return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / static_cast<float>(x.numel())); }

Tensor weighted_sum(const Tensor& x, const Tensor& weights) {
    require_same_shape(x, weights, "weighted_sum");
    Tensor out = make_output({1}, {&x});
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += double(x[i]) * weights[i];
    out[0] = static_cast<float>(acc);
    on_backward(out, [xi = x.impl(), wi = weights.impl(), oi = out.impl()] {
        if (!xi->requires_grad) return;
        const float g = grad_ptr(oi)[0];
        float* d = grad_ptr(xi);
        for (std::size_t i = 0; i < xi->data.size(); ++i) d[i] += g * wi->data[i];
    });
    return out;
}

}  // namespace cainet
