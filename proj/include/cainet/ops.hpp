#pragma once

#include <span>

#include "cainet/tensor.hpp"

// Differentiable primitives. Image-like tensors are C x H x W (one sample);
// matrices are rows x cols.
namespace cainet {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor relu(const Tensor& x);
Tensor relu6(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Broadcasting over C x H x W.
/// x[c, :, :] * s[c]
Tensor mul_channelwise(const Tensor& x, const Tensor& s);
/// x[c, h, w] * m[0, h, w]
Tensor mul_pixelwise(const Tensor& x, const Tensor& m);
/// x[c, h, w] + m[0, h, w]
Tensor add_pixelwise(const Tensor& x, const Tensor& m);

/// P x Q times Q x R.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& x, Shape shape);

struct ConvSpec {
    std::size_t stride = 1;
    int padding = -1;  ///< -1 selects kernel/2
};

/// Cross-correlation. x: Cin x H x W, w: Cout x Cin x k x k, bias: Cout or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias = {}, ConvSpec spec = {});
/// Per-channel k x k filter. x: C x H x W, w: C x 1 x k x k, bias: C or undefined.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, const Tensor& bias = {}, ConvSpec spec = {});
/// Depthwise k x k followed by a bias-free 1 x 1 pointwise conv.
Tensor depthwise_separable_conv(const Tensor& x, const Tensor& w_dw, const Tensor& w_pw);
std::size_t depthwise_separable_param_count(std::size_t channels, std::size_t kernel, std::size_t out_channels);

/// Conv output extent: floor((in + 2p - k) / stride) + 1.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

/// Max-subtracted softmax along `axis`.
Tensor softmax_axis(const Tensor& x, std::size_t axis);

/// Bilinear resize of C x H x W, align_corners = false.
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(std::initializer_list<Tensor> parts);

/// C x H x W -> 1 x H x W maximum over channels.
Tensor channel_max(const Tensor& x);
/// C x H x W -> C spatial mean.
Tensor global_avg_pool(const Tensor& x);
/// x: In, w: Out x In, bias: Out or undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {});

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// sum(x * weights) with `weights` treated as a constant.
Tensor weighted_sum(const Tensor& x, const Tensor& weights);

}  // namespace cainet
