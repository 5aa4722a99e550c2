#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mina/tensor.hpp"

namespace mina::nn {

// All image tensors are rank 3: [channels, height, width].

/// Same-padded, stride-1 convolution. `weight` is [out, in, k, k] with odd k,
/// `bias` is [out].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Accumulates into `dweight`/`dbias`; writes the input gradient to `dx` when
/// it is non-null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                     Tensor<T>& dweight, Tensor<T>& dbias, Tensor<T>* dx);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
/// Uses the forward output: the gradient passes where y > 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy);

/// 2x2 max pooling, stride 2. `argmax` receives the flat input index of each
/// output's maximum (first one on ties).
template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x, std::vector<std::uint32_t>& argmax);
template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& dy, const std::vector<std::uint32_t>& argmax,
                            const std::vector<int>& input_shape);

/// 2x nearest-neighbour upsampling.
template <typename T>
Tensor<T> upsample2(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy);

/// Channel concatenation [a; b].
template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
std::pair<Tensor<T>, Tensor<T>> concat_backward(const Tensor<T>& dy, int channels_a);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& dy);

inline constexpr double kBceEpsilon = 1e-7;

/// -mean(w*y*log p + (1-y)*log(1-p)) with p clamped to [eps, 1-eps].
template <typename T>
double weighted_bce(const Tensor<T>& pred, const Tensor<T>& target, double pos_weight);
/// d loss / d pred (zero where the clamp is active).
template <typename T>
Tensor<T> weighted_bce_backward(const Tensor<T>& pred, const Tensor<T>& target, double pos_weight);

/// Loss of sigmoid(logits) with the same clamping as weighted_bce, plus the
/// gradient with respect to the logits, ((w*y + 1 - y)*p - w*y) / N.
template <typename T>
double weighted_bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target,
                                double pos_weight, Tensor<T>* dlogits);

}  // namespace mina::nn
