#pragma once

#include "mixnet/tensor.hpp"

namespace mixnet::ops {

// Forward kernels. Convolutions are cross-correlations with zero padding.
// Weight layouts: conv1x1 (Cout,Cin,1,1); conv3x3 (Cout,Cin,3,3).
// Biases and per-channel affine parameters use shape (1,C,1,1).

template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T> Tensor<T> gelu(const Tensor<T>& x);    // exact x*Phi(x)
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);

inline constexpr double kLayerNormEps = 1e-6;

// Per-(n,h,w) normalization across channels, population variance,
// epsilon inside the square root.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta);

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x); // (N,C,1,1)

template <typename T>
T l1_loss_value(const Tensor<T>& pred, const Tensor<T>& target); // mean |pred-target|

// Backward kernels. Each accumulates (+=) into the provided gradient buffers,
// which must already have the matching shapes.

template <typename T>
void conv1x1_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gout,
                      Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

template <typename T>
void conv3x3_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gout,
                      Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb);

template <typename T>
void gelu_backward(const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>* gx);
template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>* gx);
template <typename T>
void sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gout, Tensor<T>* gx);

template <typename T>
void layer_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& gout,
                         Tensor<T>* gx, Tensor<T>* ggamma, Tensor<T>* gbeta);

template <typename T>
void global_avg_pool_backward(const Shape& in_shape, const Tensor<T>& gout, Tensor<T>* gx);

// Gradient w.r.t. the bilinear/nearest source: transpose of the forward map.
template <typename T>
void interpolate_backward(const Shape& in_shape, const Tensor<T>& gout, Interp mode,
                          Tensor<T>* gx);

template <typename T>
void l1_loss_backward(const Tensor<T>& pred, const Tensor<T>& target, T gout_scalar,
                      Tensor<T>* gpred);

} // namespace mixnet::ops
