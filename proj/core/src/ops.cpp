#include "mixnet/ops.hpp"

#include <algorithm>
#include <cmath>

namespace mixnet::ops {

namespace {

template <typename T>
void check_bias(const Tensor<T>& b, i64 cout, const char* op) {
    const Shape& s = b.shape();
    if (s.n != 1 || s.c != cout || s.h != 1 || s.w != 1)
        throw ShapeError(std::string(op) + ": bias shape " + s.str() + " does not match " +
                         std::to_string(cout) + " output channels");
}

} // namespace

template <typename T>
Tensor<T> conv1x1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (ws.h != 1 || ws.w != 1)
        throw ShapeError("conv1x1: weight shape " + ws.str() + " must be (Cout,Cin,1,1)");
    if (ws.c != xs.c)
        throw ShapeError("conv1x1: input has " + std::to_string(xs.c) +
                         " channels, weight expects " + std::to_string(ws.c));
    const i64 cout = ws.n;
    check_bias(b, cout, "conv1x1");

    Tensor<T> out(Shape{xs.n, cout, xs.h, xs.w});
    const i64 plane = xs.h * xs.w;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 o = 0; o < cout; ++o) {
            T* op = out.data() + (n * cout + o) * plane;
            const T bias = b.data()[o];
            for (i64 i = 0; i < plane; ++i) op[i] = bias;
            for (i64 c = 0; c < xs.c; ++c) {
                const T wv = w.data()[o * xs.c + c];
                const T* xp = x.data() + (n * xs.c + c) * plane;
                for (i64 i = 0; i < plane; ++i) op[i] += wv * xp[i];
            }
        }
    return out;
}

template <typename T>
void conv1x1_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gout,
                      Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
    const Shape& xs = x.shape();
    const i64 cout = w.shape().n;
    const i64 plane = xs.h * xs.w;
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 o = 0; o < cout; ++o) {
            const T* gp = gout.data() + (n * cout + o) * plane;
            if (gb) {
                T acc = 0;
                for (i64 i = 0; i < plane; ++i) acc += gp[i];
                gb->data()[o] += acc;
            }
            for (i64 c = 0; c < xs.c; ++c) {
                const T* xp = x.data() + (n * xs.c + c) * plane;
                if (gw) {
                    T acc = 0;
                    for (i64 i = 0; i < plane; ++i) acc += gp[i] * xp[i];
                    gw->data()[o * xs.c + c] += acc;
                }
                if (gx) {
                    const T wv = w.data()[o * xs.c + c];
                    T* gxp = gx->data() + (n * xs.c + c) * plane;
                    for (i64 i = 0; i < plane; ++i) gxp[i] += wv * gp[i];
                }
            }
        }
}

template <typename T>
Tensor<T> conv3x3(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (ws.h != 3 || ws.w != 3)
        throw ShapeError("conv3x3: weight shape " + ws.str() + " must be (Cout,Cin,3,3)");
    if (ws.c != xs.c)
        throw ShapeError("conv3x3: input has " + std::to_string(xs.c) +
                         " channels, weight expects " + std::to_string(ws.c));
    const i64 cout = ws.n;
    check_bias(b, cout, "conv3x3");

    Tensor<T> out(Shape{xs.n, cout, xs.h, xs.w});
    const i64 H = xs.h, W = xs.w, plane = H * W;
#pragma omp parallel for collapse(2) schedule(static)
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 o = 0; o < cout; ++o) {
            T* op = out.data() + (n * cout + o) * plane;
            const T bias = b.data()[o];
            for (i64 i = 0; i < plane; ++i) op[i] = bias;
            for (i64 c = 0; c < xs.c; ++c) {
                const T* xp = x.data() + (n * xs.c + c) * plane;
                const T* wk = w.data() + (o * xs.c + c) * 9;
                for (i64 h = 0; h < H; ++h) {
                    T* orow = op + h * W;
                    for (i64 ky = 0; ky < 3; ++ky) {
                        const i64 ih = h + ky - 1;
                        if (ih < 0 || ih >= H) continue;
                        const T* xrow = xp + ih * W;
                        for (i64 kx = 0; kx < 3; ++kx) {
                            const T wv = wk[ky * 3 + kx];
                            const i64 lo = std::max<i64>(0, 1 - kx);
                            const i64 hi = std::min<i64>(W, W + 1 - kx);
                            const T* src = xrow + kx - 1;
                            for (i64 x2 = lo; x2 < hi; ++x2) orow[x2] += wv * src[x2];
                        }
                    }
                }
            }
        }
    return out;
}

template <typename T>
void conv3x3_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gout,
                      Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
    const Shape& xs = x.shape();
    const i64 cout = w.shape().n;
    const i64 H = xs.h, W = xs.w, plane = H * W;
    for (i64 n = 0; n < xs.n; ++n)
        for (i64 o = 0; o < cout; ++o) {
            const T* gp = gout.data() + (n * cout + o) * plane;
            if (gb) {
                T acc = 0;
                for (i64 i = 0; i < plane; ++i) acc += gp[i];
                gb->data()[o] += acc;
            }
            for (i64 c = 0; c < xs.c; ++c) {
                const T* xp = x.data() + (n * xs.c + c) * plane;
                const T* wk = w.data() + (o * xs.c + c) * 9;
                T* gwk = gw ? gw->data() + (o * xs.c + c) * 9 : nullptr;
                T* gxp = gx ? gx->data() + (n * xs.c + c) * plane : nullptr;
                for (i64 h = 0; h < H; ++h) {
                    const T* grow = gp + h * W;
                    for (i64 ky = 0; ky < 3; ++ky) {
                        const i64 ih = h + ky - 1;
                        if (ih < 0 || ih >= H) continue;
                        for (i64 kx = 0; kx < 3; ++kx) {
                            const i64 lo = std::max<i64>(0, 1 - kx);
                            const i64 hi = std::min<i64>(W, W + 1 - kx);
                            if (gwk) {
                                const T* xrow = xp + ih * W + kx - 1;
                                T acc = 0;
                                for (i64 x2 = lo; x2 < hi; ++x2) acc += grow[x2] * xrow[x2];
                                gwk[ky * 3 + kx] += acc;
                            }
                            if (gxp) {
                                const T wv = wk[ky * 3 + kx];
                                T* gxrow = gxp + ih * W + kx - 1;
                                for (i64 x2 = lo; x2 < hi; ++x2) gxrow[x2] += wv * grow[x2];
                            }
                        }
                    }
                }
            }
        }
}

namespace {
template <typename T>
inline T gauss_cdf(T x) {
    return static_cast<T>(0.5) * std::erfc(-x * static_cast<T>(0.70710678118654752440));
}
template <typename T>
inline T gauss_pdf(T x) {
    return std::exp(static_cast<T>(-0.5) * x * x) * static_cast<T>(0.39894228040143267794);
}
} // namespace

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) {
        const T v = x.data()[i];
        out.data()[i] = v * gauss_cdf(v);
    }
    return out;
}

template <typename T>
void gelu_backward(const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>* gx) {
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) {
        const T v = x.data()[i];
        gx->data()[i] += gout.data()[i] * (gauss_cdf(v) + v * gauss_pdf(v));
    }
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) out.data()[i] = std::max(T(0), x.data()[i]);
    return out;
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>* gx) {
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i)
        if (x.data()[i] > T(0)) gx->data()[i] += gout.data()[i];
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const i64 n = x.numel();
    for (i64 i = 0; i < n; ++i) out.data()[i] = T(1) / (T(1) + std::exp(-x.data()[i]));
    return out;
}

template <typename T>
void sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gout, Tensor<T>* gx) {
    const i64 n = y.numel();
    for (i64 i = 0; i < n; ++i) {
        const T s = y.data()[i];
        gx->data()[i] += gout.data()[i] * s * (T(1) - s);
    }
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
    const Shape& s = x.shape();
    if (gamma.numel() != s.c || beta.numel() != s.c)
        throw ShapeError("layer_norm: affine parameters must have length C=" +
                         std::to_string(s.c));
    Tensor<T> out(s);
    const i64 plane = s.h * s.w;
    const T inv_c = T(1) / static_cast<T>(s.c);
#pragma omp parallel for schedule(static)
    for (i64 n = 0; n < s.n; ++n) {
        const T* xb = x.data() + n * s.c * plane;
        T* ob = out.data() + n * s.c * plane;
        for (i64 i = 0; i < plane; ++i) {
            T mean = 0;
            for (i64 c = 0; c < s.c; ++c) mean += xb[c * plane + i];
            mean *= inv_c;
            T var = 0;
            for (i64 c = 0; c < s.c; ++c) {
                const T d = xb[c * plane + i] - mean;
                var += d * d;
            }
            var *= inv_c;
            const T inv_std = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
            for (i64 c = 0; c < s.c; ++c)
                ob[c * plane + i] =
                    (xb[c * plane + i] - mean) * inv_std * gamma.data()[c] + beta.data()[c];
        }
    }
    return out;
}

template <typename T>
void layer_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& gout,
                         Tensor<T>* gx, Tensor<T>* ggamma, Tensor<T>* gbeta) {
    const Shape& s = x.shape();
    const i64 plane = s.h * s.w;
    const T inv_c = T(1) / static_cast<T>(s.c);
    for (i64 n = 0; n < s.n; ++n) {
        const T* xb = x.data() + n * s.c * plane;
        const T* gb = gout.data() + n * s.c * plane;
        for (i64 i = 0; i < plane; ++i) {
            T mean = 0;
            for (i64 c = 0; c < s.c; ++c) mean += xb[c * plane + i];
            mean *= inv_c;
            T var = 0;
            for (i64 c = 0; c < s.c; ++c) {
                const T d = xb[c * plane + i] - mean;
                var += d * d;
            }
            var *= inv_c;
            const T inv_std = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));

            // ghat = gout*gamma; gx = inv_std*(ghat - mean(ghat) - xhat*mean(ghat*xhat))
            T mean_g = 0, mean_gx = 0;
            for (i64 c = 0; c < s.c; ++c) {
                const T xhat = (xb[c * plane + i] - mean) * inv_std;
                const T gh = gb[c * plane + i] * gamma.data()[c];
                mean_g += gh;
                mean_gx += gh * xhat;
            }
            mean_g *= inv_c;
            mean_gx *= inv_c;
            for (i64 c = 0; c < s.c; ++c) {
                const T xhat = (xb[c * plane + i] - mean) * inv_std;
                const T gh = gb[c * plane + i] * gamma.data()[c];
                if (gx) gx->data()[(n * s.c + c) * plane + i] += inv_std * (gh - mean_g - xhat * mean_gx);
                if (ggamma) ggamma->data()[c] += gb[c * plane + i] * xhat;
                if (gbeta) gbeta->data()[c] += gb[c * plane + i];
            }
        }
    }
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    const Shape& s = x.shape();
    Tensor<T> out(Shape{s.n, s.c, 1, 1});
    const i64 plane = s.h * s.w;
    const T inv = T(1) / static_cast<T>(plane);
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c) {
            const T* xp = x.data() + (n * s.c + c) * plane;
            T acc = 0;
            for (i64 i = 0; i < plane; ++i) acc += xp[i];
            out.at(n, c, 0, 0) = acc * inv;
        }
    return out;
}

template <typename T>
void global_avg_pool_backward(const Shape& in_shape, const Tensor<T>& gout, Tensor<T>* gx) {
    const i64 plane = in_shape.h * in_shape.w;
    const T inv = T(1) / static_cast<T>(plane);
    for (i64 n = 0; n < in_shape.n; ++n)
        for (i64 c = 0; c < in_shape.c; ++c) {
            const T g = gout.at(n, c, 0, 0) * inv;
            T* gp = gx->data() + (n * in_shape.c + c) * plane;
            for (i64 i = 0; i < plane; ++i) gp[i] += g;
        }
}

template <typename T>
void interpolate_backward(const Shape& in_shape, const Tensor<T>& gout, Interp mode,
                          Tensor<T>* gx) {
    const Shape& os = gout.shape();
    if (os.h == in_shape.h && os.w == in_shape.w) {
        const i64 n = gout.numel();
        for (i64 i = 0; i < n; ++i) gx->data()[i] += gout.data()[i];
        return;
    }
    const double scale_h = static_cast<double>(in_shape.h) / static_cast<double>(os.h);
    const double scale_w = static_cast<double>(in_shape.w) / static_cast<double>(os.w);

    for (i64 n = 0; n < os.n; ++n)
        for (i64 c = 0; c < os.c; ++c)
            for (i64 y = 0; y < os.h; ++y) {
                double sy = (static_cast<double>(y) + 0.5) * scale_h - 0.5;
                for (i64 x = 0; x < os.w; ++x) {
                    double sx = (static_cast<double>(x) + 0.5) * scale_w - 0.5;
                    const T g = gout.at(n, c, y, x);
                    if (mode == Interp::Nearest) {
                        i64 iy = std::clamp<i64>(static_cast<i64>(std::floor(sy)), 0, in_shape.h - 1);
                        i64 ix = std::clamp<i64>(static_cast<i64>(std::floor(sx)), 0, in_shape.w - 1);
                        gx->at(n, c, iy, ix) += g;
                        continue;
                    }
                    double fly = std::floor(sy), flx = std::floor(sx);
                    T fy = static_cast<T>(sy - fly), fx = static_cast<T>(sx - flx);
                    i64 y0 = std::clamp<i64>(static_cast<i64>(fly), 0, in_shape.h - 1);
                    i64 y1 = std::clamp<i64>(static_cast<i64>(fly) + 1, 0, in_shape.h - 1);
                    i64 x0 = std::clamp<i64>(static_cast<i64>(flx), 0, in_shape.w - 1);
                    i64 x1 = std::clamp<i64>(static_cast<i64>(flx) + 1, 0, in_shape.w - 1);
                    if (y0 == y1) fy = 0;
                    if (x0 == x1) fx = 0;
                    gx->at(n, c, y0, x0) += g * (T(1) - fy) * (T(1) - fx);
                    gx->at(n, c, y0, x1) += g * (T(1) - fy) * fx;
                    gx->at(n, c, y1, x0) += g * fy * (T(1) - fx);
                    gx->at(n, c, y1, x1) += g * fy * fx;
                }
            }
}

template <typename T>
T l1_loss_value(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target))
        throw ShapeError("l1_loss: shapes " + pred.shape().str() + " and " +
                         target.shape().str() + " differ");
    const i64 n = pred.numel();
    T acc = 0;
    for (i64 i = 0; i < n; ++i) acc += std::abs(pred.data()[i] - target.data()[i]);
    return acc / static_cast<T>(n);
}

template <typename T>
void l1_loss_backward(const Tensor<T>& pred, const Tensor<T>& target, T gout_scalar,
                      Tensor<T>* gpred) {
    const i64 n = pred.numel();
    const T g = gout_scalar / static_cast<T>(n);
    for (i64 i = 0; i < n; ++i) {
        const T d = pred.data()[i] - target.data()[i];
        // subgradient 0 at ties
        if (d > T(0))
            gpred->data()[i] += g;
        else if (d < T(0))
            gpred->data()[i] -= g;
    }
}

#define MIXNET_INSTANTIATE(T)                                                                  \
    template Tensor<T> conv1x1<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
    template Tensor<T> conv3x3<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
    template Tensor<T> gelu<T>(const Tensor<T>&);                                             \
    template Tensor<T> relu<T>(const Tensor<T>&);                                             \
    template Tensor<T> sigmoid<T>(const Tensor<T>&);                                          \
    template Tensor<T> layer_norm<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
    template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                  \
    template T l1_loss_value<T>(const Tensor<T>&, const Tensor<T>&);                          \
    template void conv1x1_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                      Tensor<T>*, Tensor<T>*, Tensor<T>*);                    \
    template void conv3x3_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                      Tensor<T>*, Tensor<T>*, Tensor<T>*);                    \
    template void gelu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);          \
    template void relu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);          \
    template void sigmoid_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);       \
    template void layer_norm_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                         Tensor<T>*, Tensor<T>*, Tensor<T>*);                 \
    template void global_avg_pool_backward<T>(const Shape&, const Tensor<T>&, Tensor<T>*);   \
    template void interpolate_backward<T>(const Shape&, const Tensor<T>&, Interp, Tensor<T>*);\
    template void l1_loss_backward<T>(const Tensor<T>&, const Tensor<T>&, T, Tensor<T>*);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

} // namespace mixnet::ops
