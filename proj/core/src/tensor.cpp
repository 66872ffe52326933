#include "mixnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mixnet {

void Shape::validate() const {
    if (n < 1 || c < 1 || h < 1 || w < 1)
        throw ShapeError("all shape extents must be >= 1, got " + str());
    // product must fit without overflow
    __int128 p = static_cast<__int128>(n) * c * h * w;
    if (p > std::numeric_limits<i64>::max() / static_cast<i64>(sizeof(double)))
        throw ShapeError("shape " + str() + " overflows addressable size");
}

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
}

AxisOrder inverse_order(AxisOrder order) {
    AxisOrder inv{};
    for (int i = 0; i < 3; ++i) inv[static_cast<int>(order[i])] = static_cast<Axis>(i);
    return inv;
}

static void check_order(AxisOrder order) {
    bool seen[3] = {false, false, false};
    for (Axis a : order) {
        int idx = static_cast<int>(a);
        if (idx < 0 || idx > 2 || seen[idx])
            throw ConfigError("axis order is not a permutation of {C,H,W}");
        seen[idx] = true;
    }
}

template <typename T>
Tensor<T> permute(const Tensor<T>& t, AxisOrder order) {
    check_order(order);
    const Shape& s = t.shape();
    const i64 ext[3] = {s.c, s.h, s.w};
    const i64 o0 = static_cast<i64>(order[0]);
    const i64 o1 = static_cast<i64>(order[1]);
    const i64 o2 = static_cast<i64>(order[2]);
    Shape os{s.n, ext[o0], ext[o1], ext[o2]};
    Tensor<T> out(os);

    const i64 in_stride[3] = {s.h * s.w, s.w, 1};
    const i64 st0 = in_stride[o0];
    const i64 st1 = in_stride[o1];
    const i64 st2 = in_stride[o2];
    const i64 plane = s.c * s.h * s.w;

    T* op = out.data();
    const T* ip = t.data();
    for (i64 n = 0; n < s.n; ++n) {
        const T* base = ip + n * plane;
        for (i64 a = 0; a < os.c; ++a)
            for (i64 b = 0; b < os.h; ++b) {
                const T* row = base + a * st0 + b * st1;
                for (i64 c = 0; c < os.w; ++c) *op++ = row[c * st2];
            }
    }
    return out;
}

template <typename T>
Tensor<T> interpolate(const Tensor<T>& t, i64 target_h, i64 target_w, Interp mode) {
    if (target_h < 1 || target_w < 1)
        throw ShapeError("interpolate target extents must be >= 1");
    const Shape& s = t.shape();
    if (target_h == s.h && target_w == s.w) return t;

    Tensor<T> out(Shape{s.n, s.c, target_h, target_w});
    const double scale_h = static_cast<double>(s.h) / static_cast<double>(target_h);
    const double scale_w = static_cast<double>(s.w) / static_cast<double>(target_w);

    if (mode == Interp::Nearest) {
        std::vector<i64> sx(static_cast<std::size_t>(target_w));
        for (i64 x = 0; x < target_w; ++x) {
            i64 v = static_cast<i64>(std::floor((static_cast<double>(x) + 0.5) * scale_w - 0.5));
            sx[static_cast<std::size_t>(x)] = std::clamp<i64>(v, 0, s.w - 1);
        }
        for (i64 n = 0; n < s.n; ++n)
            for (i64 c = 0; c < s.c; ++c)
                for (i64 y = 0; y < target_h; ++y) {
                    i64 v = static_cast<i64>(std::floor((static_cast<double>(y) + 0.5) * scale_h - 0.5));
                    i64 sy = std::clamp<i64>(v, 0, s.h - 1);
                    for (i64 x = 0; x < target_w; ++x)
                        out.at(n, c, y, x) = t.at(n, c, sy, sx[static_cast<std::size_t>(x)]);
                }
        return out;
    }

    // bilinear, lerp form: row = a + fx*(b-a); v = row0 + fy*(row1-row0)
    struct Tap { i64 i0, i1; T f; };
    std::vector<Tap> tx(static_cast<std::size_t>(target_w)), ty(static_cast<std::size_t>(target_h));
    auto make_tap = [](i64 dst, double sc, i64 src_extent) {
        double src = (static_cast<double>(dst) + 0.5) * sc - 0.5;
        double fl = std::floor(src);
        i64 i0 = static_cast<i64>(fl);
        double f = src - fl;
        i64 j0 = std::clamp<i64>(i0, 0, src_extent - 1);
        i64 j1 = std::clamp<i64>(i0 + 1, 0, src_extent - 1);
        if (j0 == j1) f = 0.0;
        return Tap{j0, j1, static_cast<T>(f)};
    };
    for (i64 x = 0; x < target_w; ++x) tx[static_cast<std::size_t>(x)] = make_tap(x, scale_w, s.w);
    for (i64 y = 0; y < target_h; ++y) ty[static_cast<std::size_t>(y)] = make_tap(y, scale_h, s.h);

    const i64 planes = s.n * s.c;
#pragma omp parallel for schedule(static)
    for (i64 p = 0; p < planes; ++p) {
        const T* src = t.data() + p * s.h * s.w;
        T* dst = out.data() + p * target_h * target_w;
        for (i64 y = 0; y < target_h; ++y) {
            const Tap& tyv = ty[static_cast<std::size_t>(y)];
            const T* r0 = src + tyv.i0 * s.w;
            const T* r1 = src + tyv.i1 * s.w;
            for (i64 x = 0; x < target_w; ++x) {
                const Tap& txv = tx[static_cast<std::size_t>(x)];
                T a = r0[txv.i0], b = r0[txv.i1];
                T c = r1[txv.i0], d = r1[txv.i1];
                T top = a + txv.f * (b - a);
                T bot = c + txv.f * (d - c);
                *dst++ = top + tyv.f * (bot - top);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
        throw ShapeError("concat_channels operands disagree on batch/spatial extents: " +
                         sa.str() + " vs " + sb.str());
    Tensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    const i64 pa = sa.c * sa.h * sa.w;
    const i64 pb = sb.c * sb.h * sb.w;
    for (i64 n = 0; n < sa.n; ++n) {
        std::copy_n(a.data() + n * pa, pa, out.data() + n * (pa + pb));
        std::copy_n(b.data() + n * pb, pb, out.data() + n * (pa + pb) + pa);
    }
    return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, i64 first, i64 count) {
    const Shape& s = t.shape();
    if (first < 0 || count < 1 || first + count > s.c)
        throw ShapeError("channel slice [" + std::to_string(first) + "," +
                         std::to_string(first + count) + ") out of range for " + s.str());
    Tensor<T> out(Shape{s.n, count, s.h, s.w});
    const i64 plane = s.h * s.w;
    for (i64 n = 0; n < s.n; ++n)
        std::copy_n(t.data() + (n * s.c + first) * plane, count * plane,
                    out.data() + n * count * plane);
    return out;
}

template <typename T>
static bool broadcastable(const Shape& a, const Shape& b) {
    return a.n == b.n && a.c == b.c && b.h == 1 && b.w == 1;
}

template <typename T, typename F>
static Tensor<T> ew_binary(const Tensor<T>& a, const Tensor<T>& b, F f, const char* name) {
    if (a.same_shape(b)) {
        Tensor<T> out(a.shape());
        const T* pa = a.data();
        const T* pb = b.data();
        T* po = out.data();
        const i64 n = a.numel();
        for (i64 i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
        return out;
    }
    if (broadcastable<T>(a.shape(), b.shape())) {
        const Shape& s = a.shape();
        Tensor<T> out(s);
        const i64 plane = s.h * s.w;
        for (i64 n = 0; n < s.n; ++n)
            for (i64 c = 0; c < s.c; ++c) {
                const T bv = b.at(n, c, 0, 0);
                const T* pa = a.data() + (n * s.c + c) * plane;
                T* po = out.data() + (n * s.c + c) * plane;
                for (i64 i = 0; i < plane; ++i) po[i] = f(pa[i], bv);
            }
        return out;
    }
    throw ShapeError(std::string(name) + ": shapes " + a.shape().str() + " and " +
                     b.shape().str() + " are not broadcastable");
}

template <typename T>
Tensor<T> ew_mul(const Tensor<T>& a, const Tensor<T>& b) {
    return ew_binary(a, b, [](T x, T y) { return x * y; }, "ew_mul");
}

template <typename T>
Tensor<T> ew_add(const Tensor<T>& a, const Tensor<T>& b) {
    return ew_binary(a, b, [](T x, T y) { return x + y; }, "ew_add");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    Tensor<T> out(a.shape());
    const i64 n = a.numel();
    for (i64 i = 0; i < n; ++i) out.data()[i] = a.data()[i] * factor;
    return out;
}

template <typename T>
Tensor<T> space_to_channels(const Tensor<T>& x, i64 d) {
    if (d < 1) throw ConfigError("downsample factor must be >= 1");
    if (d == 1) return x;
    const Shape& s = x.shape();
    if (s.h % d != 0 || s.w % d != 0)
        throw ShapeError("input extents " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                        " must be divisible by the downsample factor " + std::to_string(d));
    Tensor<T> out(Shape{s.n, s.c * d * d, s.h / d, s.w / d});
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 dy = 0; dy < d; ++dy)
                for (i64 dx = 0; dx < d; ++dx) {
                    const i64 oc = (c * d + dy) * d + dx;
                    for (i64 h = 0; h < s.h / d; ++h)
                        for (i64 w = 0; w < s.w / d; ++w)
                            out.at(n, oc, h, w) = x.at(n, c, h * d + dy, w * d + dx);
                }
    return out;
}

template <typename T>
Tensor<T> channels_to_space(const Tensor<T>& x, i64 d) {
    if (d < 1) throw ConfigError("downsample factor must be >= 1");
    if (d == 1) return x;
    const Shape& s = x.shape();
    if (s.c % (d * d) != 0)
        throw ShapeError("channel extent " + std::to_string(s.c) +
                         " is not divisible by d^2 = " + std::to_string(d * d));
    Tensor<T> out(Shape{s.n, s.c / (d * d), s.h * d, s.w * d});
    const Shape& os = out.shape();
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < os.c; ++c)
            for (i64 dy = 0; dy < d; ++dy)
                for (i64 dx = 0; dx < d; ++dx) {
                    const i64 ic = (c * d + dy) * d + dx;
                    for (i64 h = 0; h < s.h; ++h)
                        for (i64 w = 0; w < s.w; ++w)
                            out.at(n, c, h * d + dy, w * d + dx) = x.at(n, ic, h, w);
                }
    return out;
}

#define MIXNET_INSTANTIATE(T)                                                        \
    template Tensor<T> permute<T>(const Tensor<T>&, AxisOrder);                     \
    template Tensor<T> space_to_channels<T>(const Tensor<T>&, i64);                 \
    template Tensor<T> channels_to_space<T>(const Tensor<T>&, i64);                 \
    template Tensor<T> interpolate<T>(const Tensor<T>&, i64, i64, Interp);          \
    template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);      \
    template Tensor<T> slice_channels<T>(const Tensor<T>&, i64, i64);               \
    template Tensor<T> ew_mul<T>(const Tensor<T>&, const Tensor<T>&);               \
    template Tensor<T> ew_add<T>(const Tensor<T>&, const Tensor<T>&);               \
    template Tensor<T> scale<T>(const Tensor<T>&, T);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

} // namespace mixnet
