#include "mixnet/infer.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mixnet/errors.hpp"

namespace mixnet {

void TileSpec::validate(i64 downsample_factor) const {
    if (tile <= 0) throw UsageError("tile must be positive, got " + std::to_string(tile));
    if (overlap < 0 || overlap >= tile)
        throw UsageError("overlap must be in [0, tile), got " + std::to_string(overlap));
    if (tile % downsample_factor != 0)
        throw UsageError("tile " + std::to_string(tile) + " is not divisible by the model factor " +
                         std::to_string(downsample_factor));
}

template <typename T>
Tensor<T> reflect_pad_to_multiple(const Tensor<T>& x, i64 factor) {
    const Shape s = x.shape();
    const i64 ph = (factor - s.h % factor) % factor;
    const i64 pw = (factor - s.w % factor) % factor;
    if (ph == 0 && pw == 0) return x;
    if (ph >= s.h || pw >= s.w)
        throw ShapeError("image " + s.str() + " too small to pad to a multiple of " +
                         std::to_string(factor));
    Tensor<T> out(Shape{s.n, s.c, s.h + ph, s.w + pw});
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 y = 0; y < s.h + ph; ++y) {
                const i64 sy = y < s.h ? y : 2 * s.h - 2 - y;
                for (i64 xw = 0; xw < s.w + pw; ++xw) {
                    const i64 sx = xw < s.w ? xw : 2 * s.w - 2 - xw;
                    out.at(n, c, y, xw) = x.at(n, c, sy, sx);
                }
            }
    return out;
}

namespace {

template <typename T>
Tensor<T> crop_hw(const Tensor<T>& x, i64 y0, i64 x0, i64 h, i64 w) {
    const Shape s = x.shape();
    Tensor<T> out(Shape{s.n, s.c, h, w});
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 y = 0; y < h; ++y)
                for (i64 xw = 0; xw < w; ++xw)
                    out.at(n, c, y, xw) = x.at(n, c, y0 + y, x0 + xw);
    return out;
}

// Tile start offsets covering [0, size) with the given stride; the last tile
// is shifted left so it ends exactly at the border.
std::vector<i64> tile_starts(i64 size, i64 tile, i64 stride) {
    std::vector<i64> starts;
    for (i64 s = 0;; s += stride) {
        if (s + tile >= size) {
            starts.push_back(std::max<i64>(0, size - tile));
            break;
        }
        starts.push_back(s);
    }
    return starts;
}

// Feather ramp for one axis of one tile: linear in the overlap band against an
// interior neighbour, flat 1 elsewhere.
std::vector<double> feather(i64 tile, i64 overlap, bool ramp_lo, bool ramp_hi) {
    std::vector<double> w(static_cast<std::size_t>(tile), 1.0);
    for (i64 i = 0; i < overlap; ++i) {
        const double t = (i + 1.0) / (overlap + 1.0);
        if (ramp_lo) w[static_cast<std::size_t>(i)] = std::min(w[static_cast<std::size_t>(i)], t);
        if (ramp_hi)
            w[static_cast<std::size_t>(tile - 1 - i)] =
                std::min(w[static_cast<std::size_t>(tile - 1 - i)], t);
    }
    return w;
}

} // namespace

template <typename T>
Tensor<T> restore_image(const Tensor<T>& x, const WeightStore<T>& w, const ModelConfig& cfg) {
    const Shape s = x.shape();
    Tensor<T> padded = reflect_pad_to_multiple(x, cfg.downsample_factor);
    Tensor<T> y = forward(padded, w, cfg);
    if (y.shape().h == s.h && y.shape().w == s.w) return y;
    return crop_hw(y, 0, 0, s.h, s.w);
}

template <typename T>
Tensor<T> restore_image_tiled(const Tensor<T>& x, const WeightStore<T>& w,
                              const ModelConfig& cfg, const TileSpec& spec) {
    spec.validate(cfg.downsample_factor);
    const Shape s = x.shape();
    if (s.h <= spec.tile && s.w <= spec.tile) return restore_image(x, w, cfg);

    const i64 stride = spec.tile - spec.overlap;
    const std::vector<i64> ys = tile_starts(s.h, std::min(spec.tile, s.h), stride);
    const std::vector<i64> xs = tile_starts(s.w, std::min(spec.tile, s.w), stride);
    const i64 th = std::min(spec.tile, s.h);
    const i64 tw = std::min(spec.tile, s.w);

    Tensor<double> acc(Shape{s.n, s.c, s.h, s.w});
    Tensor<double> wsum(Shape{1, 1, s.h, s.w});
    for (std::size_t yi = 0; yi < ys.size(); ++yi) {
        for (std::size_t xi = 0; xi < xs.size(); ++xi) {
            const i64 y0 = ys[yi], x0 = xs[xi];
            Tensor<T> tile = crop_hw(x, y0, x0, th, tw);
            Tensor<T> out = restore_image(tile, w, cfg);
            const std::vector<double> wy = feather(th, spec.overlap, yi > 0, yi + 1 < ys.size());
            const std::vector<double> wx = feather(tw, spec.overlap, xi > 0, xi + 1 < xs.size());
            for (i64 n = 0; n < s.n; ++n)
                for (i64 c = 0; c < s.c; ++c)
                    for (i64 y = 0; y < th; ++y)
                        for (i64 xw = 0; xw < tw; ++xw) {
                            const double wt =
                                wy[static_cast<std::size_t>(y)] * wx[static_cast<std::size_t>(xw)];
                            acc.at(n, c, y0 + y, x0 + xw) += wt * out.at(n, c, y, xw);
                            if (n == 0 && c == 0) wsum.at(0, 0, y0 + y, x0 + xw) += wt;
                        }
        }
    }
    Tensor<T> result(s);
    for (i64 n = 0; n < s.n; ++n)
        for (i64 c = 0; c < s.c; ++c)
            for (i64 y = 0; y < s.h; ++y)
                for (i64 xw = 0; xw < s.w; ++xw)
                    result.at(n, c, y, xw) =
                        static_cast<T>(acc.at(n, c, y, xw) / wsum.at(0, 0, y, xw));
    return result;
}

#define MIXNET_INSTANTIATE(T)                                                                     \
    template Tensor<T> reflect_pad_to_multiple<T>(const Tensor<T>&, i64);                         \
    template Tensor<T> restore_image<T>(const Tensor<T>&, const WeightStore<T>&,                  \
                                        const ModelConfig&);                                      \
    template Tensor<T> restore_image_tiled<T>(const Tensor<T>&, const WeightStore<T>&,            \
                                              const ModelConfig&, const TileSpec&);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

} // namespace mixnet
