#pragma once

#include <optional>

#include "mixnet/model.hpp"

namespace mixnet {

struct TileSpec {
    i64 tile = 512;
    i64 overlap = 64; // default tile/8

    void validate(i64 downsample_factor) const;
};

// Reflective (mirror, edge excluded) padding on the bottom/right so both
// extents become divisible by `factor`.
template <typename T>
Tensor<T> reflect_pad_to_multiple(const Tensor<T>& x, i64 factor);

// Whole-image restoration: pad to divisibility, forward, crop back.
// No clamping; callers clamp at image-export time.
template <typename T>
Tensor<T> restore_image(const Tensor<T>& x, const WeightStore<T>& w, const ModelConfig& cfg);

// Overlapping tiles blended by linear feathering in the overlap band.
// Approximate for globally-gated models: each tile sees only its own crop.
template <typename T>
Tensor<T> restore_image_tiled(const Tensor<T>& x, const WeightStore<T>& w,
                              const ModelConfig& cfg, const TileSpec& spec);

} // namespace mixnet
