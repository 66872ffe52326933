#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mixnet/errors.hpp"

namespace mixnet {

using i64 = std::int64_t;

struct Shape {
    i64 n = 1;
    i64 c = 1;
    i64 h = 1;
    i64 w = 1;

    i64 numel() const { return n * c * h * w; }

    bool operator==(const Shape& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    // Throws unless all extents are >= 1 and the element count fits in i64.
    void validate() const;

    std::string str() const;
};

// Non-batch axes, named by their canonical (N,C,H,W) position.
enum class Axis { C = 0, H = 1, W = 2 };

// output axis i takes the input axis order[i]; the batch axis never moves
using AxisOrder = std::array<Axis, 3>;

inline constexpr AxisOrder kIdentityOrder{Axis::C, Axis::H, Axis::W};
// The GFML 3-cycle: (C,H,W) -> (W,C,H). Applied three times it is the identity.
inline constexpr AxisOrder kCycleOrder{Axis::W, Axis::C, Axis::H};

AxisOrder inverse_order(AxisOrder order);

// Dense rank-4 array in contiguous row-major (N,C,H,W) order.
// Value semantics throughout; no op mutates its inputs.
template <typename T>
class Tensor {
public:
    Tensor() { shape_.validate(); data_.resize(1, T(0)); }

    explicit Tensor(Shape s) : shape_(s) {
        shape_.validate();
        data_.resize(static_cast<std::size_t>(shape_.numel()), T(0));
    }

    Tensor(Shape s, T fill) : shape_(s) {
        shape_.validate();
        data_.resize(static_cast<std::size_t>(shape_.numel()), fill);
    }

    Tensor(Shape s, std::vector<T> values) : shape_(s), data_(std::move(values)) {
        shape_.validate();
        if (static_cast<i64>(data_.size()) != shape_.numel())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
    }

    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor full(Shape s, T v) { return Tensor(s, v); }

    const Shape& shape() const { return shape_; }
    i64 numel() const { return static_cast<i64>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& at(i64 n, i64 c, i64 h, i64 w) {
        return data_[static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w)];
    }
    T at(i64 n, i64 c, i64 h, i64 w) const {
        return data_[static_cast<std::size_t>(((n * shape_.c + c) * shape_.h + h) * shape_.w + w)];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (i64 i = 0; i < numel(); ++i) out.data()[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

// --- tensor-core operations -------------------------------------------------

template <typename T>
Tensor<T> permute(const Tensor<T>& t, AxisOrder order);

enum class Interp { Bilinear, Nearest };

// Half-pixel-center (align-corners=false) resampling. The bilinear path uses
// the lerp form, which is exact on constant inputs.
template <typename T>
Tensor<T> interpolate(const Tensor<T>& t, i64 target_h, i64 target_w, Interp mode);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, i64 first, i64 count);

// Elementwise ops. b may either match a's shape or be (N,C,1,1), in which
// case it broadcasts over H and W.
template <typename T>
Tensor<T> ew_mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> ew_add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

// Exactly invertible space<->channel rearrangement by factor d.
// out[n, (c*d + dy)*d + dx, h, w] = in[n, c, h*d + dy, w*d + dx]
template <typename T>
Tensor<T> space_to_channels(const Tensor<T>& x, i64 d);

template <typename T>
Tensor<T> channels_to_space(const Tensor<T>& x, i64 d);

} // namespace mixnet
