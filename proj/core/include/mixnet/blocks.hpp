#pragma once

#include "mixnet/autograd.hpp"
#include "mixnet/ops.hpp"
#include "mixnet/tensor.hpp"

namespace mixnet {

// Parameter bundles are generic over the handle type: Tensor<T> for the plain
// inference path, Var for the taped training path.

template <typename H>
struct GfmlParams {
    H conv_c_w, conv_c_b; // (C,C,1,1), (1,C,1,1)
    H conv_w_w, conv_w_b; // (S,S,1,1), (1,S,1,1)
    H conv_h_w, conv_h_b; // (S,S,1,1), (1,S,1,1)
};

template <typename H>
struct LfmlParams {
    H reduce_w, reduce_b; // (C/r,C,1,1), (1,C/r,1,1)
    H expand_w, expand_b; // (C,C/r,1,1), (1,C,1,1)
};

template <typename H>
struct FflParams {
    H conv3_w, conv3_b; // (2C,C,3,3), (1,2C,1,1)
    H conv1_w, conv1_b; // (C,2C,1,1), (1,C,1,1)
};

template <typename H>
struct FmbParams {
    H ln1_gamma, ln1_beta; // (1,C,1,1)
    H ln2_gamma, ln2_beta;
    GfmlParams<H> gfml;
    LfmlParams<H> lfml;
    H fuse_w, fuse_b; // (C,2C,1,1), (1,C,1,1)
    FflParams<H> ffl;
};

// Which GFML mixing stages to run; the default runs all three. After the
// enabled stages, layout is rotated back to canonical (C,H,W).
inline constexpr unsigned kAllGfmlStages = 0b111;

// Per-block toggles. A disabled branch behaves as the identity on its input.
struct BlockToggles {
    bool gfml = true;
    bool lfml = true;
    bool ffl = true;
    unsigned gfml_stages = kAllGfmlStages;
};

// --- plain forwards ----------------------------------------------------------

template <typename T>
Tensor<T> gfml_forward(const Tensor<T>& x, const GfmlParams<Tensor<T>>& p, i64 internal_size,
                       unsigned stage_mask = kAllGfmlStages);

template <typename T>
Tensor<T> lfml_forward(const Tensor<T>& x, const LfmlParams<Tensor<T>>& p);

template <typename T>
Tensor<T> ffl_forward(const Tensor<T>& x, const FflParams<Tensor<T>>& p);

template <typename T>
Tensor<T> fmb_forward(const Tensor<T>& x, const FmbParams<Tensor<T>>& p, i64 internal_size,
                      const BlockToggles& toggles = {});

// --- taped forwards ----------------------------------------------------------

template <typename T>
Var gfml_forward(Tape<T>& tape, Var x, const GfmlParams<Var>& p, i64 internal_size,
                 unsigned stage_mask = kAllGfmlStages);

template <typename T>
Var lfml_forward(Tape<T>& tape, Var x, const LfmlParams<Var>& p);

template <typename T>
Var ffl_forward(Tape<T>& tape, Var x, const FflParams<Var>& p);

template <typename T>
Var fmb_forward(Tape<T>& tape, Var x, const FmbParams<Var>& p, i64 internal_size,
                const BlockToggles& toggles = {});

} // namespace mixnet
