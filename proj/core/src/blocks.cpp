#include "mixnet/blocks.hpp"

namespace mixnet {

namespace {
int last_enabled_stage(unsigned mask) {
    int last = -1;
    for (int k = 0; k < 3; ++k)
        if (mask & (1u << k)) last = k;
    if (last < 0) throw ConfigError("GFML stage mask must enable at least one stage");
    return last;
}
} // namespace

template <typename T>
Tensor<T> gfml_forward(const Tensor<T>& x, const GfmlParams<Tensor<T>>& p, i64 internal_size,
                       unsigned stage_mask) {
    if (internal_size < 1) throw ConfigError("GFML internal size must be >= 1");
    const int last = last_enabled_stage(stage_mask);
    const Shape in = x.shape();

    Tensor<T> t = interpolate(x, internal_size, internal_size, Interp::Bilinear);
    const Tensor<T>* ws[3] = {&p.conv_c_w, &p.conv_w_w, &p.conv_h_w};
    const Tensor<T>* bs[3] = {&p.conv_c_b, &p.conv_w_b, &p.conv_h_b};
    int rotations = 0;
    for (int k = 0; k < 3; ++k) {
        if (!(stage_mask & (1u << k))) continue;
        t = ops::conv1x1(t, *ws[k], *bs[k]);
        t = (k == last) ? ops::sigmoid(t) : ops::gelu(t);
        t = permute(t, kCycleOrder);
        ++rotations;
    }
    // the 3-cycle returns to canonical layout after three applications
    while (rotations % 3 != 0) {
        t = permute(t, kCycleOrder);
        ++rotations;
    }
    Tensor<T> gate = interpolate(t, in.h, in.w, Interp::Bilinear);
    return ew_mul(x, gate);
}

template <typename T>
Var gfml_forward(Tape<T>& tape, Var x, const GfmlParams<Var>& p, i64 internal_size,
                 unsigned stage_mask) {
    if (internal_size < 1) throw ConfigError("GFML internal size must be >= 1");
    const int last = last_enabled_stage(stage_mask);
    const Shape in = tape.value(x).shape();

    Var t = tape.interpolate(x, internal_size, internal_size, Interp::Bilinear);
    const Var ws[3] = {p.conv_c_w, p.conv_w_w, p.conv_h_w};
    const Var bs[3] = {p.conv_c_b, p.conv_w_b, p.conv_h_b};
    int rotations = 0;
    for (int k = 0; k < 3; ++k) {
        if (!(stage_mask & (1u << k))) continue;
        t = tape.conv1x1(t, ws[k], bs[k]);
        t = (k == last) ? tape.sigmoid(t) : tape.gelu(t);
        t = tape.permute(t, kCycleOrder);
        ++rotations;
    }
    while (rotations % 3 != 0) {
        t = tape.permute(t, kCycleOrder);
        ++rotations;
    }
    Var gate = tape.interpolate(t, in.h, in.w, Interp::Bilinear);
    return tape.ew_mul(x, gate);
}

template <typename T>
Tensor<T> lfml_forward(const Tensor<T>& x, const LfmlParams<Tensor<T>>& p) {
    Tensor<T> w = ops::global_avg_pool(x);
    w = ops::conv1x1(w, p.reduce_w, p.reduce_b);
    w = ops::relu(w);
    w = ops::conv1x1(w, p.expand_w, p.expand_b);
    w = ops::sigmoid(w);
    return ew_mul(x, w);
}

template <typename T>
Var lfml_forward(Tape<T>& tape, Var x, const LfmlParams<Var>& p) {
    Var w = tape.global_avg_pool(x);
    w = tape.conv1x1(w, p.reduce_w, p.reduce_b);
    w = tape.relu(w);
    w = tape.conv1x1(w, p.expand_w, p.expand_b);
    w = tape.sigmoid(w);
    return tape.ew_mul(x, w);
}

template <typename T>
Tensor<T> ffl_forward(const Tensor<T>& x, const FflParams<Tensor<T>>& p) {
    Tensor<T> t = ops::conv3x3(x, p.conv3_w, p.conv3_b);
    t = ops::gelu(t);
    return ops::conv1x1(t, p.conv1_w, p.conv1_b);
}

template <typename T>
Var ffl_forward(Tape<T>& tape, Var x, const FflParams<Var>& p) {
    Var t = tape.conv3x3(x, p.conv3_w, p.conv3_b);
    t = tape.gelu(t);
    return tape.conv1x1(t, p.conv1_w, p.conv1_b);
}

template <typename T>
Tensor<T> fmb_forward(const Tensor<T>& x, const FmbParams<Tensor<T>>& p, i64 internal_size,
                      const BlockToggles& toggles) {
    // LN(F_in) appears twice with the same argument: computed once, shared.
    Tensor<T> norm1 = ops::layer_norm(x, p.ln1_gamma, p.ln1_beta);
    Tensor<T> g = toggles.gfml ? gfml_forward(norm1, p.gfml, internal_size, toggles.gfml_stages)
                               : norm1;
    Tensor<T> l = toggles.lfml ? lfml_forward(norm1, p.lfml) : norm1;
    Tensor<T> fused = ops::conv1x1(concat_channels(g, l), p.fuse_w, p.fuse_b);
    Tensor<T> fhat = ew_add(fused, x);
    if (!toggles.ffl) return fhat;
    Tensor<T> norm2 = ops::layer_norm(fhat, p.ln2_gamma, p.ln2_beta);
    return ew_add(ffl_forward(norm2, p.ffl), fhat);
}

template <typename T>
Var fmb_forward(Tape<T>& tape, Var x, const FmbParams<Var>& p, i64 internal_size,
                const BlockToggles& toggles) {
    Var norm1 = tape.layer_norm(x, p.ln1_gamma, p.ln1_beta);
    Var g = toggles.gfml ? gfml_forward(tape, norm1, p.gfml, internal_size, toggles.gfml_stages)
                         : norm1;
    Var l = toggles.lfml ? lfml_forward(tape, norm1, p.lfml) : norm1;
    Var fused = tape.conv1x1(tape.concat_channels(g, l), p.fuse_w, p.fuse_b);
    Var fhat = tape.ew_add(fused, x);
    if (!toggles.ffl) return fhat;
    Var norm2 = tape.layer_norm(fhat, p.ln2_gamma, p.ln2_beta);
    return tape.ew_add(ffl_forward(tape, norm2, p.ffl), fhat);
}

#define MIXNET_INSTANTIATE(T)                                                                  \
    template Tensor<T> gfml_forward<T>(const Tensor<T>&, const GfmlParams<Tensor<T>>&, i64,   \
                                       unsigned);                                             \
    template Tensor<T> lfml_forward<T>(const Tensor<T>&, const LfmlParams<Tensor<T>>&);       \
    template Tensor<T> ffl_forward<T>(const Tensor<T>&, const FflParams<Tensor<T>>&);         \
    template Tensor<T> fmb_forward<T>(const Tensor<T>&, const FmbParams<Tensor<T>>&, i64,     \
                                      const BlockToggles&);                                   \
    template Var gfml_forward<T>(Tape<T>&, Var, const GfmlParams<Var>&, i64, unsigned);       \
    template Var lfml_forward<T>(Tape<T>&, Var, const LfmlParams<Var>&);                      \
    template Var ffl_forward<T>(Tape<T>&, Var, const FflParams<Var>&);                        \
    template Var fmb_forward<T>(Tape<T>&, Var, const FmbParams<Var>&, i64, const BlockToggles&);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

} // namespace mixnet
