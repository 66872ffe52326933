#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mixnet/blocks.hpp"
#include "mixnet/tensor.hpp"

namespace mixnet {

struct ModelConfig {
    i64 num_fmb = 8;
    i64 channels = 48;        // C
    i64 gfml_size = 64;       // S, internal mixing grid
    i64 lfml_reduction = 4;   // r, must divide C
    i64 downsample_factor = 2; // d
    BlockToggles toggles;

    void validate() const;
};

// Ordered named tensor table; iteration order is the schema order.
template <typename T>
class WeightStore {
public:
    void add(std::string name, Tensor<T> value);
    bool has(const std::string& name) const;
    Tensor<T>& at(const std::string& name);
    const Tensor<T>& at(const std::string& name) const;

    std::size_t size() const { return items_.size(); }
    i64 scalar_count() const;

    std::vector<std::pair<std::string, Tensor<T>>>& items() { return items_; }
    const std::vector<std::pair<std::string, Tensor<T>>>& items() const { return items_; }

private:
    std::vector<std::pair<std::string, Tensor<T>>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Canonical name -> shape layout generated by a config.
std::vector<std::pair<std::string, Shape>> weight_schema(const ModelConfig& cfg);

// Closed-form learnable-scalar count; must equal the constructed store's count.
i64 param_count(const ModelConfig& cfg);

// Per-module breakdown for reporting: (module name, scalar count).
std::vector<std::pair<std::string, i64>> param_count_by_module(const ModelConfig& cfg);

// Kaiming-uniform conv weights (bound sqrt(6/fan_in)), zero biases,
// LN gamma=1 / beta=0. Deterministic given seed.
template <typename T>
WeightStore<T> init_weights(const ModelConfig& cfg, std::uint64_t seed);

// "MIXW" container, version 1, little-endian, float32 payload.
template <typename T>
void save_weights(const WeightStore<T>& store, const std::string& path);

template <typename T>
WeightStore<T> load_weights(const std::string& path);

// Load and validate that the name/shape set matches cfg's schema exactly.
template <typename T>
WeightStore<T> load_weights(const std::string& path, const ModelConfig& cfg);

template <typename T>
Tensor<T> downsampler(const Tensor<T>& x, const WeightStore<T>& w, const ModelConfig& cfg);

template <typename T>
Tensor<T> upsampler(const Tensor<T>& f, const WeightStore<T>& w, const ModelConfig& cfg);

// Full network, inference path. Output is not clamped.
template <typename T>
Tensor<T> forward(const Tensor<T>& x, const WeightStore<T>& w, const ModelConfig& cfg);

// Pushes every store entry onto a tape as a Parameter-bound leaf and exposes
// the bound Vars by name. The Parameter objects live in `params`.
template <typename T>
struct TapedWeights {
    TapedWeights(Tape<T>& tape, std::vector<Parameter<T>>& params);

    Var at(const std::string& name) const;
    std::unordered_map<std::string, Var> vars;
};

// Builds the Parameter list (in schema order) from a store.
template <typename T>
std::vector<Parameter<T>> make_parameters(const WeightStore<T>& store);

// Full network, taped training path. Bitwise-identical values to the plain
// forward for the same weights and input.
template <typename T>
Var forward(Tape<T>& tape, Var x, const TapedWeights<T>& w, const ModelConfig& cfg);

} // namespace mixnet
