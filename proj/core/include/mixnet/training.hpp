#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mixnet/model.hpp"

namespace mixnet {

struct TrainConfig {
    double lr0 = 2e-4;
    double lr_min = 1e-6;
    i64 total_iters = 300000;
    i64 batch_size = 24;
    i64 crop = 512;
    std::uint64_t seed = 0;
    i64 log_interval = 100;
    i64 checkpoint_interval = 5000;

    void validate(const ModelConfig& model) const;
};

template <typename T>
struct ImagePair {
    std::string id;
    Tensor<T> degraded; // (1,3,H,W) in [0,1]
    Tensor<T> clean;    // same extents
};

// Bias-corrected Adam, beta1=0.9, beta2=0.999, eps=1e-8. Moment tensors are
// kept in the same order as the WeightStore they update.
template <typename T>
struct AdamState {
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    i64 step = 0;

    static AdamState init_for(const std::vector<Parameter<T>>& params);
};

double cosine_lr(i64 iter, const TrainConfig& cfg);

// Applies one update using each parameter's accumulated gradient.
template <typename T>
void adam_step(std::vector<Parameter<T>>& params, AdamState<T>& state, double lr);

// Copies parameter values back into a store with matching names.
template <typename T>
void sync_store(const std::vector<Parameter<T>>& params, WeightStore<T>& store);

// Same crop window and flip decisions for both members of each pair.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> sample_batch(const std::vector<ImagePair<T>>& dataset,
                                             const TrainConfig& cfg, std::mt19937_64& rng);

// RNG used for iteration `iter`; counter-based so a resumed run draws the
// same samples as the uninterrupted one.
std::mt19937_64 iter_rng(std::uint64_t seed, i64 iter);

template <typename T>
void save_checkpoint(const WeightStore<T>& weights, const AdamState<T>& state,
                     const std::string& path);

template <typename T>
void load_checkpoint(const std::string& path, WeightStore<T>& weights, AdamState<T>& state,
                     const ModelConfig& cfg);

struct TrainResult {
    double final_loss = 0.0;
    std::vector<std::pair<i64, double>> loss_log; // (iter, loss), one per iteration
};

// Runs the full recipe: sample -> forward -> L1 -> backward -> Adam with the
// cosine schedule. Writes checkpoints plus an append-only loss log under
// checkpoint_dir (empty string disables both). Aborts on non-finite loss.
template <typename T>
TrainResult train_loop(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const std::vector<ImagePair<T>>& dataset,
                       const std::string& checkpoint_dir, WeightStore<T>& weights,
                       std::optional<std::string> resume_checkpoint = std::nullopt);

} // namespace mixnet
