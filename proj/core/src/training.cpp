#include "mixnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace mixnet {

void TrainConfig::validate(const ModelConfig& model) const {
    if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (crop < 1) throw ConfigError("crop must be >= 1");
    if (crop % model.downsample_factor != 0)
        throw ConfigError("crop " + std::to_string(crop) +
                          " must be divisible by the downsample factor " +
                          std::to_string(model.downsample_factor));
    if (lr0 <= 0 || lr_min < 0 || lr_min > lr0)
        throw ConfigError("require lr0 > 0 and 0 <= lr_min <= lr0");
}

double cosine_lr(i64 iter, const TrainConfig& cfg) {
    if (iter < 0 || iter >= cfg.total_iters)
        throw UsageError("iteration " + std::to_string(iter) + " outside [0, " +
                         std::to_string(cfg.total_iters) + ")");
    if (cfg.total_iters == 1) return cfg.lr0;
    const double phase = M_PI * static_cast<double>(iter) /
                         static_cast<double>(cfg.total_iters - 1);
    return cfg.lr_min + 0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + std::cos(phase));
}

template <typename T>
AdamState<T> AdamState<T>::init_for(const std::vector<Parameter<T>>& params) {
    AdamState<T> s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
        s.m.emplace_back(p.value.shape());
        s.v.emplace_back(p.value.shape());
    }
    return s;
}

template <typename T>
void adam_step(std::vector<Parameter<T>>& params, AdamState<T>& state, double lr) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw UsageError("Adam state does not match parameter list");
    state.step += 1;
    const double b1 = AdamState<T>::beta1, b2 = AdamState<T>::beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter<T>& p = params[k];
        Tensor<T>& m = state.m[k];
        Tensor<T>& v = state.v[k];
        const i64 n = p.value.numel();
        for (i64 i = 0; i < n; ++i) {
            const double g = static_cast<double>(p.grad.data()[i]);
            const double mi = b1 * static_cast<double>(m.data()[i]) + (1.0 - b1) * g;
            const double vi = b2 * static_cast<double>(v.data()[i]) + (1.0 - b2) * g * g;
            m.data()[i] = static_cast<T>(mi);
            v.data()[i] = static_cast<T>(vi);
            const double mhat = mi / corr1;
            const double vhat = vi / corr2;
            p.value.data()[i] = static_cast<T>(static_cast<double>(p.value.data()[i]) -
                                               lr * mhat / (std::sqrt(vhat) + AdamState<T>::eps));
        }
    }
}

template <typename T>
void sync_store(const std::vector<Parameter<T>>& params, WeightStore<T>& store) {
    for (const auto& p : params) store.at(p.name) = p.value;
}

std::mt19937_64 iter_rng(std::uint64_t seed, i64 iter) {
    // splitmix64 over (seed, iter)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(iter) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return std::mt19937_64(z);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> sample_batch(const std::vector<ImagePair<T>>& dataset,
                                             const TrainConfig& cfg, std::mt19937_64& rng) {
    if (dataset.empty()) throw DataError("dataset is empty");
    const i64 crop = cfg.crop;
    Tensor<T> degraded(Shape{cfg.batch_size, 3, crop, crop});
    Tensor<T> clean(Shape{cfg.batch_size, 3, crop, crop});

    std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
    std::uniform_int_distribution<int> coin(0, 1);
    for (i64 b = 0; b < cfg.batch_size; ++b) {
        const ImagePair<T>& pair = dataset[pick(rng)];
        const Shape& s = pair.degraded.shape();
        if (s.h < crop || s.w < crop)
            throw DataError("image \"" + pair.id + "\" (" + std::to_string(s.w) + "x" +
                            std::to_string(s.h) + ") is smaller than the crop size " +
                            std::to_string(crop));
        std::uniform_int_distribution<i64> oy(0, s.h - crop);
        std::uniform_int_distribution<i64> ox(0, s.w - crop);
        const i64 y0 = oy(rng);
        const i64 x0 = ox(rng);
        const bool flip_h = coin(rng) == 1;
        const bool flip_v = coin(rng) == 1;
        for (i64 c = 0; c < 3; ++c)
            for (i64 y = 0; y < crop; ++y) {
                const i64 sy = y0 + (flip_v ? crop - 1 - y : y);
                for (i64 x = 0; x < crop; ++x) {
                    const i64 sx = x0 + (flip_h ? crop - 1 - x : x);
                    degraded.at(b, c, y, x) = pair.degraded.at(0, c, sy, sx);
                    clean.at(b, c, y, x) = pair.clean.at(0, c, sy, sx);
                }
            }
    }
    return {std::move(degraded), std::move(clean)};
}

template <typename T>
void save_checkpoint(const WeightStore<T>& weights, const AdamState<T>& state,
                     const std::string& path) {
    save_weights(weights, path);
    WeightStore<T> opt;
    Tensor<T> step(Shape{1, 1, 1, 1});
    step.data()[0] = static_cast<T>(state.step);
    opt.add("adam.step", std::move(step));
    for (std::size_t k = 0; k < weights.size(); ++k) {
        const std::string& name = weights.items()[k].first;
        opt.add("adam.m." + name, state.m[k]);
        opt.add("adam.v." + name, state.v[k]);
    }
    save_weights(opt, path + ".opt");
}

template <typename T>
void load_checkpoint(const std::string& path, WeightStore<T>& weights, AdamState<T>& state,
                     const ModelConfig& cfg) {
    weights = load_weights<T>(path, cfg);
    WeightStore<T> opt = load_weights<T>(path + ".opt");
    if (!opt.has("adam.step"))
        throw IoError("optimizer sidecar " + path + ".opt is missing adam.step");
    state.step = static_cast<i64>(opt.at("adam.step").data()[0]);
    state.m.clear();
    state.v.clear();
    for (const auto& [name, t] : weights.items()) {
        Tensor<T>& m = opt.at("adam.m." + name);
        Tensor<T>& v = opt.at("adam.v." + name);
        if (m.shape() != t.shape() || v.shape() != t.shape())
            throw IoError("optimizer sidecar moment shape mismatch for " + name);
        state.m.push_back(std::move(m));
        state.v.push_back(std::move(v));
    }
}

template <typename T>
TrainResult train_loop(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const std::vector<ImagePair<T>>& dataset,
                       const std::string& checkpoint_dir, WeightStore<T>& weights,
                       std::optional<std::string> resume_checkpoint) {
    model_cfg.validate();
    train_cfg.validate(model_cfg);
    if (dataset.empty()) throw DataError("dataset is empty");
    for (const auto& pair : dataset) {
        const Shape& s = pair.degraded.shape();
        if (s.h < train_cfg.crop || s.w < train_cfg.crop)
            throw DataError("image \"" + pair.id + "\" is smaller than the crop size " +
                            std::to_string(train_cfg.crop));
        if (!pair.degraded.same_shape(pair.clean))
            throw DataError("pair \"" + pair.id + "\" members disagree on extents");
    }

    std::vector<Parameter<T>> params = make_parameters(weights);
    AdamState<T> state = AdamState<T>::init_for(params);
    i64 start_iter = 0;
    if (resume_checkpoint) {
        load_checkpoint(*resume_checkpoint, weights, state, model_cfg);
        params = make_parameters(weights);
        start_iter = state.step;
    }

    const bool persist = !checkpoint_dir.empty();
    std::ofstream log;
    if (persist) {
        std::filesystem::create_directories(checkpoint_dir);
        log.open(checkpoint_dir + "/loss_log.tsv", std::ios::app);
        if (!log) throw IoError("cannot open loss log in " + checkpoint_dir);
    }

    TrainResult result;
    result.loss_log.reserve(static_cast<std::size_t>(train_cfg.total_iters - start_iter));
    for (i64 iter = start_iter; iter < train_cfg.total_iters; ++iter) {
        std::mt19937_64 rng = iter_rng(train_cfg.seed, iter);
        auto [degraded, clean] = sample_batch(dataset, train_cfg, rng);

        for (auto& p : params) p.zero_grad();
        double loss;
        {
            Tape<T> tape;
            TapedWeights<T> taped(tape, params);
            Var x = tape.leaf(std::move(degraded));
            Var pred = forward(tape, x, taped, model_cfg);
            Var l = tape.l1_loss(pred, tape.leaf(std::move(clean)));
            loss = static_cast<double>(tape.value(l).data()[0]);
            if (!std::isfinite(loss))
                throw DataError("non-finite loss " + std::to_string(loss) + " at iteration " +
                                std::to_string(iter) + " (lr " +
                                std::to_string(cosine_lr(iter, train_cfg)) + ")");
            tape.backward(l);
        }
        const double lr = cosine_lr(iter, train_cfg);
        adam_step(params, state, lr);

        result.final_loss = loss;
        result.loss_log.emplace_back(iter, loss);
        if (persist && (iter % train_cfg.log_interval == 0 || iter == train_cfg.total_iters - 1))
            log << iter << '\t' << lr << '\t' << loss << '\n' << std::flush;
        if (persist && train_cfg.checkpoint_interval > 0 &&
            (iter + 1) % train_cfg.checkpoint_interval == 0) {
            sync_store(params, weights);
            save_checkpoint(weights, state, checkpoint_dir + "/ckpt_" +
                                                std::to_string(iter + 1) + ".mixw");
        }
    }
    sync_store(params, weights);
    if (persist) save_checkpoint(weights, state, checkpoint_dir + "/final.mixw");
    return result;
}

#define MIXNET_INSTANTIATE(T)                                                                  \
    template struct AdamState<T>;                                                             \
    template void adam_step<T>(std::vector<Parameter<T>>&, AdamState<T>&, double);            \
    template void sync_store<T>(const std::vector<Parameter<T>>&, WeightStore<T>&);           \
    template std::pair<Tensor<T>, Tensor<T>> sample_batch<T>(                                 \
        const std::vector<ImagePair<T>>&, const TrainConfig&, std::mt19937_64&);              \
    template void save_checkpoint<T>(const WeightStore<T>&, const AdamState<T>&,              \
                                     const std::string&);                                     \
    template void load_checkpoint<T>(const std::string&, WeightStore<T>&, AdamState<T>&,      \
                                     const ModelConfig&);                                     \
    template TrainResult train_loop<T>(const ModelConfig&, const TrainConfig&,                \
                                       const std::vector<ImagePair<T>>&, const std::string&,  \
                                       WeightStore<T>&, std::optional<std::string>);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

} // namespace mixnet
