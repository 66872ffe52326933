#include "mixnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>

namespace mixnet {

void ModelConfig::validate() const {
    if (num_fmb < 0) throw ConfigError("num_fmb must be >= 0");
    if (channels < 1 || gfml_size < 1 || lfml_reduction < 1 || downsample_factor < 1)
        throw ConfigError("channels, gfml_size, lfml_reduction and downsample_factor must be >= 1");
    if (channels % lfml_reduction != 0)
        throw ConfigError("lfml_reduction " + std::to_string(lfml_reduction) +
                          " does not divide channels " + std::to_string(channels));
}

template <typename T>
void WeightStore<T>::add(std::string name, Tensor<T> value) {
    if (index_.count(name))
        throw ConfigError("duplicate weight name: " + name);
    index_.emplace(name, items_.size());
    items_.emplace_back(std::move(name), std::move(value));
}

template <typename T>
bool WeightStore<T>::has(const std::string& name) const {
    return index_.count(name) != 0;
}

template <typename T>
Tensor<T>& WeightStore<T>::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown weight name: " + name);
    return items_[it->second].second;
}

template <typename T>
const Tensor<T>& WeightStore<T>::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown weight name: " + name);
    return items_[it->second].second;
}

template <typename T>
i64 WeightStore<T>::scalar_count() const {
    i64 total = 0;
    for (const auto& [name, t] : items_) total += t.numel();
    return total;
}

std::vector<std::pair<std::string, Shape>> weight_schema(const ModelConfig& cfg) {
    cfg.validate();
    const i64 C = cfg.channels, S = cfg.gfml_size, r = cfg.lfml_reduction;
    const i64 d2 = cfg.downsample_factor * cfg.downsample_factor;
    const i64 Cr = C / r;

    std::vector<std::pair<std::string, Shape>> schema;
    schema.emplace_back("down.conv.weight", Shape{C, 3 * d2, 3, 3});
    schema.emplace_back("down.conv.bias", Shape{1, C, 1, 1});
    for (i64 i = 0; i < cfg.num_fmb; ++i) {
        const std::string p = "fmb." + std::to_string(i) + ".";
        schema.emplace_back(p + "ln1.gamma", Shape{1, C, 1, 1});
        schema.emplace_back(p + "ln1.beta", Shape{1, C, 1, 1});
        schema.emplace_back(p + "gfml.conv_c.weight", Shape{C, C, 1, 1});
        schema.emplace_back(p + "gfml.conv_c.bias", Shape{1, C, 1, 1});
        schema.emplace_back(p + "gfml.conv_w.weight", Shape{S, S, 1, 1});
        schema.emplace_back(p + "gfml.conv_w.bias", Shape{1, S, 1, 1});
        schema.emplace_back(p + "gfml.conv_h.weight", Shape{S, S, 1, 1});
        schema.emplace_back(p + "gfml.conv_h.bias", Shape{1, S, 1, 1});
        schema.emplace_back(p + "lfml.reduce.weight", Shape{Cr, C, 1, 1});
        schema.emplace_back(p + "lfml.reduce.bias", Shape{1, Cr, 1, 1});
        schema.emplace_back(p + "lfml.expand.weight", Shape{C, Cr, 1, 1});
        schema.emplace_back(p + "lfml.expand.bias", Shape{1, C, 1, 1});
        schema.emplace_back(p + "fuse.weight", Shape{C, 2 * C, 1, 1});
        schema.emplace_back(p + "fuse.bias", Shape{1, C, 1, 1});
        schema.emplace_back(p + "ln2.gamma", Shape{1, C, 1, 1});
        schema.emplace_back(p + "ln2.beta", Shape{1, C, 1, 1});
        schema.emplace_back(p + "ffl.conv3.weight", Shape{2 * C, C, 3, 3});
        schema.emplace_back(p + "ffl.conv3.bias", Shape{1, 2 * C, 1, 1});
        schema.emplace_back(p + "ffl.conv1.weight", Shape{C, 2 * C, 1, 1});
        schema.emplace_back(p + "ffl.conv1.bias", Shape{1, C, 1, 1});
    }
    schema.emplace_back("up.conv.weight", Shape{3 * d2, C, 3, 3});
    schema.emplace_back("up.conv.bias", Shape{1, 3 * d2, 1, 1});
    return schema;
}

std::vector<std::pair<std::string, i64>> param_count_by_module(const ModelConfig& cfg) {
    cfg.validate();
    const i64 C = cfg.channels, S = cfg.gfml_size, r = cfg.lfml_reduction;
    const i64 d2 = cfg.downsample_factor * cfg.downsample_factor;
    const i64 Cr = C / r;

    std::vector<std::pair<std::string, i64>> out;
    out.emplace_back("down", C * 3 * d2 * 9 + C);
    const i64 per_fmb = 2 * C            // ln1
                        + C * C + C      // gfml conv_c
                        + 2 * (S * S + S)// gfml conv_w, conv_h
                        + Cr * C + Cr    // lfml reduce
                        + C * Cr + C     // lfml expand
                        + C * 2 * C + C  // fuse
                        + 2 * C          // ln2
                        + 2 * C * C * 9 + 2 * C // ffl conv3
                        + C * 2 * C + C; // ffl conv1
    for (i64 i = 0; i < cfg.num_fmb; ++i)
        out.emplace_back("fmb." + std::to_string(i), per_fmb);
    out.emplace_back("up", 3 * d2 * C * 9 + 3 * d2);
    return out;
}

i64 param_count(const ModelConfig& cfg) {
    i64 total = 0;
    for (const auto& [name, n] : param_count_by_module(cfg)) total += n;
    return total;
}

template <typename T>
WeightStore<T> init_weights(const ModelConfig& cfg, std::uint64_t seed) {
    WeightStore<T> store;
    std::mt19937_64 rng(seed);
    for (const auto& [name, shape] : weight_schema(cfg)) {
        Tensor<T> t(shape);
        const bool is_gamma = name.size() >= 5 && name.compare(name.size() - 5, 5, "gamma") == 0;
        const bool is_weight = name.size() >= 6 && name.compare(name.size() - 6, 6, "weight") == 0;
        if (is_gamma) {
            std::fill(t.storage().begin(), t.storage().end(), T(1));
        } else if (is_weight) {
            const double fan_in = static_cast<double>(shape.c * shape.h * shape.w);
            const double bound = std::sqrt(6.0 / fan_in);
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (i64 i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<T>(dist(rng));
        }
        // biases and beta stay zero
        store.add(name, std::move(t));
    }
    return store;
}

// --- MIXW container ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'I', 'X', 'W'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw IoError(std::string("truncated weight file while reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& is, const char* what) {
    unsigned char b[2];
    if (!is.read(reinterpret_cast<char*>(b), 2))
        throw IoError(std::string("truncated weight file while reading ") + what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

} // namespace

template <typename T>
void save_weights(const WeightStore<T>& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, t] : store.items()) {
        if (name.size() > 0xffff) throw IoError("weight name too long: " + name);
        write_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(4)); // rank
        const Shape& s = t.shape();
        write_u32(os, static_cast<std::uint32_t>(s.n));
        write_u32(os, static_cast<std::uint32_t>(s.c));
        write_u32(os, static_cast<std::uint32_t>(s.h));
        write_u32(os, static_cast<std::uint32_t>(s.w));
        for (i64 i = 0; i < t.numel(); ++i) {
            const float f = static_cast<float>(t.data()[i]);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            write_u32(os, bits);
        }
    }
    if (!os) throw IoError("write failure on " + path);
}

template <typename T>
WeightStore<T> load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad magic in " + path + " (not a MIXW weight file)");
    const std::uint32_t version = read_u32(is, "version");
    if (version != kVersion)
        throw IoError("unsupported weight file version " + std::to_string(version));
    const std::uint32_t count = read_u32(is, "tensor count");

    WeightStore<T> store;
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint16_t name_len = read_u16(is, "name length");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw IoError("truncated weight file while reading tensor name");
        int rank = is.get();
        if (rank == EOF) throw IoError("truncated weight file while reading rank");
        if (rank < 1 || rank > 4)
            throw IoError("unsupported tensor rank " + std::to_string(rank) + " for " + name);
        i64 ext[4] = {1, 1, 1, 1};
        for (int i = 0; i < rank; ++i)
            ext[4 - rank + i] = static_cast<i64>(read_u32(is, "extent"));
        Shape shape{ext[0], ext[1], ext[2], ext[3]};
        shape.validate();
        Tensor<T> t(shape);
        for (i64 i = 0; i < t.numel(); ++i) {
            const std::uint32_t bits = read_u32(is, "tensor data");
            float f;
            std::memcpy(&f, &bits, 4);
            t.data()[i] = static_cast<T>(f);
        }
        store.add(std::move(name), std::move(t));
    }
    return store;
}

template <typename T>
WeightStore<T> load_weights(const std::string& path, const ModelConfig& cfg) {
    WeightStore<T> raw = load_weights<T>(path);
    const auto schema = weight_schema(cfg);

    std::set<std::string> expected;
    for (const auto& [name, shape] : schema) expected.insert(name);
    for (const auto& [name, t] : raw.items())
        if (!expected.count(name))
            throw IoError("weight file schema mismatch: unexpected tensor \"" + name + "\"");

    WeightStore<T> store;
    for (const auto& [name, shape] : schema) {
        if (!raw.has(name))
            throw IoError("weight file schema mismatch: missing tensor \"" + name + "\"");
        Tensor<T>& t = raw.at(name);
        if (t.shape() != shape)
            throw IoError("weight file shape mismatch for \"" + name + "\": file has " +
                          t.shape().str() + ", config expects " + shape.str());
        store.add(name, std::move(t));
    }
    return store;
}

// --- samplers and full forward -----------------------------------------------

template <typename T>
Tensor<T> downsampler(const Tensor<T>& x, const WeightStore<T>& w, const ModelConfig& cfg) {
    Tensor<T> packed = space_to_channels(x, cfg.downsample_factor);
    return ops::conv3x3(packed, w.at("down.conv.weight"), w.at("down.conv.bias"));
}

template <typename T>
Tensor<T> upsampler(const Tensor<T>& f, const WeightStore<T>& w, const ModelConfig& cfg) {
    Tensor<T> conv = ops::conv3x3(f, w.at("up.conv.weight"), w.at("up.conv.bias"));
    return channels_to_space(conv, cfg.downsample_factor);
}

namespace {

template <typename H, typename Lookup>
FmbParams<H> fmb_params(const Lookup& get, i64 i) {
    const std::string p = "fmb." + std::to_string(i) + ".";
    FmbParams<H> fp;
    fp.ln1_gamma = get(p + "ln1.gamma");
    fp.ln1_beta = get(p + "ln1.beta");
    fp.gfml.conv_c_w = get(p + "gfml.conv_c.weight");
    fp.gfml.conv_c_b = get(p + "gfml.conv_c.bias");
    fp.gfml.conv_w_w = get(p + "gfml.conv_w.weight");
    fp.gfml.conv_w_b = get(p + "gfml.conv_w.bias");
    fp.gfml.conv_h_w = get(p + "gfml.conv_h.weight");
    fp.gfml.conv_h_b = get(p + "gfml.conv_h.bias");
    fp.lfml.reduce_w = get(p + "lfml.reduce.weight");
    fp.lfml.reduce_b = get(p + "lfml.reduce.bias");
    fp.lfml.expand_w = get(p + "lfml.expand.weight");
    fp.lfml.expand_b = get(p + "lfml.expand.bias");
    fp.fuse_w = get(p + "fuse.weight");
    fp.fuse_b = get(p + "fuse.bias");
    fp.ln2_gamma = get(p + "ln2.gamma");
    fp.ln2_beta = get(p + "ln2.beta");
    fp.ffl.conv3_w = get(p + "ffl.conv3.weight");
    fp.ffl.conv3_b = get(p + "ffl.conv3.bias");
    fp.ffl.conv1_w = get(p + "ffl.conv1.weight");
    fp.ffl.conv1_b = get(p + "ffl.conv1.bias");
    return fp;
}

} // namespace

template <typename T>
Tensor<T> forward(const Tensor<T>& x, const WeightStore<T>& w, const ModelConfig& cfg) {
    cfg.validate();
    if (x.shape().c != 3)
        throw ShapeError("network input must have 3 channels, got " + x.shape().str());
    auto get = [&w](const std::string& name) -> Tensor<T> { return w.at(name); };

    Tensor<T> f0 = downsampler(x, w, cfg);
    Tensor<T> f = f0;
    for (i64 i = 0; i < cfg.num_fmb; ++i)
        f = fmb_forward(f, fmb_params<Tensor<T>>(get, i), cfg.gfml_size, cfg.toggles);
    return upsampler(ew_add(f, f0), w, cfg);
}

template <typename T>
std::vector<Parameter<T>> make_parameters(const WeightStore<T>& store) {
    std::vector<Parameter<T>> params;
    params.reserve(store.size());
    for (const auto& [name, t] : store.items()) params.emplace_back(name, t);
    return params;
}

template <typename T>
TapedWeights<T>::TapedWeights(Tape<T>& tape, std::vector<Parameter<T>>& params) {
    for (auto& p : params) vars.emplace(p.name, tape.param(p));
}

template <typename T>
Var TapedWeights<T>::at(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw ConfigError("unknown weight name: " + name);
    return it->second;
}

template <typename T>
Var forward(Tape<T>& tape, Var x, const TapedWeights<T>& w, const ModelConfig& cfg) {
    cfg.validate();
    if (tape.value(x).shape().c != 3)
        throw ShapeError("network input must have 3 channels, got " +
                         tape.value(x).shape().str());
    auto get = [&w](const std::string& name) -> Var { return w.at(name); };

    const i64 d = cfg.downsample_factor;
    Var packed = tape.space_to_channels(x, d);
    Var f0 = tape.conv3x3(packed, w.at("down.conv.weight"), w.at("down.conv.bias"));
    Var f = f0;
    for (i64 i = 0; i < cfg.num_fmb; ++i)
        f = fmb_forward(tape, f, fmb_params<Var>(get, i), cfg.gfml_size, cfg.toggles);
    Var pre = tape.conv3x3(tape.ew_add(f, f0), w.at("up.conv.weight"), w.at("up.conv.bias"));
    return tape.channels_to_space(pre, d);
}

#define MIXNET_INSTANTIATE(T)                                                                  \
    template class WeightStore<T>;                                                            \
    template struct TapedWeights<T>;                                                          \
    template WeightStore<T> init_weights<T>(const ModelConfig&, std::uint64_t);               \
    template void save_weights<T>(const WeightStore<T>&, const std::string&);                 \
    template WeightStore<T> load_weights<T>(const std::string&);                              \
    template WeightStore<T> load_weights<T>(const std::string&, const ModelConfig&);          \
    template Tensor<T> downsampler<T>(const Tensor<T>&, const WeightStore<T>&,               \
                                      const ModelConfig&);                                    \
    template Tensor<T> upsampler<T>(const Tensor<T>&, const WeightStore<T>&,                 \
                                    const ModelConfig&);                                      \
    template Tensor<T> forward<T>(const Tensor<T>&, const WeightStore<T>&, const ModelConfig&);\
    template std::vector<Parameter<T>> make_parameters<T>(const WeightStore<T>&);            \
    template Var forward<T>(Tape<T>&, Var, const TapedWeights<T>&, const ModelConfig&);

MIXNET_INSTANTIATE(float)
MIXNET_INSTANTIATE(double)
#undef MIXNET_INSTANTIATE

} // namespace mixnet
