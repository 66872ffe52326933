#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixnet/autograd.hpp"
#include "mixnet/errors.hpp"
#include "mixnet/gradcheck_suite.hpp"
#include "mixnet/image_io.hpp"
#include "mixnet/infer.hpp"
#include "mixnet/metrics.hpp"
#include "mixnet/model.hpp"
#include "mixnet/run_config.hpp"
#include "mixnet/training.hpp"

namespace fs = std::filesystem;
using namespace mixnet;

namespace {

// Pairs are matched by identical filename across the two directories.
struct PairedListing {
    std::vector<std::string> matched;   // filenames present in both
    std::vector<std::string> unmatched; // present in exactly one, prefixed dir label
};

PairedListing list_pairs(const std::string& degraded_dir, const std::string& clean_dir) {
    auto names_of = [](const std::string& dir) {
        if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
        std::set<std::string> names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png")
                names.insert(e.path().filename().string());
        return names;
    };
    const std::set<std::string> a = names_of(degraded_dir);
    const std::set<std::string> b = names_of(clean_dir);
    PairedListing out;
    for (const auto& n : a)
        (b.count(n) ? out.matched : out.unmatched).push_back(b.count(n) ? n : degraded_dir + "/" + n);
    for (const auto& n : b)
        if (!a.count(n)) out.unmatched.push_back(clean_dir + "/" + n);
    return out;
}

std::vector<ImagePair<float>> load_dataset(const std::string& degraded_dir,
                                           const std::string& clean_dir, i64 min_extent) {
    PairedListing listing = list_pairs(degraded_dir, clean_dir);
    if (!listing.unmatched.empty()) {
        std::string msg = "unpaired files:";
        for (const auto& n : listing.unmatched) msg += " " + n;
        throw DataError(msg);
    }
    if (listing.matched.empty()) throw DataError("no pairs found");
    std::vector<ImagePair<float>> dataset;
    for (const auto& name : listing.matched) {
        ImagePair<float> pair;
        pair.id = fs::path(name).stem().string();
        pair.degraded = load_png(degraded_dir + "/" + name);
        pair.clean = load_png(clean_dir + "/" + name);
        if (pair.degraded.shape().h != pair.clean.shape().h ||
            pair.degraded.shape().w != pair.clean.shape().w)
            throw DataError("pair " + name + " has mismatched extents");
        if (pair.degraded.shape().h < min_extent || pair.degraded.shape().w < min_extent)
            throw DataError("image " + name + " smaller than crop size " +
                            std::to_string(min_extent));
        dataset.push_back(std::move(pair));
    }
    return dataset;
}

// Recovers the architecture hyperparameters from the shapes stored in a
// weights file so inference does not need the original config.
ModelConfig config_from_weights(const WeightStore<float>& weights) {
    ModelConfig mcfg;
    const Shape down = weights.at("down.conv.weight").shape();
    mcfg.channels = down.n;
    mcfg.num_fmb = 0;
    while (weights.has("fmb." + std::to_string(mcfg.num_fmb) + ".ln1.gamma")) ++mcfg.num_fmb;
    if (mcfg.num_fmb > 0) {
        mcfg.gfml_size = weights.at("fmb.0.gfml.conv_w.weight").shape().n;
        const Shape red = weights.at("fmb.0.lfml.reduce.weight").shape();
        mcfg.lfml_reduction = red.c / red.n;
    }
    i64 d = 1;
    while (d * d * 3 < down.c) ++d;
    if (d * d * 3 != down.c) throw IoError("weights file has a malformed downsampler shape");
    mcfg.downsample_factor = d;
    mcfg.validate();
    return mcfg;
}

int cmd_train(const std::string& config_path) {
    RunConfig cfg = parse_run_config(config_path);
    cfg.model.validate();
    cfg.train.validate(cfg.model);
    if (cfg.train_dir.empty()) throw ConfigError("train_dir is required");
    if (cfg.checkpoint_dir.empty()) throw ConfigError("checkpoint_dir is required");
    // degraded/ and clean/ subdirectories under train_dir
    std::vector<ImagePair<float>> dataset =
        load_dataset(cfg.train_dir + "/degraded", cfg.train_dir + "/clean", cfg.train.crop);
    fs::create_directories(cfg.checkpoint_dir);

    WeightStore<float> weights;
    if (cfg.resume) {
        weights = load_weights<float>(*cfg.resume, cfg.model);
    } else {
        weights = init_weights<float>(cfg.model, cfg.train.seed);
    }
    TrainResult result =
        train_loop(cfg.model, cfg.train, dataset, cfg.checkpoint_dir, weights, cfg.resume);
    const std::string final_path = cfg.checkpoint_dir + "/final.mixw";
    std::cout << "trained " << cfg.train.total_iters << " iters, final loss "
              << result.final_loss << ", weights at " << final_path << "\n";
    return 0;
}

int cmd_infer(const std::string& weights_path, const std::string& input_path,
              const std::string& output_path, std::optional<i64> tile, std::optional<i64> overlap) {
    WeightStore<float> weights = load_weights<float>(weights_path);
    const ModelConfig mcfg = config_from_weights(weights);

    Tensor<float> img = load_png(input_path);
    Tensor<float> out;
    if (tile) {
        TileSpec spec;
        spec.tile = *tile;
        spec.overlap = overlap ? *overlap : *tile / 8;
        std::cout << "warning: tiled inference is approximate; global modulation sees only each "
                     "tile, so results differ from whole-image mode\n";
        out = restore_image_tiled(img, weights, mcfg, spec);
    } else {
        if (overlap) throw UsageError("--overlap requires --tile");
        out = restore_image(img, weights, mcfg);
    }
    save_png(output_path, out);
    return 0;
}

int cmd_eval(const std::string& weights_path, const std::string& degraded_dir,
             const std::string& clean_dir, const std::string& report_path) {
    WeightStore<float> weights = load_weights<float>(weights_path);
    const ModelConfig mcfg = config_from_weights(weights);

    PairedListing listing = list_pairs(degraded_dir, clean_dir);
    if (listing.matched.empty()) throw DataError("no pairs found");
    for (const auto& n : listing.unmatched) std::cerr << "unpaired: " << n << "\n";

    MetricReport report;
    for (const auto& name : listing.matched) {
        Tensor<float> deg = load_png(degraded_dir + "/" + name);
        Tensor<float> clean = load_png(clean_dir + "/" + name);
        Tensor<float> restored = restore_image(deg, weights, mcfg);
        // metric inputs are clamped like the exported image would be
        for (i64 i = 0; i < restored.numel(); ++i)
            restored.data()[i] = std::min(1.0f, std::max(0.0f, restored.data()[i]));
        const double p = psnr(restored.template cast<double>(), clean.template cast<double>());
        const double s = ssim(restored.template cast<double>(), clean.template cast<double>());
        report.add({fs::path(name).stem().string(), p, s});
    }
    report.write(report_path);
    std::cout << report.to_table();
    // partial status when any file lacked a mate
    return listing.unmatched.empty() ? 0 : 3;
}

int cmd_gradcheck(const std::string& inject_fault) {
    if (!inject_fault.empty()) set_backward_fault(inject_fault);
    std::vector<GradCheckEntry> entries = run_gradcheck_suite();
    std::printf("%-24s %-14s %-10s %s\n", "op", "max_rel_err", "threshold", "status");
    bool all_ok = true;
    std::string first_fail;
    for (const auto& e : entries) {
        std::printf("%-24s %-14.3e %-10.0e %s\n", e.name.c_str(), e.max_rel_err, e.threshold,
                    e.ok() ? "ok" : "FAIL");
        if (!e.ok() && all_ok) first_fail = e.name;
        all_ok = all_ok && e.ok();
    }
    if (!all_ok) throw DataError("gradient check failed for op " + first_fail);
    return 0;
}

int cmd_params(const std::string& config_path) {
    RunConfig cfg = parse_run_config(config_path);
    cfg.model.validate();
    // the printed total is read off the constructed store, not the formula
    WeightStore<float> store = init_weights<float>(cfg.model, 0);
    for (const auto& [module, count] : param_count_by_module(cfg.model))
        std::printf("%-16s %lld\n", module.c_str(), static_cast<long long>(count));
    std::printf("%-16s %lld\n", "total", static_cast<long long>(store.scalar_count()));
    return 0;
}

i64 peak_rss_kb() {
    std::ifstream is("/proc/self/status");
    std::string line;
    while (std::getline(is, line))
        if (line.rfind("VmHWM:", 0) == 0) return std::stoll(line.substr(6));
    return 0;
}

int cmd_bench(const std::string& weights_path, i64 width, i64 height) {
    WeightStore<float> weights = load_weights<float>(weights_path);
    const ModelConfig mcfg = config_from_weights(weights);
    if (width <= 0 || height <= 0) throw UsageError("width and height must be positive");

    Tensor<float> img(Shape{1, 3, height, width});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (i64 i = 0; i < img.numel(); ++i) img.data()[i] = dist(rng);

    const auto t0 = std::chrono::steady_clock::now();
    Tensor<float> out = restore_image(img, weights, mcfg);
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    // checksum defeats dead-code elimination
    double sum = 0.0;
    for (i64 i = 0; i < out.numel(); ++i) sum += out.data()[i];
    std::printf("size_px\t%lld\n", static_cast<long long>(width * height));
    std::printf("wall_seconds\t%.3f\n", secs);
    std::printf("peak_rss_kb\t%lld\n", static_cast<long long>(peak_rss_kb()));
    std::printf("checksum\t%.6g\n", sum / static_cast<double>(out.numel()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixnet: UHD image restoration engine"};
    app.require_subcommand(1);

    std::string config_path, weights_path, input_path, output_path;
    std::string degraded_dir, clean_dir, report_path, inject_fault;
    std::optional<i64> tile, overlap;
    i64 width = 0, height = 0;

    CLI::App* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config_path)->required();

    CLI::App* infer = app.add_subcommand("infer", "restore one image");
    infer->add_option("--weights", weights_path)->required();
    infer->add_option("--input", input_path)->required();
    infer->add_option("--output", output_path)->required();
    infer->add_option("--tile", tile);
    infer->add_option("--overlap", overlap);

    CLI::App* eval = app.add_subcommand("eval", "evaluate weights over a paired directory");
    eval->add_option("--weights", weights_path)->required();
    eval->add_option("--degraded", degraded_dir)->required();
    eval->add_option("--clean", clean_dir)->required();
    eval->add_option("--report", report_path)->required();

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gradcheck->add_option("--inject-fault", inject_fault)->group(""); // test harness hook

    CLI::App* params = app.add_subcommand("params", "learnable-scalar count audit");
    params->add_option("--config", config_path)->required();

    CLI::App* bench = app.add_subcommand("bench", "single forward pass timing and memory");
    bench->add_option("--weights", weights_path)->required();
    bench->add_option("--width", width)->required();
    bench->add_option("--height", height)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error:usage:" << e.what() << "\n";
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(config_path);
        if (infer->parsed()) return cmd_infer(weights_path, input_path, output_path, tile, overlap);
        if (eval->parsed()) return cmd_eval(weights_path, degraded_dir, clean_dir, report_path);
        if (gradcheck->parsed()) return cmd_gradcheck(inject_fault);
        if (params->parsed()) return cmd_params(config_path);
        if (bench->parsed()) return cmd_bench(weights_path, width, height);
    } catch (const Error& e) {
        std::cerr << "error:" << e.category() << ":" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error:internal:" << e.what() << "\n";
        return 1;
    }
    return 2;
}
