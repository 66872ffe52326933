#include "mixnet/gradcheck_suite.hpp"

#include <random>

#include "mixnet/autograd.hpp"
#include "mixnet/blocks.hpp"
#include "mixnet/model.hpp"

namespace mixnet {

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor<double> t(s);
    for (i64 i = 0; i < t.numel(); ++i) t.data()[i] = dist(rng);
    return t;
}

// sum(x^2) of a Var as a tape scalar: L1 against zero on numel*x*x undoes the
// mean reduction, keeping gradients O(1) so faults cannot hide under the
// absolute floor of the relative-error metric.
Var square_sum(Tape<double>& tape, Var x) {
    const Shape s = tape.value(x).shape();
    Var sq = tape.ew_mul(x, x);
    Var scaled = tape.ew_mul(sq, tape.leaf(Tensor<double>(s, static_cast<double>(s.numel()))));
    return tape.l1_loss(scaled, tape.leaf(Tensor<double>(s)));
}

} // namespace

std::vector<GradCheckEntry> run_gradcheck_suite() {
    std::vector<GradCheckEntry> entries;
    std::mt19937_64 rng(12345);
    constexpr double kPrimitive = 1e-4;
    constexpr double kBlock = 1e-3;

    auto check_input = [&](const std::string& name, double threshold, Shape in,
                           const std::function<Var(Tape<double>&, Var)>& f, i64 samples = -1) {
        Tensor<double> point = random_tensor(in, rng);
        const double err = grad_check(f, point, 1e-4, samples, 7);
        entries.push_back({name, err, threshold});
    };

    // primitives, input gradients
    {
        std::mt19937_64 wrng(99);
        auto w1 = random_tensor(Shape{4, 3, 1, 1}, wrng);
        auto b1 = random_tensor(Shape{1, 4, 1, 1}, wrng);
        check_input("conv1x1", kPrimitive, Shape{2, 3, 5, 4}, [&](Tape<double>& t, Var x) {
            return square_sum(t, t.conv1x1(x, t.leaf(w1), t.leaf(b1)));
        });
        auto w3 = random_tensor(Shape{4, 3, 3, 3}, wrng);
        auto b3 = random_tensor(Shape{1, 4, 1, 1}, wrng);
        check_input("conv3x3", kPrimitive, Shape{2, 3, 5, 5}, [&](Tape<double>& t, Var x) {
            return square_sum(t, t.conv3x3(x, t.leaf(w3), t.leaf(b3)));
        });
    }
    check_input("gelu", kPrimitive, Shape{2, 3, 4, 4}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.gelu(x));
    });
    check_input("relu", kPrimitive, Shape{2, 3, 4, 4}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.relu(x));
    });
    check_input("sigmoid", kPrimitive, Shape{2, 3, 4, 4}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.sigmoid(x));
    });
    {
        std::mt19937_64 wrng(100);
        auto gamma = random_tensor(Shape{1, 6, 1, 1}, wrng, 0.5, 1.5);
        auto beta = random_tensor(Shape{1, 6, 1, 1}, wrng);
        check_input("layer_norm", kPrimitive, Shape{2, 6, 3, 3}, [&](Tape<double>& t, Var x) {
            return square_sum(t, t.layer_norm(x, t.leaf(gamma), t.leaf(beta)));
        });
    }
    check_input("global_avg_pool", kPrimitive, Shape{2, 4, 5, 5}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.global_avg_pool(x));
    });
    check_input("permute", kPrimitive, Shape{1, 3, 4, 5}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.permute(x, kCycleOrder));
    });
    check_input("interpolate_bilinear", kPrimitive, Shape{1, 2, 5, 4}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.interpolate(x, 8, 7, Interp::Bilinear));
    });
    check_input("interpolate_nearest", kPrimitive, Shape{1, 2, 5, 4}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.interpolate(x, 3, 2, Interp::Nearest));
    });
    check_input("space_to_channels", kPrimitive, Shape{1, 3, 4, 4}, [](Tape<double>& t, Var x) {
        return square_sum(t, t.space_to_channels(x, 2));
    });
    {
        Tensor<double> other = random_tensor(Shape{2, 3, 4, 4}, rng);
        check_input("ew_mul", kPrimitive, Shape{2, 3, 4, 4}, [&](Tape<double>& t, Var x) {
            return square_sum(t, t.ew_mul(x, t.leaf(other)));
        });
        Tensor<double> gate = random_tensor(Shape{2, 3, 1, 1}, rng);
        check_input("ew_mul_broadcast", kPrimitive, Shape{2, 3, 4, 4}, [&](Tape<double>& t, Var x) {
            return square_sum(t, t.ew_mul(x, t.leaf(gate)));
        });
        Tensor<double> target = random_tensor(Shape{2, 3, 4, 4}, rng);
        check_input("l1_loss", kPrimitive, Shape{2, 3, 4, 4}, [&](Tape<double>& t, Var x) {
            return t.l1_loss(x, t.leaf(target));
        });
    }

    // blocks: gradients w.r.t. both input and parameters
    const i64 C = 4, S = 8, r = 2;
    ModelConfig block_cfg;
    block_cfg.num_fmb = 1;
    block_cfg.channels = C;
    block_cfg.gfml_size = S;
    block_cfg.lfml_reduction = r;
    block_cfg.downsample_factor = 1;
    WeightStore<double> bw = init_weights<double>(block_cfg, 21);

    auto block_check = [&](const std::string& name,
                           const std::function<Var(Tape<double>&, Var, const TapedWeights<double>&)>& f) {
        std::vector<Parameter<double>> params = make_parameters(bw);
        Tensor<double> x = random_tensor(Shape{1, C, 8, 8}, rng);
        // one flat check over input and all parameters
        params.emplace_back("__input__", x);
        auto wrapped = [&](Tape<double>& t, std::vector<Var>& vars) {
            std::vector<Parameter<double>> dummy;
            TapedWeights<double> tw(t, dummy); // empty; fill vars map manually
            TapedWeights<double>& twm = tw;
            for (std::size_t k = 0; k + 1 < vars.size(); ++k)
                twm.vars.emplace(params[k].name, vars[k]);
            return f(t, vars.back(), twm);
        };
        const double err = grad_check_params(wrapped, params, 1e-4, 220, 11);
        entries.push_back({name, err, kBlock});
    };

    block_check("gfml", [&](Tape<double>& t, Var x, const TapedWeights<double>& tw) {
        GfmlParams<Var> p;
        p.conv_c_w = tw.at("fmb.0.gfml.conv_c.weight");
        p.conv_c_b = tw.at("fmb.0.gfml.conv_c.bias");
        p.conv_w_w = tw.at("fmb.0.gfml.conv_w.weight");
        p.conv_w_b = tw.at("fmb.0.gfml.conv_w.bias");
        p.conv_h_w = tw.at("fmb.0.gfml.conv_h.weight");
        p.conv_h_b = tw.at("fmb.0.gfml.conv_h.bias");
        return square_sum(t, gfml_forward(t, x, p, S));
    });
    block_check("lfml", [&](Tape<double>& t, Var x, const TapedWeights<double>& tw) {
        LfmlParams<Var> p;
        p.reduce_w = tw.at("fmb.0.lfml.reduce.weight");
        p.reduce_b = tw.at("fmb.0.lfml.reduce.bias");
        p.expand_w = tw.at("fmb.0.lfml.expand.weight");
        p.expand_b = tw.at("fmb.0.lfml.expand.bias");
        return square_sum(t, lfml_forward(t, x, p));
    });
    block_check("ffl", [&](Tape<double>& t, Var x, const TapedWeights<double>& tw) {
        FflParams<Var> p;
        p.conv3_w = tw.at("fmb.0.ffl.conv3.weight");
        p.conv3_b = tw.at("fmb.0.ffl.conv3.bias");
        p.conv1_w = tw.at("fmb.0.ffl.conv1.weight");
        p.conv1_b = tw.at("fmb.0.ffl.conv1.bias");
        return square_sum(t, ffl_forward(t, x, p));
    });
    block_check("fmb", [&](Tape<double>& t, Var x, const TapedWeights<double>& tw) {
        GfmlParams<Var> g{tw.at("fmb.0.gfml.conv_c.weight"), tw.at("fmb.0.gfml.conv_c.bias"),
                          tw.at("fmb.0.gfml.conv_w.weight"), tw.at("fmb.0.gfml.conv_w.bias"),
                          tw.at("fmb.0.gfml.conv_h.weight"), tw.at("fmb.0.gfml.conv_h.bias")};
        LfmlParams<Var> l{tw.at("fmb.0.lfml.reduce.weight"), tw.at("fmb.0.lfml.reduce.bias"),
                          tw.at("fmb.0.lfml.expand.weight"), tw.at("fmb.0.lfml.expand.bias")};
        FflParams<Var> f{tw.at("fmb.0.ffl.conv3.weight"), tw.at("fmb.0.ffl.conv3.bias"),
                         tw.at("fmb.0.ffl.conv1.weight"), tw.at("fmb.0.ffl.conv1.bias")};
        FmbParams<Var> p;
        p.ln1_gamma = tw.at("fmb.0.ln1.gamma");
        p.ln1_beta = tw.at("fmb.0.ln1.beta");
        p.ln2_gamma = tw.at("fmb.0.ln2.gamma");
        p.ln2_beta = tw.at("fmb.0.ln2.beta");
        p.gfml = g;
        p.lfml = l;
        p.fuse_w = tw.at("fmb.0.fuse.weight");
        p.fuse_b = tw.at("fmb.0.fuse.bias");
        p.ffl = f;
        return square_sum(t, fmb_forward(t, x, p, S));
    });

    // tiny end-to-end model: smooth sum-of-squares readout (the L1 kink makes
    // central differences unreliable whenever a perturbation flips the sign of
    // a residual; the L1 op itself is checked above), >= 200 sampled parameter
    // coordinates vs central differences
    {
        ModelConfig cfg;
        cfg.num_fmb = 2;
        cfg.channels = 4;
        cfg.gfml_size = 8;
        cfg.lfml_reduction = 2;
        cfg.downsample_factor = 2;
        WeightStore<double> store = init_weights<double>(cfg, 31);
        std::vector<Parameter<double>> params = make_parameters(store);
        Tensor<double> x = random_tensor(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
        auto f = [&](Tape<double>& t, std::vector<Var>& vars) {
            std::vector<Parameter<double>> dummy;
            TapedWeights<double> tw(t, dummy);
            for (std::size_t k = 0; k < vars.size(); ++k)
                tw.vars.emplace(params[k].name, vars[k]);
            Var pred = forward(t, t.leaf(x), tw, cfg);
            return square_sum(t, pred);
        };
        const double err = grad_check_params(f, params, 1e-4, 200, 17);
        entries.push_back({"model_end_to_end", err, kBlock});
    }

    return entries;
}

} // namespace mixnet
