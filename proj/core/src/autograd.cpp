#include "mixnet/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace mixnet {

namespace {
std::string g_backward_fault; // NOLINT: test hook, single-threaded use
}

void set_backward_fault(const std::string& op_name) { g_backward_fault = op_name; }
const std::string& backward_fault() { return g_backward_fault; }

template <typename T>
std::size_t Tape<T>::check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw UsageError("variable does not belong to this tape");
    return static_cast<std::size_t>(v.id);
}

template <typename T>
Var Tape<T>::push(std::string op, Tensor<T> value,
                  std::function<void(Tape&, const Tensor<T>&)> back) {
    Node node;
    node.op = std::move(op);
    node.grad = Tensor<T>(value.shape());
    node.value = std::move(value);
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
void Tape<T>::add_grad(int id, const Tensor<T>& g) {
    Tensor<T>& dst = nodes_[static_cast<std::size_t>(id)].grad;
    const i64 n = dst.numel();
    for (i64 i = 0; i < n; ++i) dst.data()[i] += g.data()[i];
}

template <typename T>
Var Tape<T>::leaf(Tensor<T> value) {
    return push("leaf", std::move(value), nullptr);
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
    Var v = push("param", p.value, nullptr);
    nodes_.back().bound = &p;
    return v;
}

template <typename T>
Var Tape<T>::conv1x1(Var x, Var w, Var b) {
    const int xi = static_cast<int>(check(x)), wi = static_cast<int>(check(w)),
              bi = static_cast<int>(check(b));
    Tensor<T> out = ops::conv1x1(value(x), value(w), value(b));
    return push("conv1x1", std::move(out), [xi, wi, bi](Tape& t, const Tensor<T>& g) {
        ops::conv1x1_backward(t.nodes_[xi].value, t.nodes_[wi].value, g,
                              &t.nodes_[xi].grad, &t.nodes_[wi].grad, &t.nodes_[bi].grad);
    });
}

template <typename T>
Var Tape<T>::conv3x3(Var x, Var w, Var b) {
    const int xi = static_cast<int>(check(x)), wi = static_cast<int>(check(w)),
              bi = static_cast<int>(check(b));
    Tensor<T> out = ops::conv3x3(value(x), value(w), value(b));
    return push("conv3x3", std::move(out), [xi, wi, bi](Tape& t, const Tensor<T>& g) {
        ops::conv3x3_backward(t.nodes_[xi].value, t.nodes_[wi].value, g,
                              &t.nodes_[xi].grad, &t.nodes_[wi].grad, &t.nodes_[bi].grad);
    });
}

template <typename T>
Var Tape<T>::gelu(Var x) {
    const int xi = static_cast<int>(check(x));
    return push("gelu", ops::gelu(value(x)), [xi](Tape& t, const Tensor<T>& g) {
        ops::gelu_backward(t.nodes_[xi].value, g, &t.nodes_[xi].grad);
    });
}

template <typename T>
Var Tape<T>::relu(Var x) {
    const int xi = static_cast<int>(check(x));
    return push("relu", ops::relu(value(x)), [xi](Tape& t, const Tensor<T>& g) {
        ops::relu_backward(t.nodes_[xi].value, g, &t.nodes_[xi].grad);
    });
}

template <typename T>
Var Tape<T>::sigmoid(Var x) {
    const int xi = static_cast<int>(check(x));
    Var out = push("sigmoid", ops::sigmoid(value(x)), nullptr);
    const int yi = out.id;
    nodes_.back().back = [xi, yi](Tape& t, const Tensor<T>& g) {
        ops::sigmoid_backward(t.nodes_[yi].value, g, &t.nodes_[xi].grad);
    };
    return out;
}

template <typename T>
Var Tape<T>::layer_norm(Var x, Var gamma, Var beta) {
    const int xi = static_cast<int>(check(x)), gi = static_cast<int>(check(gamma)),
              bi = static_cast<int>(check(beta));
    Tensor<T> out = ops::layer_norm(value(x), value(gamma), value(beta));
    return push("layer_norm", std::move(out), [xi, gi, bi](Tape& t, const Tensor<T>& g) {
        ops::layer_norm_backward(t.nodes_[xi].value, t.nodes_[gi].value, g,
                                 &t.nodes_[xi].grad, &t.nodes_[gi].grad, &t.nodes_[bi].grad);
    });
}

template <typename T>
Var Tape<T>::global_avg_pool(Var x) {
    const int xi = static_cast<int>(check(x));
    const Shape in = value(x).shape();
    return push("global_avg_pool", ops::global_avg_pool(value(x)),
                [xi, in](Tape& t, const Tensor<T>& g) {
                    ops::global_avg_pool_backward(in, g, &t.nodes_[xi].grad);
                });
}

template <typename T>
Var Tape<T>::permute(Var x, AxisOrder order) {
    const int xi = static_cast<int>(check(x));
    const AxisOrder inv = inverse_order(order);
    return push("permute", mixnet::permute(value(x), order),
                [xi, inv](Tape& t, const Tensor<T>& g) {
                    t.add_grad(xi, mixnet::permute(g, inv));
                });
}

template <typename T>
Var Tape<T>::interpolate(Var x, i64 target_h, i64 target_w, Interp mode) {
    const int xi = static_cast<int>(check(x));
    const Shape in = value(x).shape();
    return push("interpolate", mixnet::interpolate(value(x), target_h, target_w, mode),
                [xi, in, mode](Tape& t, const Tensor<T>& g) {
                    ops::interpolate_backward(in, g, mode, &t.nodes_[xi].grad);
                });
}

template <typename T>
Var Tape<T>::concat_channels(Var a, Var b) {
    const int ai = static_cast<int>(check(a)), bi = static_cast<int>(check(b));
    const i64 ca = value(a).shape().c;
    const i64 cb = value(b).shape().c;
    return push("concat_channels", mixnet::concat_channels(value(a), value(b)),
                [ai, bi, ca, cb](Tape& t, const Tensor<T>& g) {
                    t.add_grad(ai, slice_channels(g, 0, ca));
                    t.add_grad(bi, slice_channels(g, ca, cb));
                });
}

template <typename T>
Var Tape<T>::ew_mul(Var a, Var b) {
    const int ai = static_cast<int>(check(a)), bi = static_cast<int>(check(b));
    Tensor<T> out = mixnet::ew_mul(value(a), value(b));
    return push("ew_mul", std::move(out), [ai, bi](Tape& t, const Tensor<T>& g) {
        const Tensor<T>& av = t.nodes_[ai].value;
        const Tensor<T>& bv = t.nodes_[bi].value;
        if (av.same_shape(bv)) {
            t.add_grad(ai, mixnet::ew_mul(g, bv));
            t.add_grad(bi, mixnet::ew_mul(g, av));
            return;
        }
        // b is (N,C,1,1) broadcast over H,W
        t.add_grad(ai, mixnet::ew_mul(g, bv));
        Tensor<T> ga = mixnet::ew_mul(g, av); // same shape as a
        const Shape& s = av.shape();
        Tensor<T>& gb = t.nodes_[bi].grad;
        const i64 plane = s.h * s.w;
        for (i64 n = 0; n < s.n; ++n)
            for (i64 c = 0; c < s.c; ++c) {
                const T* p = ga.data() + (n * s.c + c) * plane;
                T acc = 0;
                for (i64 i = 0; i < plane; ++i) acc += p[i];
                gb.at(n, c, 0, 0) += acc;
            }
    });
}

template <typename T>
Var Tape<T>::ew_add(Var a, Var b) {
    const int ai = static_cast<int>(check(a)), bi = static_cast<int>(check(b));
    const bool same = value(a).same_shape(value(b));
    Tensor<T> out = mixnet::ew_add(value(a), value(b));
    return push("ew_add", std::move(out), [ai, bi, same](Tape& t, const Tensor<T>& g) {
        t.add_grad(ai, g);
        if (same) {
            t.add_grad(bi, g);
            return;
        }
        const Shape& s = g.shape();
        Tensor<T>& gb = t.nodes_[bi].grad;
        const i64 plane = s.h * s.w;
        for (i64 n = 0; n < s.n; ++n)
            for (i64 c = 0; c < s.c; ++c) {
                const T* p = g.data() + (n * s.c + c) * plane;
                T acc = 0;
                for (i64 i = 0; i < plane; ++i) acc += p[i];
                gb.at(n, c, 0, 0) += acc;
            }
    });
}

template <typename T>
Var Tape<T>::space_to_channels(Var x, i64 factor) {
    const int xi = static_cast<int>(check(x));
    return push("space_to_channels", mixnet::space_to_channels(value(x), factor),
                [xi, factor](Tape& t, const Tensor<T>& g) {
                    t.add_grad(xi, mixnet::channels_to_space(g, factor));
                });
}

template <typename T>
Var Tape<T>::channels_to_space(Var x, i64 factor) {
    const int xi = static_cast<int>(check(x));
    return push("channels_to_space", mixnet::channels_to_space(value(x), factor),
                [xi, factor](Tape& t, const Tensor<T>& g) {
                    t.add_grad(xi, mixnet::space_to_channels(g, factor));
                });
}

template <typename T>
Var Tape<T>::l1_loss(Var pred, Var target) {
    const int pi = static_cast<int>(check(pred)), ti = static_cast<int>(check(target));
    Tensor<T> out(Shape{1, 1, 1, 1});
    out.data()[0] = ops::l1_loss_value(value(pred), value(target));
    return push("l1_loss", std::move(out), [pi, ti](Tape& t, const Tensor<T>& g) {
        ops::l1_loss_backward(t.nodes_[pi].value, t.nodes_[ti].value, g.data()[0],
                              &t.nodes_[pi].grad);
    });
}

template <typename T>
void Tape<T>::backward(Var loss) {
    const std::size_t li = check(loss);
    if (nodes_[li].value.numel() != 1)
        throw UsageError("backward requires a scalar loss, got shape " +
                         nodes_[li].value.shape().str());
    for (Node& n : nodes_) std::fill(n.grad.storage().begin(), n.grad.storage().end(), T(0));
    nodes_[li].grad.data()[0] = T(1);

    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.back) continue;
        if (!g_backward_fault.empty() && n.op == g_backward_fault) {
            Tensor<T> g = n.grad;
            for (i64 k = 0; k < g.numel(); ++k) g.data()[k] *= static_cast<T>(1.02);
            n.back(*this, g);
        } else {
            n.back(*this, n.grad);
        }
    }
    for (Node& n : nodes_) {
        if (!n.bound) continue;
        const i64 cnt = n.grad.numel();
        for (i64 k = 0; k < cnt; ++k) n.bound->grad.data()[k] += n.grad.data()[k];
    }
}

template class Tape<float>;
template class Tape<double>;

double grad_check(const std::function<Var(Tape<double>&, Var)>& f,
                  const Tensor<double>& point, double step, i64 max_samples,
                  std::uint64_t seed) {
    Tape<double> tape;
    Var x = tape.leaf(point);
    Var loss = f(tape, x);
    tape.backward(loss);
    Tensor<double> analytic = tape.grad(x);

    std::vector<i64> coords(static_cast<std::size_t>(point.numel()));
    for (i64 i = 0; i < point.numel(); ++i) coords[static_cast<std::size_t>(i)] = i;
    if (max_samples > 0 && max_samples < point.numel()) {
        std::mt19937_64 rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(static_cast<std::size_t>(max_samples));
    }

    auto eval = [&](const Tensor<double>& p) {
        Tape<double> t;
        Var v = t.leaf(p);
        Var l = f(t, v);
        return t.value(l).data()[0];
    };

    double max_err = 0.0;
    Tensor<double> probe = point;
    for (i64 idx : coords) {
        const double orig = probe.data()[idx];
        probe.data()[idx] = orig + step;
        const double fp = eval(probe);
        probe.data()[idx] = orig - step;
        const double fm = eval(probe);
        probe.data()[idx] = orig;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic.data()[idx];
        const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
    return max_err;
}

double grad_check_params(
    const std::function<Var(Tape<double>&, std::vector<Var>&)>& f,
    std::vector<Parameter<double>>& params, double step, i64 max_samples,
    std::uint64_t seed) {
    for (auto& p : params) p.zero_grad();
    {
        Tape<double> tape;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (auto& p : params) vars.push_back(tape.param(p));
        Var loss = f(tape, vars);
        tape.backward(loss);
    }

    // flat index space over all parameter scalars
    i64 total = 0;
    for (const auto& p : params) total += p.value.numel();
    std::vector<i64> coords(static_cast<std::size_t>(total));
    for (i64 i = 0; i < total; ++i) coords[static_cast<std::size_t>(i)] = i;
    if (max_samples > 0 && max_samples < total) {
        std::mt19937_64 rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(static_cast<std::size_t>(max_samples));
    }

    auto eval = [&]() {
        Tape<double> t;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (auto& p : params) vars.push_back(t.leaf(p.value));
        Var l = f(t, vars);
        return t.value(l).data()[0];
    };

    double max_err = 0.0;
    for (i64 flat : coords) {
        i64 pi = 0, off = flat;
        while (off >= params[static_cast<std::size_t>(pi)].value.numel()) {
            off -= params[static_cast<std::size_t>(pi)].value.numel();
            ++pi;
        }
        auto& p = params[static_cast<std::size_t>(pi)];
        const double orig = p.value.data()[off];
        p.value.data()[off] = orig + step;
        const double fp = eval();
        p.value.data()[off] = orig - step;
        const double fm = eval();
        p.value.data()[off] = orig;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = p.grad.data()[off];
        const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
        max_err = std::max(max_err, std::abs(a - numeric) / denom);
    }
    return max_err;
}

} // namespace mixnet
