#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mixnet/ops.hpp"
#include "mixnet/tensor.hpp"

namespace mixnet {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { std::fill(grad.storage().begin(), grad.storage().end(), T(0)); }
};

// Test hook: when set to an op name ("sigmoid", "conv3x3", ...), backward
// scales that op's incoming gradient, so a gradient check must flag it.
void set_backward_fault(const std::string& op_name);
const std::string& backward_fault();

// Records a forward computation and replays it in exact reverse order to
// accumulate gradients. One tape per training step; not thread-shared.
template <typename T>
class Tape {
public:
    Var leaf(Tensor<T> value);
    // Leaf tied to a Parameter: backward adds the leaf gradient into p.grad.
    Var param(Parameter<T>& p);

    Var conv1x1(Var x, Var w, Var b);
    Var conv3x3(Var x, Var w, Var b);
    Var gelu(Var x);
    Var relu(Var x);
    Var sigmoid(Var x);
    Var layer_norm(Var x, Var gamma, Var beta);
    Var global_avg_pool(Var x);
    Var permute(Var x, AxisOrder order);
    Var interpolate(Var x, i64 target_h, i64 target_w, Interp mode);
    Var concat_channels(Var a, Var b);
    Var ew_mul(Var a, Var b);
    Var ew_add(Var a, Var b);
    Var space_to_channels(Var x, i64 factor);
    Var channels_to_space(Var x, i64 factor);
    Var l1_loss(Var pred, Var target); // scalar, shape (1,1,1,1)

    const Tensor<T>& value(Var v) const { return nodes_[check(v)].value; }
    const Tensor<T>& grad(Var v) const { return nodes_[check(v)].grad; }

    // Zeroes node gradients, seeds d(loss)/d(loss)=1 and sweeps in reverse
    // recording order; parameter gradients accumulate (+=) into their
    // Parameter objects, so calling backward twice doubles them.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        std::string op;
        Tensor<T> value;
        Tensor<T> grad;
        Parameter<T>* bound = nullptr;
        std::function<void(Tape&, const Tensor<T>&)> back; // empty for leaves
    };

    std::size_t check(Var v) const;
    Var push(std::string op, Tensor<T> value,
             std::function<void(Tape&, const Tensor<T>&)> back);
    void add_grad(int id, const Tensor<T>& g);

    std::vector<Node> nodes_;
};

// Max relative error between tape gradients and central finite differences of
// f at `point`, sampled over at most `max_samples` coordinates (all if <= 0).
// f receives a fresh tape plus the input leaf and must return a scalar Var.
double grad_check(const std::function<Var(Tape<double>&, Var)>& f,
                  const Tensor<double>& point, double step = 1e-4,
                  i64 max_samples = -1, std::uint64_t seed = 0);

// Same, but w.r.t. a set of parameters with a fixed input.
double grad_check_params(
    const std::function<Var(Tape<double>&, std::vector<Var>&)>& f,
    std::vector<Parameter<double>>& params, double step = 1e-4,
    i64 max_samples = -1, std::uint64_t seed = 0);

} // namespace mixnet
