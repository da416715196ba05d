#pragma once

#include <functional>
#include <vector>

#include "ganmod/tensor.hpp"

namespace ganmod {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are created in topological order; backward() walks
// the tape once in reverse. Ops only record a backward closure when some
// parent requires a gradient, so frozen subgraphs cost nothing extra.
class Graph {
public:
    Var constant(Tensor value) { return make(std::move(value), false); }
    Var leaf(Tensor value, bool requires_grad) { return make(std::move(value), requires_grad); }

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    // Gradient of the last backward() root w.r.t. v (zeros if v was not reached).
    Tensor grad(Var v) const;

    void backward(Var root); // root must be a single-element tensor

    // elementwise
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var add_scalar(Var a, double c);
    Var leaky_relu(Var a, double slope);
    Var tanh(Var a);
    Var exp(Var a);
    Var log(Var a);

    // reductions / vector ops
    Var sum(Var a);
    Var mean(Var a);
    Var mean_abs_diff(Var a, Var b);
    Var dot(Var a, Var b);
    Var l2_normalize(Var a, double eps);

    // x: (n), W: (m,n), b: (m) -> (m)
    Var linear(Var x, Var W, Var b);

    // weight tensors are (C_in, C_out, kh, kw)
    Var modulate(Var w, Var style);
    Var demodulate(Var w, double eps);
    Var filter_scale(Var w, Var delta);
    // u: (C_in), gamma: (C_out), psi: (S) -> (C_in, C_out, S)
    Var rank1(Var u, Var gamma, Var psi);

    Var reshape(Var a, std::vector<int> shape);

    // X: (C_in, H, W), w: (C_in, C_out, k, k) odd k, same padding -> (C_out, Ho, Wo)
    Var conv2d(Var x, Var w, Var bias, int stride = 1);
    Var upsample2(Var x);
    Var global_avg_pool(Var x); // (C,H,W) -> (C)

    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Graph&)> backward;
    };

    Var make(Tensor value, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Tensor& grad_buffer(Var v); // allocate-on-demand, zero-filled
    bool has_grad(Var v) const { return !nodes_[v.id].grad.empty(); }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

} // namespace ganmod
