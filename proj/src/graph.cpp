#include "ganmod/graph.hpp"

#include <cmath>
#include <utility>

namespace ganmod {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_weight4(const Tensor& w, const char* op) {
    if (w.rank() != 4)
        throw ConfigError(std::string(op) + ": expected (C_in,C_out,kh,kw) weight, got " + shape_str(w.shape()));
}

} // namespace

Tensor& Graph::grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Tensor Graph::grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Tensor(n.value.shape());
    return n.grad;
}

void Graph::backward(Var root) {
    if (backward_done_) throw ConfigError("Graph::backward already ran on this tape");
    backward_done_ = true;
    if (value(root).numel() != 1) throw ConfigError("backward root must be scalar");
    grad_buffer(root)[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.backward && !n.grad.empty()) n.backward(*this);
    }
}

Var Graph::add(Var a, Var b) {
    check_same_shape(value(a), value(b), "add");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += vb[i];
    Var r = make(std::move(out), requires_grad(a) || requires_grad(b));
    if (requires_grad(r)) {
        bool ga = requires_grad(a), gb = requires_grad(b);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            if (ga) {
                Tensor& da = g.grad_buffer(a);
                for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
            }
            if (gb) {
                Tensor& db = g.grad_buffer(b);
                for (int64_t i = 0; i < gr.numel(); ++i) db[i] += gr[i];
            }
        };
    }
    return r;
}

Var Graph::sub(Var a, Var b) {
    check_same_shape(value(a), value(b), "sub");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= vb[i];
    Var r = make(std::move(out), requires_grad(a) || requires_grad(b));
    if (requires_grad(r)) {
        bool ga = requires_grad(a), gb = requires_grad(b);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            if (ga) {
                Tensor& da = g.grad_buffer(a);
                for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
            }
            if (gb) {
                Tensor& db = g.grad_buffer(b);
                for (int64_t i = 0; i < gr.numel(); ++i) db[i] -= gr[i];
            }
        };
    }
    return r;
}

Var Graph::mul(Var a, Var b) {
    check_same_shape(value(a), value(b), "mul");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= vb[i];
    Var r = make(std::move(out), requires_grad(a) || requires_grad(b));
    if (requires_grad(r)) {
        bool ga = requires_grad(a), gb = requires_grad(b);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            if (ga) {
                Tensor& da = g.grad_buffer(a);
                const Tensor& vb2 = g.value(b);
                for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] * vb2[i];
            }
            if (gb) {
                Tensor& db = g.grad_buffer(b);
                const Tensor& va = g.value(a);
                for (int64_t i = 0; i < gr.numel(); ++i) db[i] += gr[i] * va[i];
            }
        };
    }
    return r;
}

Var Graph::scale(Var a, double c) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += c * gr[i];
        };
    }
    return r;
}

Var Graph::add_scalar(Var a, double c) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += c;
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
        };
    }
    return r;
}

Var Graph::leaky_relu(Var a, double slope) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i)
        if (out[i] < 0) out[i] *= slope;
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& va = g.value(a);
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] * (va[i] < 0 ? slope : 1.0);
        };
    }
    return r;
}

Var Graph::tanh(Var a) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& y = g.value(r);
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] * (1.0 - y[i] * y[i]);
        };
    }
    return r;
}

Var Graph::exp(Var a) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& y = g.value(r);
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] * y[i];
        };
    }
    return r;
}

Var Graph::log(Var a) {
    Tensor out = value(a);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(out[i]);
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& va = g.value(a);
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] / va[i];
        };
    }
    return r;
}

Var Graph::sum(Var a) {
    double s = 0.0;
    const Tensor& va = value(a);
    for (int64_t i = 0; i < va.numel(); ++i) s += va[i];
    Var r = make(Tensor::scalar(s), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            double gr = g.nodes_[r.id].grad[0];
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < da.numel(); ++i) da[i] += gr;
        };
    }
    return r;
}

Var Graph::mean(Var a) {
    const Tensor& va = value(a);
    double s = 0.0;
    for (int64_t i = 0; i < va.numel(); ++i) s += va[i];
    double n = static_cast<double>(va.numel());
    Var r = make(Tensor::scalar(s / n), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            double gr = g.nodes_[r.id].grad[0] / n;
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < da.numel(); ++i) da[i] += gr;
        };
    }
    return r;
}

Var Graph::mean_abs_diff(Var a, Var b) {
    check_same_shape(value(a), value(b), "mean_abs_diff");
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    double s = 0.0;
    for (int64_t i = 0; i < va.numel(); ++i) s += std::fabs(va[i] - vb[i]);
    double n = static_cast<double>(va.numel());
    Var r = make(Tensor::scalar(s / n), requires_grad(a) || requires_grad(b));
    if (requires_grad(r)) {
        bool ga = requires_grad(a), gb = requires_grad(b);
        nodes_[r.id].backward = [=](Graph& g) {
            double gr = g.nodes_[r.id].grad[0] / n;
            const Tensor& va2 = g.value(a);
            const Tensor& vb2 = g.value(b);
            for (int64_t i = 0; i < va2.numel(); ++i) {
                double sgn = va2[i] > vb2[i] ? 1.0 : (va2[i] < vb2[i] ? -1.0 : 0.0);
                if (ga) g.grad_buffer(a)[i] += gr * sgn;
                if (gb) g.grad_buffer(b)[i] -= gr * sgn;
            }
        };
    }
    return r;
}

Var Graph::dot(Var a, Var b) {
    check_same_shape(value(a), value(b), "dot");
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    double s = 0.0;
    for (int64_t i = 0; i < va.numel(); ++i) s += va[i] * vb[i];
    Var r = make(Tensor::scalar(s), requires_grad(a) || requires_grad(b));
    if (requires_grad(r)) {
        bool ga = requires_grad(a), gb = requires_grad(b);
        nodes_[r.id].backward = [=](Graph& g) {
            double gr = g.nodes_[r.id].grad[0];
            const Tensor& va2 = g.value(a);
            const Tensor& vb2 = g.value(b);
            if (ga) {
                Tensor& da = g.grad_buffer(a);
                for (int64_t i = 0; i < va2.numel(); ++i) da[i] += gr * vb2[i];
            }
            if (gb) {
                Tensor& db = g.grad_buffer(b);
                for (int64_t i = 0; i < vb2.numel(); ++i) db[i] += gr * va2[i];
            }
        };
    }
    return r;
}

Var Graph::l2_normalize(Var a, double eps) {
    const Tensor& va = value(a);
    double ss = eps;
    for (int64_t i = 0; i < va.numel(); ++i) ss += va[i] * va[i];
    double d = std::sqrt(ss);
    Tensor out = va;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] /= d;
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& va2 = g.value(a);
            Tensor& da = g.grad_buffer(a);
            double gx = 0.0;
            for (int64_t i = 0; i < gr.numel(); ++i) gx += gr[i] * va2[i];
            double d3 = d * d * d;
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i] / d - va2[i] * gx / d3;
        };
    }
    return r;
}

Var Graph::linear(Var x, Var W, Var b) {
    const Tensor& vx = value(x);
    const Tensor& vW = value(W);
    const Tensor& vb = value(b);
    if (vW.rank() != 2 || vx.numel() != vW.size(1) || vb.numel() != vW.size(0))
        throw ConfigError("linear: shape mismatch x" + shape_str(vx.shape()) + " W" + shape_str(vW.shape()) +
                          " b" + shape_str(vb.shape()));
    int m = vW.size(0), n = vW.size(1);
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double s = vb[i];
        const double* wrow = vW.data() + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) s += wrow[j] * vx[j];
        out[i] = s;
    }
    Var r = make(std::move(out), requires_grad(x) || requires_grad(W) || requires_grad(b));
    if (requires_grad(r)) {
        bool gx = requires_grad(x), gW = requires_grad(W), gb = requires_grad(b);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& vx2 = g.value(x);
            const Tensor& vW2 = g.value(W);
            if (gx) {
                Tensor& dx = g.grad_buffer(x);
                for (int i = 0; i < m; ++i) {
                    const double* wrow = vW2.data() + static_cast<int64_t>(i) * n;
                    for (int j = 0; j < n; ++j) dx[j] += gr[i] * wrow[j];
                }
            }
            if (gW) {
                Tensor& dW = g.grad_buffer(W);
                for (int i = 0; i < m; ++i) {
                    double* drow = dW.data() + static_cast<int64_t>(i) * n;
                    for (int j = 0; j < n; ++j) drow[j] += gr[i] * vx2[j];
                }
            }
            if (gb) {
                Tensor& db = g.grad_buffer(b);
                for (int i = 0; i < m; ++i) db[i] += gr[i];
            }
        };
    }
    return r;
}

Var Graph::modulate(Var w, Var style) {
    const Tensor& vw = value(w);
    const Tensor& vs = value(style);
    check_weight4(vw, "modulate");
    if (vs.numel() != vw.size(0))
        throw ConfigError("modulate: style dim " + std::to_string(vs.numel()) + " != C_in " + std::to_string(vw.size(0)));
    int cin = vw.size(0);
    int64_t per_in = vw.numel() / cin;
    Tensor out = vw;
    for (int i = 0; i < cin; ++i) {
        double s = vs[i];
        double* p = out.data() + i * per_in;
        for (int64_t t = 0; t < per_in; ++t) p[t] *= s;
    }
    Var r = make(std::move(out), requires_grad(w) || requires_grad(style));
    if (requires_grad(r)) {
        bool gw = requires_grad(w), gs = requires_grad(style);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& vw2 = g.value(w);
            const Tensor& vs2 = g.value(style);
            if (gw) {
                Tensor& dw = g.grad_buffer(w);
                for (int i = 0; i < cin; ++i) {
                    double s = vs2[i];
                    for (int64_t t = 0; t < per_in; ++t) dw[i * per_in + t] += s * gr[i * per_in + t];
                }
            }
            if (gs) {
                Tensor& ds = g.grad_buffer(style);
                for (int i = 0; i < cin; ++i) {
                    double acc = 0.0;
                    for (int64_t t = 0; t < per_in; ++t) acc += gr[i * per_in + t] * vw2[i * per_in + t];
                    ds[i] += acc;
                }
            }
        };
    }
    return r;
}

Var Graph::demodulate(Var w, double eps) {
    const Tensor& vw = value(w);
    check_weight4(vw, "demodulate");
    int cin = vw.size(0), cout = vw.size(1);
    int64_t sp = static_cast<int64_t>(vw.size(2)) * vw.size(3);
    std::vector<double> denom(cout);
    for (int j = 0; j < cout; ++j) {
        double ss = eps;
        for (int i = 0; i < cin; ++i) {
            const double* p = vw.data() + (static_cast<int64_t>(i) * cout + j) * sp;
            for (int64_t t = 0; t < sp; ++t) ss += p[t] * p[t];
        }
        denom[j] = std::sqrt(ss);
    }
    Tensor out = vw;
    for (int i = 0; i < cin; ++i)
        for (int j = 0; j < cout; ++j) {
            double* p = out.data() + (static_cast<int64_t>(i) * cout + j) * sp;
            for (int64_t t = 0; t < sp; ++t) p[t] /= denom[j];
        }
    Var r = make(std::move(out), requires_grad(w));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& vw2 = g.value(w);
            Tensor& dw = g.grad_buffer(w);
            for (int j = 0; j < cout; ++j) {
                double gx = 0.0; // sum of g * w over the j-th output filter
                for (int i = 0; i < cin; ++i) {
                    int64_t base = (static_cast<int64_t>(i) * cout + j) * sp;
                    for (int64_t t = 0; t < sp; ++t) gx += gr[base + t] * vw2[base + t];
                }
                double d = denom[j], d3 = d * d * d;
                for (int i = 0; i < cin; ++i) {
                    int64_t base = (static_cast<int64_t>(i) * cout + j) * sp;
                    for (int64_t t = 0; t < sp; ++t) dw[base + t] += gr[base + t] / d - vw2[base + t] * gx / d3;
                }
            }
        };
    }
    return r;
}

Var Graph::filter_scale(Var w, Var delta) {
    const Tensor& vw = value(w);
    const Tensor& vd = value(delta);
    check_weight4(vw, "filter_scale");
    if (vd.numel() != vw.size(1))
        throw ConfigError("filter_scale: delta dim " + std::to_string(vd.numel()) + " != C_out " +
                          std::to_string(vw.size(1)));
    int cin = vw.size(0), cout = vw.size(1);
    int64_t sp = static_cast<int64_t>(vw.size(2)) * vw.size(3);
    Tensor out = vw;
    for (int i = 0; i < cin; ++i)
        for (int j = 0; j < cout; ++j) {
            double s = vd[j];
            double* p = out.data() + (static_cast<int64_t>(i) * cout + j) * sp;
            for (int64_t t = 0; t < sp; ++t) p[t] *= s;
        }
    Var r = make(std::move(out), requires_grad(w) || requires_grad(delta));
    if (requires_grad(r)) {
        bool gw = requires_grad(w), gd = requires_grad(delta);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& vw2 = g.value(w);
            const Tensor& vd2 = g.value(delta);
            Tensor* dw = gw ? &g.grad_buffer(w) : nullptr;
            Tensor* dd = gd ? &g.grad_buffer(delta) : nullptr;
            for (int j = 0; j < cout; ++j) {
                double acc = 0.0;
                for (int i = 0; i < cin; ++i) {
                    int64_t base = (static_cast<int64_t>(i) * cout + j) * sp;
                    for (int64_t t = 0; t < sp; ++t) {
                        if (dw) (*dw)[base + t] += vd2[j] * gr[base + t];
                        acc += gr[base + t] * vw2[base + t];
                    }
                }
                if (dd) (*dd)[j] += acc;
            }
        };
    }
    return r;
}

Var Graph::rank1(Var u, Var gamma, Var psi) {
    const Tensor& vu = value(u);
    const Tensor& vg = value(gamma);
    const Tensor& vp = value(psi);
    int cin = static_cast<int>(vu.numel()), cout = static_cast<int>(vg.numel()), sp = static_cast<int>(vp.numel());
    Tensor out({cin, cout, sp});
    for (int i = 0; i < cin; ++i)
        for (int j = 0; j < cout; ++j) {
            double ug = vu[i] * vg[j];
            double* p = out.data() + (static_cast<int64_t>(i) * cout + j) * sp;
            for (int t = 0; t < sp; ++t) p[t] = ug * vp[t];
        }
    Var r = make(std::move(out), requires_grad(u) || requires_grad(gamma) || requires_grad(psi));
    if (requires_grad(r)) {
        bool gu = requires_grad(u), gg = requires_grad(gamma), gp = requires_grad(psi);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& vu2 = g.value(u);
            const Tensor& vg2 = g.value(gamma);
            const Tensor& vp2 = g.value(psi);
            Tensor* du = gu ? &g.grad_buffer(u) : nullptr;
            Tensor* dg = gg ? &g.grad_buffer(gamma) : nullptr;
            Tensor* dp = gp ? &g.grad_buffer(psi) : nullptr;
            for (int i = 0; i < cin; ++i)
                for (int j = 0; j < cout; ++j) {
                    const double* p = gr.data() + (static_cast<int64_t>(i) * cout + j) * sp;
                    double ug = vu2[i] * vg2[j];
                    double gpsi = 0.0; // sum of grad * psi over this (i,j) fiber
                    for (int t = 0; t < sp; ++t) {
                        gpsi += p[t] * vp2[t];
                        if (dp) (*dp)[t] += p[t] * ug;
                    }
                    if (du) (*du)[i] += gpsi * vg2[j];
                    if (dg) (*dg)[j] += gpsi * vu2[i];
                }
        };
    }
    return r;
}

Var Graph::reshape(Var a, std::vector<int> shape) {
    Tensor out = value(a).reshaped(shape);
    Var r = make(std::move(out), requires_grad(a));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            Tensor& da = g.grad_buffer(a);
            for (int64_t i = 0; i < gr.numel(); ++i) da[i] += gr[i];
        };
    }
    return r;
}

Var Graph::conv2d(Var x, Var w, Var bias, int stride) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    const Tensor& vb = value(bias);
    check_weight4(vw, "conv2d");
    if (vx.rank() != 3) throw ConfigError("conv2d: expected (C,H,W) input, got " + shape_str(vx.shape()));
    if (vx.size(0) != vw.size(0))
        throw ConfigError("conv2d: input channels " + std::to_string(vx.size(0)) + " != weight C_in " +
                          std::to_string(vw.size(0)));
    if (vw.size(2) != vw.size(3) || vw.size(2) % 2 == 0) throw ConfigError("conv2d: kernel must be square and odd");
    if (vb.numel() != vw.size(1)) throw ConfigError("conv2d: bias dim != C_out");
    int cin = vw.size(0), cout = vw.size(1), k = vw.size(2), pad = k / 2;
    int H = vx.size(1), W = vx.size(2);
    int Ho = (H + 2 * pad - k) / stride + 1;
    int Wo = (W + 2 * pad - k) / stride + 1;
    Tensor out({cout, Ho, Wo});

    auto x_range = [&](int off, int limit, int outn) {
        // smallest/largest o with 0 <= o*stride + off < limit; the numerator
        // can go negative (kernel fully off the input), so floor explicitly
        int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
        int num = limit - 1 - off;
        int hi = num < 0 ? -1 : num / stride;
        if (hi > outn - 1) hi = outn - 1;
        return std::pair<int, int>(lo, hi);
    };

    for (int co = 0; co < cout; ++co) {
        double* oplane = out.data() + static_cast<int64_t>(co) * Ho * Wo;
        double b = vb[co];
        for (int64_t t = 0; t < static_cast<int64_t>(Ho) * Wo; ++t) oplane[t] = b;
        for (int ci = 0; ci < cin; ++ci) {
            const double* iplane = vx.data() + static_cast<int64_t>(ci) * H * W;
            for (int ky = 0; ky < k; ++ky) {
                auto [oy_lo, oy_hi] = x_range(ky - pad, H, Ho);
                for (int kx = 0; kx < k; ++kx) {
                    double wv = vw.at(ci, co, ky, kx);
                    if (wv == 0.0) continue;
                    auto [ox_lo, ox_hi] = x_range(kx - pad, W, Wo);
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const double* irow = iplane + static_cast<int64_t>(oy * stride + ky - pad) * W + (kx - pad);
                        double* orow = oplane + static_cast<int64_t>(oy) * Wo;
                        for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * irow[static_cast<int64_t>(ox) * stride];
                    }
                }
            }
        }
    }

    Var r = make(std::move(out), requires_grad(x) || requires_grad(w) || requires_grad(bias));
    if (requires_grad(r)) {
        bool gx = requires_grad(x), gw = requires_grad(w), gb = requires_grad(bias);
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            const Tensor& vx2 = g.value(x);
            const Tensor& vw2 = g.value(w);
            auto x_range2 = [&](int off, int limit, int outn) {
                int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
                int num = limit - 1 - off;
                int hi = num < 0 ? -1 : num / stride;
                if (hi > outn - 1) hi = outn - 1;
                return std::pair<int, int>(lo, hi);
            };
            if (gb) {
                Tensor& db = g.grad_buffer(bias);
                for (int co = 0; co < cout; ++co) {
                    const double* gplane = gr.data() + static_cast<int64_t>(co) * Ho * Wo;
                    double s = 0.0;
                    for (int64_t t = 0; t < static_cast<int64_t>(Ho) * Wo; ++t) s += gplane[t];
                    db[co] += s;
                }
            }
            for (int co = 0; co < cout; ++co) {
                const double* gplane = gr.data() + static_cast<int64_t>(co) * Ho * Wo;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* iplane = vx2.data() + static_cast<int64_t>(ci) * H * W;
                    double* dplane = gx ? g.grad_buffer(x).data() + static_cast<int64_t>(ci) * H * W : nullptr;
                    for (int ky = 0; ky < k; ++ky) {
                        auto [oy_lo, oy_hi] = x_range2(ky - pad, H, Ho);
                        for (int kx = 0; kx < k; ++kx) {
                            auto [ox_lo, ox_hi] = x_range2(kx - pad, W, Wo);
                            double wv = vw2.at(ci, co, ky, kx);
                            double wacc = 0.0;
                            for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                                int64_t ibase = static_cast<int64_t>(oy * stride + ky - pad) * W + (kx - pad);
                                const double* grow = gplane + static_cast<int64_t>(oy) * Wo;
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                    double gv = grow[ox];
                                    int64_t ii = ibase + static_cast<int64_t>(ox) * stride;
                                    wacc += gv * iplane[ii];
                                    if (dplane) dplane[ii] += gv * wv;
                                }
                            }
                            if (gw) g.grad_buffer(w).at(ci, co, ky, kx) += wacc;
                        }
                    }
                }
            }
        };
    }
    return r;
}

Var Graph::upsample2(Var x) {
    const Tensor& vx = value(x);
    if (vx.rank() != 3) throw ConfigError("upsample2: expected (C,H,W)");
    int C = vx.size(0), H = vx.size(1), W = vx.size(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y) {
            const double* irow = vx.data() + (static_cast<int64_t>(c) * H + y) * W;
            double* orow0 = out.data() + (static_cast<int64_t>(c) * 2 * H + 2 * y) * 2 * W;
            double* orow1 = orow0 + 2 * W;
            for (int xw = 0; xw < W; ++xw) {
                double v = irow[xw];
                orow0[2 * xw] = v;
                orow0[2 * xw + 1] = v;
                orow1[2 * xw] = v;
                orow1[2 * xw + 1] = v;
            }
        }
    Var r = make(std::move(out), requires_grad(x));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            Tensor& dx = g.grad_buffer(x);
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H; ++y) {
                    double* drow = dx.data() + (static_cast<int64_t>(c) * H + y) * W;
                    const double* grow0 = gr.data() + (static_cast<int64_t>(c) * 2 * H + 2 * y) * 2 * W;
                    const double* grow1 = grow0 + 2 * W;
                    for (int xw = 0; xw < W; ++xw)
                        drow[xw] += grow0[2 * xw] + grow0[2 * xw + 1] + grow1[2 * xw] + grow1[2 * xw + 1];
                }
        };
    }
    return r;
}

Var Graph::global_avg_pool(Var x) {
    const Tensor& vx = value(x);
    if (vx.rank() != 3) throw ConfigError("global_avg_pool: expected (C,H,W)");
    int C = vx.size(0);
    int64_t hw = static_cast<int64_t>(vx.size(1)) * vx.size(2);
    Tensor out({C});
    for (int c = 0; c < C; ++c) {
        const double* p = vx.data() + c * hw;
        double s = 0.0;
        for (int64_t t = 0; t < hw; ++t) s += p[t];
        out[c] = s / static_cast<double>(hw);
    }
    Var r = make(std::move(out), requires_grad(x));
    if (requires_grad(r)) {
        nodes_[r.id].backward = [=](Graph& g) {
            const Tensor& gr = g.nodes_[r.id].grad;
            Tensor& dx = g.grad_buffer(x);
            for (int c = 0; c < C; ++c) {
                double gv = gr[c] / static_cast<double>(hw);
                double* p = dx.data() + c * hw;
                for (int64_t t = 0; t < hw; ++t) p[t] += gv;
            }
        };
    }
    return r;
}

} // namespace ganmod
