#include "ganmod/losses.hpp"

#include <algorithm>
#include <cmath>

namespace ganmod {

double cosine_sim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ArgumentError("cosine_sim: shape mismatch");
    double na = l2_norm(a), nb = l2_norm(b);
    if (na < 1e-9 || nb < 1e-9) throw ArgumentError("cosine_sim: zero-norm input");
    double dot = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) dot += a[i] * b[i];
    return dot / (na * nb);
}

Var contrastive_graph(Graph& g, Var e_synth, Var e_pos, const std::vector<Var>& e_negs, double tau) {
    if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
    Var l_pos = g.scale(g.dot(e_pos, e_synth), 1.0 / tau);
    std::vector<Var> logits{l_pos};
    for (Var e_neg : e_negs) logits.push_back(g.scale(g.dot(e_neg, e_synth), 1.0 / tau));
    double shift = g.value(logits[0])[0];
    for (Var l : logits) shift = std::max(shift, g.value(l)[0]);
    Var sum_exp;
    for (Var l : logits) {
        Var e = g.exp(g.add_scalar(l, -shift));
        sum_exp = sum_exp.valid() ? g.add(sum_exp, e) : e;
    }
    return g.sub(g.add_scalar(g.log(sum_exp), shift), l_pos);
}

namespace {

// normalized difference, or an invalid Var when the difference is (nearly) zero.
// the guard is deliberately soft: early in adaptation the synth/source embeddings
// sit on top of each other, and dividing by a vanishing norm would turn this
// term into a gradient firehose right at init
Var direction(Graph& g, Var a, Var b) {
    Var d = g.sub(a, b);
    if (l2_norm(g.value(d)) < 1e-12) return Var{};
    return g.l2_normalize(d, 1e-2);
}

Var one_minus_dot(Graph& g, Var a, Var b) { return g.add_scalar(g.scale(g.dot(a, b), -1.0), 1.0); }

} // namespace

Var mtg_graph(Graph& g, const MtgTerms& t) {
    Var rec = g.add(g.mean_abs_diff(t.synth_at_wc, t.target), one_minus_dot(g, t.e_synth_wc, t.e_target));
    Var total = rec;
    Var across_a = direction(g, t.e_synth_w, t.e_src_w);
    Var across_b = direction(g, t.e_target, t.e_src_wc);
    if (across_a.valid() && across_b.valid()) total = g.add(total, one_minus_dot(g, across_a, across_b));
    Var within_a = direction(g, t.e_synth_w, t.e_synth_wc);
    Var within_b = direction(g, t.e_src_w, t.e_src_wc);
    if (within_a.valid() && within_b.valid()) total = g.add(total, one_minus_dot(g, within_a, within_b));
    return total;
}

Var identity_graph(Graph& g, const ToyConvEncoder& id_encoder, Var synth, Var source) {
    Var e_synth = id_encoder.embed_graph(g, synth);
    Var e_src = id_encoder.embed_graph(g, source);
    return one_minus_dot(g, e_synth, e_src);
}

Var weighted_total_graph(Graph& g, Var contra, Var mtg, Var id, const LossWeights& w) {
    Var total = g.add(g.scale(contra, w.contra), g.scale(mtg, w.mtg));
    if (w.id != 0.0) {
        if (!id.valid()) throw ConfigError("identity loss weighted but not computed");
        total = g.add(total, g.scale(id, w.id));
    }
    return total;
}

LossReport weigh(double contra, double mtg, double id, const LossWeights& w) {
    LossReport r;
    r.contra = contra;
    r.mtg = mtg;
    r.id = id;
    r.total = w.contra * contra + w.mtg * mtg + w.id * id;
    if (!std::isfinite(r.total))
        throw TrainingError("non-finite loss: contra=" + std::to_string(contra) + " mtg=" + std::to_string(mtg) +
                            " id=" + std::to_string(id));
    return r;
}

} // namespace ganmod
