#include <doctest.h>

#include "ganmod/losses.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace ganmod;

namespace {

Tensor unit(Rng& rng, int n) {
    Tensor e = oracle::randn(rng, {n});
    double norm = l2_norm(e);
    for (int64_t i = 0; i < e.numel(); ++i) e[i] /= norm;
    return e;
}

double contrastive_value(const Tensor& e_synth, const Tensor& e_pos, const std::vector<Tensor>& e_negs,
                         double tau) {
    Graph g;
    std::vector<Var> negs;
    for (const Tensor& e : e_negs) negs.push_back(g.constant(e));
    return g.value(contrastive_graph(g, g.constant(e_synth), g.constant(e_pos), negs, tau))[0];
}

} // namespace

TEST_CASE("cosine_sim basics") {
    Tensor e = Tensor::from({0.6, 0.8});
    CHECK(cosine_sim(e, e) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor a = Tensor::from({1.0, 0.0});
    Tensor b = Tensor::from({0.0, 1.0});
    CHECK(cosine_sim(a, b) == doctest::Approx(0.0));

    Tensor neg = Tensor::from({-0.6, -0.8});
    CHECK(cosine_sim(e, neg) == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(cosine_sim(Tensor({2}), e), ArgumentError); // zero norm
    CHECK_THROWS_AS(cosine_sim(e, Tensor::from({1.0, 2.0, 3.0})), ArgumentError);

    Rng rng(1);
    for (int i = 0; i < 20; ++i) {
        Tensor x = oracle::randn(rng, {5}), y = oracle::randn(rng, {5});
        double dot = 0;
        for (int j = 0; j < 5; ++j) dot += x[j] * y[j];
        CHECK(cosine_sim(x, y) == doctest::Approx(dot / (l2_norm(x) * l2_norm(y))).epsilon(1e-12));
    }
}

TEST_CASE("contrastive: hand-derived values") {
    Tensor e_synth = Tensor::from({1.0, 0.0});
    Tensor e_pos = Tensor::from({1.0, 0.0});

    // single-domain registry: no negatives, loss is exactly zero
    CHECK(contrastive_value(e_synth, e_pos, {}, 1.0) == 0.0);

    // two domains with l_pos = l_neg: -log(1/2) = log 2
    CHECK(contrastive_value(e_synth, e_pos, {e_pos}, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    // three domains, l_pos=1, both l_neg=-1: -log(e / (e + 2/e))
    Tensor anti = Tensor::from({-1.0, 0.0});
    double expect = -std::log(std::exp(1.0) / (std::exp(1.0) + 2.0 * std::exp(-1.0)));
    CHECK(contrastive_value(e_synth, e_pos, {anti, anti}, 1.0) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(expect == doctest::Approx(0.2395).epsilon(1e-3));
}

TEST_CASE("contrastive: matches direct formula without the log-sum-exp trick") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        int d = 4 + rng.uniform_int(4);
        int n_negs = rng.uniform_int(4);
        Tensor e_synth = unit(rng, d), e_pos = unit(rng, d);
        std::vector<Tensor> negs;
        for (int i = 0; i < n_negs; ++i) negs.push_back(unit(rng, d));
        double tau = rng.uniform(0.3, 2.0);

        double l_pos = cosine_sim(e_pos, e_synth);
        std::vector<double> l_negs;
        for (const Tensor& e : negs) l_negs.push_back(cosine_sim(e, e_synth));

        double got = contrastive_value(e_synth, e_pos, negs, tau);
        CHECK(got == doctest::Approx(oracle::contrastive(l_pos, l_negs, tau)).epsilon(1e-10));
        CHECK(got >= 0.0);
    }
}

TEST_CASE("contrastive: monotonic in pos/neg similarities, invariant to relabeling") {
    auto with_dots = [&](double lp, std::vector<double> lns) {
        // dots realized through 2-d embeddings: e_synth = [1,0], others = [l, sqrt(1-l^2)]
        Tensor e_synth = Tensor::from({1.0, 0.0});
        Tensor e_pos = Tensor::from({lp, std::sqrt(1.0 - lp * lp)});
        std::vector<Tensor> negs;
        for (double l : lns) negs.push_back(Tensor::from({l, std::sqrt(1.0 - l * l)}));
        return contrastive_value(e_synth, e_pos, negs, 1.0);
    };

    CHECK(with_dots(0.9, {0.1, -0.2}) < with_dots(0.5, {0.1, -0.2})); // higher l_pos, lower loss
    CHECK(with_dots(0.5, {0.4, -0.2}) > with_dots(0.5, {0.1, -0.2})); // higher l_neg, higher loss

    double a = with_dots(0.3, {0.6, -0.4, 0.1});
    double b = with_dots(0.3, {0.1, 0.6, -0.4});
    CHECK(a == doctest::Approx(b).epsilon(1e-12)); // negative order is irrelevant

    Graph g;
    CHECK_THROWS_AS(contrastive_graph(g, {}, {}, {}, 0.0), ConfigError);
}

TEST_CASE("contrastive: gradient w.r.t. synthesized embedding matches finite differences") {
    Rng rng(3);
    Tensor e_synth = unit(rng, 6), e_pos = unit(rng, 6);
    std::vector<Tensor> negs{unit(rng, 6), unit(rng, 6)};

    auto f = [&](const Tensor& x) { return contrastive_value(x, e_pos, negs, 1.0); };

    Graph g;
    Var sv = g.leaf(e_synth, true);
    std::vector<Var> nv;
    for (const Tensor& n : negs) nv.push_back(g.constant(n));
    g.backward(contrastive_graph(g, sv, g.constant(e_pos), nv, 1.0));
    CHECK(oracle::max_grad_rel_err(g.grad(sv), oracle::fd_grad(f, e_synth, 1e-6), 1e-4) < 1e-4);
}

TEST_CASE("mtg: guarded directions and reconstruction-only case") {
    Rng rng(4);
    Tensor img_src = oracle::rand_uniform(rng, {3, 4, 4}, -0.8, 0.8);
    Tensor img_target = oracle::rand_uniform(rng, {3, 4, 4}, -0.8, 0.8);
    Tensor e_src = unit(rng, 8);
    Tensor e_target = unit(rng, 8);

    // adapted == source and w == w_c: all direction terms drop, leaving L_rec
    Graph g;
    MtgTerms t;
    t.synth_at_wc = g.constant(img_src);
    t.target = g.constant(img_target);
    t.e_synth_wc = g.constant(e_src);
    t.e_synth_w = g.constant(e_src);
    t.e_src_w = g.constant(e_src);
    t.e_src_wc = g.constant(e_src);
    t.e_target = g.constant(e_target);
    double got = g.value(mtg_graph(g, t))[0];

    double rec = 0;
    for (int64_t i = 0; i < img_src.numel(); ++i) rec += std::fabs(img_src[i] - img_target[i]);
    rec /= static_cast<double>(img_src.numel());
    double dot = 0;
    for (int i = 0; i < 8; ++i) dot += e_src[i] * e_target[i];
    CHECK(got == doctest::Approx(rec + (1.0 - dot)).epsilon(1e-12));
}

TEST_CASE("mtg: perfect adaptation gives zero reconstruction") {
    Rng rng(5);
    Tensor img = oracle::rand_uniform(rng, {3, 4, 4}, -0.8, 0.8);
    Tensor e = unit(rng, 8);
    Graph g;
    MtgTerms t;
    t.synth_at_wc = g.constant(img);
    t.target = g.constant(img);
    t.e_synth_wc = g.constant(e);
    t.e_synth_w = g.constant(e);
    t.e_src_w = g.constant(e);
    t.e_src_wc = g.constant(e);
    t.e_target = g.constant(e);
    CHECK(g.value(mtg_graph(g, t))[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mtg: random instance equals independent re-implementation") {
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor synth = oracle::rand_uniform(rng, {3, 4, 4}, -0.8, 0.8);
        Tensor target = oracle::rand_uniform(rng, {3, 4, 4}, -0.8, 0.8);
        Tensor e_synth_wc = unit(rng, 8), e_synth_w = unit(rng, 8), e_src_w = unit(rng, 8),
               e_src_wc = unit(rng, 8), e_target = unit(rng, 8);

        Graph g;
        MtgTerms t;
        t.synth_at_wc = g.constant(synth);
        t.target = g.constant(target);
        t.e_synth_wc = g.constant(e_synth_wc);
        t.e_synth_w = g.constant(e_synth_w);
        t.e_src_w = g.constant(e_src_w);
        t.e_src_wc = g.constant(e_src_wc);
        t.e_target = g.constant(e_target);
        double got = g.value(mtg_graph(g, t))[0];

        // independent evaluation
        auto norm_diff = [](const Tensor& a, const Tensor& b) {
            Tensor d(a.shape());
            for (int64_t i = 0; i < a.numel(); ++i) d[i] = a[i] - b[i];
            double n = l2_norm(d);
            for (int64_t i = 0; i < d.numel(); ++i) d[i] /= n;
            return d;
        };
        auto dot_of = [](const Tensor& a, const Tensor& b) {
            double s = 0;
            for (int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
            return s;
        };
        double rec = 0;
        for (int64_t i = 0; i < synth.numel(); ++i) rec += std::fabs(synth[i] - target[i]);
        rec = rec / static_cast<double>(synth.numel()) + 1.0 - dot_of(e_synth_wc, e_target);
        double across = 1.0 - dot_of(norm_diff(e_synth_w, e_src_w), norm_diff(e_target, e_src_wc));
        double within = 1.0 - dot_of(norm_diff(e_synth_w, e_synth_wc), norm_diff(e_src_w, e_src_wc));
        CHECK(got == doctest::Approx(rec + across + within).epsilon(1e-9));
    }
}

TEST_CASE("mtg: gradient w.r.t. adapted image matches finite differences") {
    Rng rng(7);
    Tensor synth = oracle::rand_uniform(rng, {3, 2, 2}, -0.8, 0.8);
    Tensor target = oracle::rand_uniform(rng, {3, 2, 2}, -0.8, 0.8);
    Tensor e_synth_wc = unit(rng, 4), e_synth_w = unit(rng, 4), e_src_w = unit(rng, 4),
           e_src_wc = unit(rng, 4), e_target = unit(rng, 4);

    auto eval = [&](const Tensor& x) {
        Graph g;
        MtgTerms t;
        t.synth_at_wc = g.constant(x);
        t.target = g.constant(target);
        t.e_synth_wc = g.constant(e_synth_wc);
        t.e_synth_w = g.constant(e_synth_w);
        t.e_src_w = g.constant(e_src_w);
        t.e_src_wc = g.constant(e_src_wc);
        t.e_target = g.constant(e_target);
        return g.value(mtg_graph(g, t))[0];
    };

    Graph g;
    MtgTerms t;
    Var leaf = g.leaf(synth, true);
    t.synth_at_wc = leaf;
    t.target = g.constant(target);
    t.e_synth_wc = g.constant(e_synth_wc);
    t.e_synth_w = g.constant(e_synth_w);
    t.e_src_w = g.constant(e_src_w);
    t.e_src_wc = g.constant(e_src_wc);
    t.e_target = g.constant(e_target);
    g.backward(mtg_graph(g, t));
    CHECK(oracle::max_grad_rel_err(g.grad(leaf), oracle::fd_grad(eval, synth, 1e-6), 1e-3) < 1e-4);
}

TEST_CASE("identity loss: zero for identical images, 2 for antipodal embeddings") {
    ToyConvEncoder enc({8, 8, 2002});
    Rng rng(8);
    Tensor img = oracle::rand_uniform(rng, {3, 8, 8}, -0.8, 0.8);

    Graph g;
    Var v = identity_graph(g, enc, g.constant(img), g.constant(img));
    CHECK(g.value(v)[0] == doctest::Approx(0.0).epsilon(1e-9));

    // antipodal embeddings realize the upper bound of 1 - sim
    Tensor e = unit(rng, 8);
    Tensor minus_e = e;
    for (int64_t i = 0; i < minus_e.numel(); ++i) minus_e[i] = -minus_e[i];
    CHECK(1.0 - cosine_sim(e, minus_e) == doctest::Approx(2.0).epsilon(1e-12));

    // random pair matches the hand formula through the same encoder
    Tensor img2 = oracle::rand_uniform(rng, {3, 8, 8}, -0.8, 0.8);
    Graph g2;
    double got = g2.value(identity_graph(g2, enc, g2.constant(img), g2.constant(img2)))[0];
    double want = 1.0 - cosine_sim(enc.embed(img), enc.embed(img2));
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("weighted total: arithmetic, weights, linearity, failure") {
    LossWeights w{1.0, 1.0, 3.0};
    LossReport r = weigh(0.5, 0.2, 0.1, w);
    CHECK(r.total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(r.total - (w.contra * r.contra + w.mtg * r.mtg + w.id * r.id)) <= 1e-6);

    LossWeights no_id{1.0, 1.0, 0.0};
    CHECK(weigh(0.5, 0.2, 123.0, no_id).total == doctest::Approx(0.7)); // id dropped
    CHECK(weigh(0.0, 0.0, 0.0, w).total == 0.0);

    // linear in each term
    double base = weigh(0.5, 0.2, 0.1, w).total;
    CHECK(weigh(0.5 + 0.3, 0.2, 0.1, w).total - base == doctest::Approx(1.0 * 0.3).epsilon(1e-12));
    CHECK(weigh(0.5, 0.2 + 0.3, 0.1, w).total - base == doctest::Approx(1.0 * 0.3).epsilon(1e-12));
    CHECK(weigh(0.5, 0.2, 0.1 + 0.3, w).total - base == doctest::Approx(3.0 * 0.3).epsilon(1e-12));

    CHECK_THROWS_AS(weigh(std::nan(""), 0.0, 0.0, w), TrainingError);
    CHECK_THROWS_AS(weigh(1e308, 1e308, 1e308, w), TrainingError); // overflow to inf

    Graph g;
    Var c = g.constant(Tensor::scalar(0.5));
    Var m = g.constant(Tensor::scalar(0.2));
    Var i = g.constant(Tensor::scalar(0.1));
    CHECK(g.value(weighted_total_graph(g, c, m, i, w))[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.value(weighted_total_graph(g, c, m, Var{}, no_id))[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK_THROWS_AS(weighted_total_graph(g, c, m, Var{}, w), ConfigError);
}
