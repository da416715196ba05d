#pragma once

#include <vector>

#include "ganmod/encoder.hpp"
#include "ganmod/graph.hpp"

namespace ganmod {

struct LossWeights {
    double contra = 1.0;
    double mtg = 1.0;
    double id = 0.0; // 3 when both source and target contain faces
};

struct LossReport {
    double total = 0, contra = 0, mtg = 0, id = 0;
};

double cosine_sim(const Tensor& a, const Tensor& b);

// InfoNCE form over embedding similarities, evaluated with the log-sum-exp
// trick: -log( exp(l_pos/tau) / (exp(l_pos/tau) + sum_j exp(l_neg_j/tau)) ).
// An empty negative set gives exactly zero.
Var contrastive_graph(Graph& g, Var e_synth, Var e_pos, const std::vector<Var>& e_negs, double tau);

struct MtgTerms {
    Var synth_at_wc; // adapted image rendered from the domain's inverted latent
    Var target;      // the training image (constant)
    Var e_synth_wc;  // embeddings of: adapted(w_c), adapted(w), source(w), source(w_c), target
    Var e_synth_w;
    Var e_src_w;
    Var e_src_wc;
    Var e_target;
};
// reconstruction (pixel L1 + embedding) plus across-domain and within-domain
// direction alignment, unit term weights; a zero-length direction drops its term
Var mtg_graph(Graph& g, const MtgTerms& t);

// 1 - cosine similarity in the identity encoder's space
Var identity_graph(Graph& g, const ToyConvEncoder& id_encoder, Var synth, Var source);

Var weighted_total_graph(Graph& g, Var contra, Var mtg, Var id, const LossWeights& w);

// plain-report assembly; throws TrainingError when any term is non-finite
LossReport weigh(double contra, double mtg, double id, const LossWeights& w);

} // namespace ganmod
