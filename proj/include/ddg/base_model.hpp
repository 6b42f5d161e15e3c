#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ddg/matrix.hpp"
#include "ddg/tape.hpp"

namespace ddg {

inline constexpr double kLeakySlope = 0.2;

// One temporal convolution: weight is d_out x (d_in * span), bias d_out x 1.
struct ConvParams {
  Matrix w;
  Matrix b;
  int span = 1;
};

// Attention module: conv (D -> D) + LeakyReLU + conv (D -> 1) + sigmoid.
struct AttentionParams {
  ConvParams c1;
  ConvParams c2;
};

// One GCN branch: L square D x D layer weights.
struct GcnStack {
  std::vector<Matrix> weights;
};

struct ModelParams {
  int feature_dim = 0;
  int num_categories = 0;  // C; the CAS adds one background row

  AttentionParams att_rgb;
  AttentionParams att_flow;
  ConvParams fusion;      // 2D -> D, LeakyReLU after
  ConvParams classifier;  // D -> C+1, span 1

  // Per-modality, per-branch GCN weights.
  GcnStack gcn_rgb_action;
  GcnStack gcn_rgb_background;
  GcnStack gcn_flow_action;
  GcnStack gcn_flow_background;

  static ModelParams init(int feature_dim, int num_categories, int gcn_layers,
                          std::uint64_t seed, int att_span = 3, int fusion_span = 3);

  // Canonical (name, matrix) listing; order is the checkpoint order.
  std::vector<std::pair<std::string, Matrix*>> named();
  std::vector<std::pair<std::string, const Matrix*>> named() const;
};

// Tape handles for one registration of the model parameters. Registering once
// lets both attention passes (raw and enhanced features) share leaves so
// gradients accumulate.
struct BoundConv {
  Var w;
  Var b;
  int span = 1;
};

struct BoundAttention {
  BoundConv c1;
  BoundConv c2;
};

struct BoundGcn {
  std::vector<Var> weights;
};

struct BoundModel {
  int feature_dim = 0;
  int num_categories = 0;
  BoundAttention att_rgb;
  BoundAttention att_flow;
  BoundConv fusion;
  BoundConv classifier;
  BoundGcn gcn_rgb_action;
  BoundGcn gcn_rgb_background;
  BoundGcn gcn_flow_action;
  BoundGcn gcn_flow_background;
};

BoundModel bind_model(Tape& tape, const ModelParams& params);

// Per-snippet action weights in (0, 1); features D x T, result 1 x T.
Var attention_forward(Tape& tape, const BoundAttention& att, Var features);

// Elementwise mean of the two modality attentions.
Var fuse_attention(Tape& tape, Var att_rgb, Var att_flow);

// CAS logits: concatenate streams channel-wise, fuse, classify. (C+1) x T.
Var cas_forward(Tape& tape, const BoundModel& model, Var feat_rgb, Var feat_flow);

// Column t scaled by attention weight a_t.
Var suppress_cas(Tape& tape, Var cas, Var attention);

// Per-category mean of the top ceil(k_ratio*T) snippet logits. (C+1) x 1.
Var video_score_logits(Tape& tape, Var cas, double k_ratio);

// Softmax over the C+1 aggregated logits.
Var video_scores(Tape& tape, Var cas, double k_ratio);

// Video-level MIL objective: the foreground CAS is classified against the
// label with background marked positive, the suppressed CAS against the label
// with background negative. Each term is softmax cross-entropy against the
// normalized multi-hot target, shifted by the target entropy so a perfect fit
// reaches exactly zero.
Var base_loss(Tape& tape, Var cas, Var suppressed, const std::vector<int>& label,
              double k_ratio);

int top_k_count(double k_ratio, int total);

}  // namespace ddg
