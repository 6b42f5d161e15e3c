#pragma once

#include <vector>

#include "ddg/base_model.hpp"
#include "ddg/graph.hpp"

namespace ddg {

// One full forward pass for a video. Pre-classification attention comes from
// the raw features; when any graph path is enabled the pipeline attention and
// CAS are recomputed on the enhanced features with the same parameters.
struct VideoForward {
  Var att_rgb_raw;
  Var att_flow_raw;
  Var enhanced_rgb;
  Var enhanced_flow;
  Var att_rgb;
  Var att_flow;
  Var att_fused;
  Var cas;
  Var suppressed;
  Var lfc;  // 1x1 scalar, 0 when the graph or the loss is disabled
  SnippetPartition partition;
  Subgraphs subgraphs;
  bool graph_used = false;
};

VideoForward forward_video(Tape& tape, const BoundModel& model, const Matrix& rgb,
                           const Matrix& flow, const DdgHyper& hyper, const GraphFlags& flags);

struct LossBreakdown {
  Var total;
  Var base;
  Var lfc;
};

// total = base + lambda1 * lfc + lambda2 * lcl; the complementary learning
// loss is an external hook and defaults to constant zero.
LossBreakdown video_loss(Tape& tape, const VideoForward& fwd, const std::vector<int>& label,
                         double k_ratio, double lambda1, double lambda2);

// Scalar form of the composite objective.
double total_loss(double base, double lfc, double lcl, double lambda1, double lambda2);

}  // namespace ddg
