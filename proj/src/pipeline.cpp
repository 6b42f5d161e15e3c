#include "ddg/pipeline.hpp"

#include <cmath>

namespace ddg {

VideoForward forward_video(Tape& tape, const BoundModel& model, const Matrix& rgb,
                           const Matrix& flow, const DdgHyper& hyper, const GraphFlags& flags) {
  if (!rgb.same_shape(flow)) {
    throw ShapeError("forward_video: rgb " + shape_str(rgb) + " vs flow " + shape_str(flow));
  }
  VideoForward f;
  Var feat_rgb = tape.constant(rgb);
  Var feat_flow = tape.constant(flow);
  f.att_rgb_raw = attention_forward(tape, model.att_rgb, feat_rgb);
  f.att_flow_raw = attention_forward(tape, model.att_flow, feat_flow);

  f.graph_used = flags.graph_avg || flags.gcn;
  if (f.graph_used) {
    DdgResult g = ddg_forward(tape, model, feat_rgb, feat_flow, f.att_rgb_raw, f.att_flow_raw,
                              hyper, flags);
    f.enhanced_rgb = g.enhanced_rgb;
    f.enhanced_flow = g.enhanced_flow;
    f.lfc = g.lfc;
    f.partition = std::move(g.partition);
    f.subgraphs = std::move(g.subgraphs);
    f.att_rgb = attention_forward(tape, model.att_rgb, f.enhanced_rgb);
    f.att_flow = attention_forward(tape, model.att_flow, f.enhanced_flow);
  } else {
    f.enhanced_rgb = feat_rgb;
    f.enhanced_flow = feat_flow;
    f.lfc = tape.scalar(0.0);
    f.partition = preclassify(tape.value(f.att_rgb_raw), tape.value(f.att_flow_raw), hyper.eta);
    f.att_rgb = f.att_rgb_raw;
    f.att_flow = f.att_flow_raw;
  }
  f.att_fused = fuse_attention(tape, f.att_rgb, f.att_flow);
  f.cas = cas_forward(tape, model, f.enhanced_rgb, f.enhanced_flow);
  f.suppressed = suppress_cas(tape, f.cas, f.att_fused);
  return f;
}

LossBreakdown video_loss(Tape& tape, const VideoForward& fwd, const std::vector<int>& label,
                         double k_ratio, double lambda1, double lambda2) {
  LossBreakdown out;
  out.base = base_loss(tape, fwd.cas, fwd.suppressed, label, k_ratio);
  out.lfc = fwd.lfc;
  Var lcl = tape.scalar(0.0);  // complementary learning hook, zero by default
  out.total =
      tape.add(out.base, tape.add(tape.scale(out.lfc, lambda1), tape.scale(lcl, lambda2)));
  return out;
}

double total_loss(double base, double lfc, double lcl, double lambda1, double lambda2) {
  const double v = base + lambda1 * lfc + lambda2 * lcl;
  if (!std::isfinite(v)) {
    throw NumericError("total_loss: non-finite value");
  }
  return v;
}

}  // namespace ddg
