#include "ddg/base_model.hpp"

#include <cmath>
#include <random>

namespace ddg {

namespace {

Matrix uniform_matrix(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (double& v : m.data) {
    v = dist(rng);
  }
  return m;
}

ConvParams init_conv(int d_in, int d_out, int span, std::mt19937_64& rng) {
  ConvParams c;
  c.span = span;
  c.w = uniform_matrix(d_out, d_in * span, 1.0 / std::sqrt(static_cast<double>(d_in * span)), rng);
  c.b = Matrix(d_out, 1, 0.0);
  return c;
}

GcnStack init_gcn(int d, int layers, std::mt19937_64& rng) {
  GcnStack g;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < layers; ++l) {
    g.weights.push_back(uniform_matrix(d, d, bound, rng));
  }
  return g;
}

}  // namespace

ModelParams ModelParams::init(int feature_dim, int num_categories, int gcn_layers,
                              std::uint64_t seed, int att_span, int fusion_span) {
  if (feature_dim < 1 || num_categories < 1 || gcn_layers < 1) {
    throw ContractError("ModelParams::init: invalid dimensions");
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.feature_dim = feature_dim;
  p.num_categories = num_categories;
  p.att_rgb.c1 = init_conv(feature_dim, feature_dim, att_span, rng);
  p.att_rgb.c2 = init_conv(feature_dim, 1, att_span, rng);
  p.att_flow.c1 = init_conv(feature_dim, feature_dim, att_span, rng);
  p.att_flow.c2 = init_conv(feature_dim, 1, att_span, rng);
  p.fusion = init_conv(2 * feature_dim, feature_dim, fusion_span, rng);
  p.classifier = init_conv(feature_dim, num_categories + 1, 1, rng);
  p.gcn_rgb_action = init_gcn(feature_dim, gcn_layers, rng);
  p.gcn_rgb_background = init_gcn(feature_dim, gcn_layers, rng);
  p.gcn_flow_action = init_gcn(feature_dim, gcn_layers, rng);
  p.gcn_flow_background = init_gcn(feature_dim, gcn_layers, rng);
  return p;
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::named() {
  std::vector<std::pair<std::string, Matrix*>> out;
  auto conv = [&out](const std::string& prefix, ConvParams& c) {
    out.emplace_back(prefix + ".w", &c.w);
    out.emplace_back(prefix + ".b", &c.b);
  };
  auto gcn = [&out](const std::string& prefix, GcnStack& g) {
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      out.emplace_back(prefix + ".w" + std::to_string(l + 1), &g.weights[l]);
    }
  };
  conv("att_rgb.c1", att_rgb.c1);
  conv("att_rgb.c2", att_rgb.c2);
  conv("att_flow.c1", att_flow.c1);
  conv("att_flow.c2", att_flow.c2);
  conv("fusion", fusion);
  conv("classifier", classifier);
  gcn("gcn_rgb_action", gcn_rgb_action);
  gcn("gcn_rgb_background", gcn_rgb_background);
  gcn("gcn_flow_action", gcn_flow_action);
  gcn("gcn_flow_background", gcn_flow_background);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::named() const {
  auto mutable_named = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_named.size());
  for (auto& [name, m] : mutable_named) {
    out.emplace_back(name, m);
  }
  return out;
}

BoundModel bind_model(Tape& tape, const ModelParams& params) {
  BoundModel b;
  b.feature_dim = params.feature_dim;
  b.num_categories = params.num_categories;
  auto conv = [&tape](const std::string& prefix, const ConvParams& c) {
    return BoundConv{tape.param(prefix + ".w", c.w), tape.param(prefix + ".b", c.b), c.span};
  };
  auto gcn = [&tape](const std::string& prefix, const GcnStack& g) {
    BoundGcn bg;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      bg.weights.push_back(tape.param(prefix + ".w" + std::to_string(l + 1), g.weights[l]));
    }
    return bg;
  };
  b.att_rgb.c1 = conv("att_rgb.c1", params.att_rgb.c1);
  b.att_rgb.c2 = conv("att_rgb.c2", params.att_rgb.c2);
  b.att_flow.c1 = conv("att_flow.c1", params.att_flow.c1);
  b.att_flow.c2 = conv("att_flow.c2", params.att_flow.c2);
  b.fusion = conv("fusion", params.fusion);
  b.classifier = conv("classifier", params.classifier);
  b.gcn_rgb_action = gcn("gcn_rgb_action", params.gcn_rgb_action);
  b.gcn_rgb_background = gcn("gcn_rgb_background", params.gcn_rgb_background);
  b.gcn_flow_action = gcn("gcn_flow_action", params.gcn_flow_action);
  b.gcn_flow_background = gcn("gcn_flow_background", params.gcn_flow_background);
  return b;
}

Var attention_forward(Tape& tape, const BoundAttention& att, Var features) {
  Var h = tape.conv1d(features, att.c1.w, att.c1.b, att.c1.span);
  h = tape.leaky_relu(h, kLeakySlope);
  h = tape.conv1d(h, att.c2.w, att.c2.b, att.c2.span);
  return tape.sigmoid(h);
}

Var fuse_attention(Tape& tape, Var att_rgb, Var att_flow) {
  return tape.scale(tape.add(att_rgb, att_flow), 0.5);
}

Var cas_forward(Tape& tape, const BoundModel& model, Var feat_rgb, Var feat_flow) {
  Var stacked = tape.vconcat(feat_rgb, feat_flow);
  Var fused = tape.conv1d(stacked, model.fusion.w, model.fusion.b, model.fusion.span);
  fused = tape.leaky_relu(fused, kLeakySlope);
  return tape.conv1d(fused, model.classifier.w, model.classifier.b, model.classifier.span);
}

Var suppress_cas(Tape& tape, Var cas, Var attention) { return tape.mul_rowvec(cas, attention); }

int top_k_count(double k_ratio, int total) {
  if (k_ratio <= 0.0 || k_ratio > 1.0) {
    throw ContractError("top_k_count: k_ratio must be in (0, 1]");
  }
  const int k = static_cast<int>(std::ceil(k_ratio * total));
  return std::min(std::max(k, 1), total);
}

Var video_score_logits(Tape& tape, Var cas, double k_ratio) {
  const int t = tape.value(cas).cols;
  return tape.topk_mean_rows(cas, top_k_count(k_ratio, t));
}

Var video_scores(Tape& tape, Var cas, double k_ratio) {
  return tape.exp(tape.log_softmax_vec(video_score_logits(tape, cas, k_ratio)));
}

namespace {

// Softmax cross-entropy against a normalized multi-hot target, shifted by the
// target entropy so the minimum is exactly 0 (the shift is constant in the
// parameters, gradients are unchanged).
Var target_cross_entropy(Tape& tape, Var log_scores, const std::vector<double>& target) {
  Matrix t(static_cast<int>(target.size()), 1);
  double shift = 0.0;  // sum t log t = -H(target)
  for (std::size_t i = 0; i < target.size(); ++i) {
    t.data[i] = target[i];
    if (target[i] > 0.0) {
      shift += target[i] * std::log(target[i]);
    }
  }
  Var ce = tape.scale(tape.sum(tape.hadamard(tape.constant(std::move(t)), log_scores)), -1.0);
  return tape.add_const(ce, shift);
}

std::vector<double> normalized_target(const std::vector<int>& label, bool background_positive) {
  std::vector<double> t(label.size() + 1, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] != 0) {
      t[i] = 1.0;
      total += 1.0;
    }
  }
  if (background_positive) {
    t.back() = 1.0;
    total += 1.0;
  }
  for (double& v : t) {
    v /= total;
  }
  return t;
}

}  // namespace

Var base_loss(Tape& tape, Var cas, Var suppressed, const std::vector<int>& label,
              double k_ratio) {
  bool any = false;
  for (int v : label) {
    any = any || (v != 0);
  }
  if (!any) {
    throw ContractError("base_loss: label has no positive category");
  }
  const int c_plus_1 = tape.value(cas).rows;
  if (static_cast<int>(label.size()) + 1 != c_plus_1) {
    throw ShapeError("base_loss: label length " + std::to_string(label.size()) +
                     " vs CAS rows " + std::to_string(c_plus_1));
  }
  Var fg_log = tape.log_softmax_vec(video_score_logits(tape, cas, k_ratio));
  Var sup_log = tape.log_softmax_vec(video_score_logits(tape, suppressed, k_ratio));
  Var l_fg = target_cross_entropy(tape, fg_log, normalized_target(label, true));
  Var l_sup = target_cross_entropy(tape, sup_log, normalized_target(label, false));
  return tape.add(l_fg, l_sup);
}

}  // namespace ddg
