#include "ddg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

namespace ddg {

void DdgHyper::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) {
    throw ConfigError("DdgHyper: eta must be in (0, 1)");
  }
  if (!(tau > 0.0)) {
    throw ConfigError("DdgHyper: tau must be positive");
  }
  if (layers < 1) {
    throw ConfigError("DdgHyper: layers must be >= 1");
  }
  if (top_k < 1) {
    throw ConfigError("DdgHyper: top_k must be >= 1");
  }
}

SnippetPartition preclassify(const Matrix& att_rgb, const Matrix& att_flow, double eta) {
  if (att_rgb.rows != 1 || att_flow.rows != 1 || att_rgb.cols != att_flow.cols) {
    throw ShapeError("preclassify: attention shapes " + shape_str(att_rgb) + " vs " +
                     shape_str(att_flow));
  }
  SnippetPartition part;
  for (int t = 0; t < att_rgb.cols; ++t) {
    const double ar = att_rgb.at(0, t);
    const double af = att_flow.at(0, t);
    if (ar > eta && af > eta) {
      part.action.push_back(t);
    } else if (ar < 1.0 - eta && af < 1.0 - eta) {
      part.background.push_back(t);
    } else {
      part.ambiguous.push_back(t);
    }
  }
  return part;
}

Matrix modal_adjacency(const Matrix& features) {
  const int T = features.cols;
  const int D = features.rows;
  std::vector<double> norms(static_cast<std::size_t>(T), 0.0);
  bool warned = false;
  for (int j = 0; j < T; ++j) {
    double s = 0.0;
    for (int i = 0; i < D; ++i) {
      s += features.at(i, j) * features.at(i, j);
    }
    norms[static_cast<std::size_t>(j)] = std::sqrt(s);
    if (s == 0.0 && !warned) {
      std::fprintf(stderr, "modal_adjacency: zero-norm snippet %d, similarities set to 0\n", j);
      warned = true;
    }
  }
  Matrix adj(T, T);
  for (int i = 0; i < T; ++i) {
    adj.at(i, i) = 1.0;
    for (int j = i + 1; j < T; ++j) {
      const double denom = norms[static_cast<std::size_t>(i)] * norms[static_cast<std::size_t>(j)];
      double s = 0.0;
      if (denom > 0.0) {
        for (int d = 0; d < D; ++d) {
          s += features.at(d, i) * features.at(d, j);
        }
        s = std::clamp(s / denom, -1.0, 1.0);
      }
      adj.at(i, j) = s;
      adj.at(j, i) = s;
    }
  }
  return adj;
}

Matrix fuse_adjacency(const Matrix& adj_rgb, const Matrix& adj_flow) {
  if (!adj_rgb.same_shape(adj_flow)) {
    throw ShapeError("fuse_adjacency: " + shape_str(adj_rgb) + " vs " + shape_str(adj_flow));
  }
  Matrix out = adj_rgb;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = (out.data[i] + adj_flow.data[i]) / 2.0;
  }
  return out;
}

namespace {

// One adjacency column: off-diagonal candidates below theta are dropped, only
// the top_k largest of the rest stay, the self entry always survives, and the
// softmax runs over survivors only (dropped entries remain exactly 0).
void fill_column(Matrix& out, int col, int self_row, double self_sim,
                 std::vector<std::pair<int, double>> candidates, double theta, int top_k) {
  std::vector<std::pair<int, double>> kept;
  kept.reserve(candidates.size() + 1);
  for (const auto& [row, sim] : candidates) {
    if (sim >= theta) {
      kept.emplace_back(row, sim);
    }
  }
  if (static_cast<int>(kept.size()) > top_k) {
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    kept.resize(static_cast<std::size_t>(top_k));
  }
  kept.emplace_back(self_row, self_sim);

  double mx = kept.front().second;
  for (const auto& [row, sim] : kept) {
    mx = std::max(mx, sim);
  }
  double z = 0.0;
  for (const auto& [row, sim] : kept) {
    z += std::exp(sim - mx);
  }
  for (const auto& [row, sim] : kept) {
    out.at(row, col) = std::exp(sim - mx) / z;
  }
}

Matrix discriminative_adjacency(const Matrix& fused, const std::vector<int>& idx,
                                const DdgHyper& hyper) {
  const int n = static_cast<int>(idx.size());
  Matrix adj(n, n);
  std::vector<std::pair<int, double>> candidates;
  for (int jj = 0; jj < n; ++jj) {
    candidates.clear();
    for (int ii = 0; ii < n; ++ii) {
      if (ii != jj) {
        candidates.emplace_back(ii, fused.at(idx[static_cast<std::size_t>(ii)],
                                             idx[static_cast<std::size_t>(jj)]));
      }
    }
    fill_column(adj, jj, jj, 1.0, candidates, hyper.theta, hyper.top_k);
  }
  return adj;
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& rows) {
  Matrix out(static_cast<int>(rows.size()), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < m.cols; ++j) {
      out.at(static_cast<int>(i), j) = m.at(rows[i], j);
    }
  }
  return out;
}

}  // namespace

Subgraphs build_subgraphs(const Matrix& fused_adj, const SnippetPartition& partition,
                          const DdgHyper& hyper) {
  hyper.validate();
  const int T = partition.total();
  if (fused_adj.rows != T || fused_adj.cols != T) {
    throw ShapeError("build_subgraphs: adjacency " + shape_str(fused_adj) + " for T=" +
                     std::to_string(T));
  }
  Subgraphs sub;
  sub.partition = partition;
  sub.action_adj = discriminative_adjacency(fused_adj, partition.action, hyper);
  sub.background_adj = discriminative_adjacency(fused_adj, partition.background, hyper);

  const int nm = static_cast<int>(partition.ambiguous.size());
  sub.ambiguous_adj = Matrix(T, nm);
  std::vector<std::pair<int, double>> candidates;
  for (int jj = 0; jj < nm; ++jj) {
    const int j = partition.ambiguous[static_cast<std::size_t>(jj)];
    candidates.clear();
    for (int i : partition.action) {
      candidates.emplace_back(i, fused_adj.at(i, j));
    }
    for (int i : partition.background) {
      candidates.emplace_back(i, fused_adj.at(i, j));
    }
    fill_column(sub.ambiguous_adj, jj, j, 1.0, candidates, hyper.theta, hyper.top_k);
  }
  return sub;
}

Matrix full_graph_adjacency(const Matrix& fused_adj, const DdgHyper& hyper) {
  hyper.validate();
  const int T = fused_adj.rows;
  Matrix adj(T, T);
  std::vector<std::pair<int, double>> candidates;
  for (int j = 0; j < T; ++j) {
    candidates.clear();
    for (int i = 0; i < T; ++i) {
      if (i != j) {
        candidates.emplace_back(i, fused_adj.at(i, j));
      }
    }
    fill_column(adj, j, j, 1.0, candidates, hyper.theta, hyper.top_k);
  }
  return adj;
}

Var graph_average(Tape& tape, Var features, Var adjacency) {
  return tape.matmul(features, adjacency);
}

Var gcn_forward(Tape& tape, Var features, Var adjacency, const BoundGcn& branch) {
  Var h = features;
  for (Var w : branch.weights) {
    h = tape.leaky_relu(tape.matmul(tape.matmul(w, h), adjacency), kLeakySlope);
  }
  return h;
}

Var ambiguous_aggregate(Tape& tape, std::optional<Var> action_gcn, std::optional<Var> background_gcn,
                        Var ambiguous_feats, const Matrix& action_rows, const Matrix& background_rows,
                        const Matrix& self_weights) {
  Var acc = tape.mul_rowvec(ambiguous_feats, tape.constant(self_weights));
  if (action_gcn && action_rows.rows > 0) {
    acc = tape.add(acc, tape.matmul(*action_gcn, tape.constant(action_rows)));
  }
  if (background_gcn && background_rows.rows > 0) {
    acc = tape.add(acc, tape.matmul(*background_gcn, tape.constant(background_rows)));
  }
  return acc;
}

Var enhance(Tape& tape, Var features, std::optional<Var> avg, std::optional<Var> gcn) {
  std::optional<Var> aggregated;
  if (avg && gcn) {
    aggregated = tape.scale(tape.add(*avg, *gcn), 0.5);
  } else if (avg) {
    aggregated = avg;
  } else if (gcn) {
    aggregated = gcn;
  }
  if (!aggregated) {
    return features;
  }
  return tape.scale(tape.add(*aggregated, features), 0.5);
}

double consistency_weight(double x, double tau) {
  if (tau <= 0.0) {
    throw DomainError("consistency_weight: tau must be positive");
  }
  if (x <= 0.0) {
    throw DomainError("consistency_weight: argument " + std::to_string(x) + " outside (0, 1]");
  }
  return std::exp(-(1.0 / x - 1.0) / tau);
}

Var feature_consistency_loss(Tape& tape, const SnippetPartition& partition, Var fused_att,
                             const std::optional<BranchFeatures>& action,
                             const std::optional<BranchFeatures>& background, double tau) {
  std::optional<Var> total;
  auto accumulate = [&](const BranchFeatures& bf, const std::vector<int>& idx, bool invert) {
    if (idx.empty()) {
      return;
    }
    Var att = tape.gather_cols(fused_att, idx);
    if (invert) {
      att = tape.sub(tape.constant(Matrix(1, static_cast<int>(idx.size()), 1.0)), att);
    }
    Var weights = tape.fc_weight(att, tau);
    Var norms = tape.col_norms(tape.sub(bf.gcn, bf.avg));
    Var term = tape.scale(tape.sum(tape.hadamard(weights, norms)),
                          1.0 / static_cast<double>(idx.size()));
    total = total ? tape.add(*total, term) : term;
  };
  if (action) {
    accumulate(*action, partition.action, false);
  }
  if (background) {
    accumulate(*background, partition.background, true);
  }
  return total ? *total : tape.scalar(0.0);
}

namespace {

struct ModalityOut {
  Var enhanced;
  std::optional<BranchFeatures> action;
  std::optional<BranchFeatures> background;
};

// Inference over the three masked subgraphs; enhanced columns are reassembled
// in the original temporal order.
ModalityOut run_masked(Tape& tape, Var features, const Subgraphs& sub, const BoundGcn& action_w,
                       const BoundGcn& background_w, const GraphFlags& flags) {
  const SnippetPartition& part = sub.partition;
  const int T = part.total();
  const bool want_avg = flags.graph_avg || (flags.lfc && flags.gcn);

  ModalityOut out;
  std::vector<Var> pieces;
  std::vector<int> concat_order;
  std::optional<Var> action_gcn;
  std::optional<Var> background_gcn;

  auto run_branch = [&](const std::vector<int>& idx, const Matrix& adj, const BoundGcn& w,
                        std::optional<BranchFeatures>& bf, std::optional<Var>& gcn_out) {
    if (idx.empty()) {
      return;
    }
    Var fx = tape.gather_cols(features, idx);
    Var a = tape.constant(adj);
    std::optional<Var> avg;
    std::optional<Var> gcn;
    if (want_avg) {
      avg = graph_average(tape, fx, a);
    }
    if (flags.gcn) {
      gcn = gcn_forward(tape, fx, a, w);
      gcn_out = gcn;
    }
    if (flags.lfc && gcn && avg) {
      bf = BranchFeatures{*gcn, *avg};
    }
    pieces.push_back(enhance(tape, fx, flags.graph_avg ? avg : std::nullopt, gcn));
    concat_order.insert(concat_order.end(), idx.begin(), idx.end());
  };

  run_branch(part.action, sub.action_adj, action_w, out.action, action_gcn);
  run_branch(part.background, sub.background_adj, background_w, out.background, background_gcn);

  if (!part.ambiguous.empty()) {
    Var fm = tape.gather_cols(features, part.ambiguous);
    std::optional<Var> avg_m;
    std::optional<Var> gcn_m;
    if (flags.graph_avg) {
      avg_m = tape.matmul(features, tape.constant(sub.ambiguous_adj));
    }
    if (flags.gcn) {
      Matrix self_weights(1, static_cast<int>(part.ambiguous.size()));
      for (std::size_t jj = 0; jj < part.ambiguous.size(); ++jj) {
        self_weights.at(0, static_cast<int>(jj)) =
            sub.ambiguous_adj.at(part.ambiguous[jj], static_cast<int>(jj));
      }
      gcn_m = ambiguous_aggregate(tape, action_gcn, background_gcn, fm,
                                  gather_rows(sub.ambiguous_adj, part.action),
                                  gather_rows(sub.ambiguous_adj, part.background), self_weights);
    }
    pieces.push_back(enhance(tape, fm, avg_m, gcn_m));
    concat_order.insert(concat_order.end(), part.ambiguous.begin(), part.ambiguous.end());
  }

  Var assembled = pieces.size() == 1 ? pieces.front() : tape.concat_cols(pieces);
  std::vector<int> perm(static_cast<std::size_t>(T));
  for (std::size_t pos = 0; pos < concat_order.size(); ++pos) {
    perm[static_cast<std::size_t>(concat_order[pos])] = static_cast<int>(pos);
  }
  out.enhanced = tape.gather_cols(assembled, perm);
  return out;
}

// Ablation of the ambiguity disconnection: one unmasked graph over all
// snippets, inferred with the action-branch weights.
ModalityOut run_unmasked(Tape& tape, Var features, const Matrix& adjacency,
                         const SnippetPartition& part, const BoundGcn& action_w,
                         const GraphFlags& flags) {
  const bool want_avg = flags.graph_avg || (flags.lfc && flags.gcn);
  Var a = tape.constant(adjacency);
  std::optional<Var> avg;
  std::optional<Var> gcn;
  if (want_avg) {
    avg = graph_average(tape, features, a);
  }
  if (flags.gcn) {
    gcn = gcn_forward(tape, features, a, action_w);
  }
  ModalityOut out;
  out.enhanced = enhance(tape, features, flags.graph_avg ? avg : std::nullopt, gcn);
  if (flags.lfc && gcn && avg) {
    if (!part.action.empty()) {
      out.action = BranchFeatures{tape.gather_cols(*gcn, part.action),
                                  tape.gather_cols(*avg, part.action)};
    }
    if (!part.background.empty()) {
      out.background = BranchFeatures{tape.gather_cols(*gcn, part.background),
                                      tape.gather_cols(*avg, part.background)};
    }
  }
  return out;
}

}  // namespace

DdgResult ddg_forward(Tape& tape, const BoundModel& model, Var feat_rgb, Var feat_flow,
                      Var att_rgb, Var att_flow, const DdgHyper& hyper, const GraphFlags& flags) {
  hyper.validate();
  const Matrix& fr = tape.value(feat_rgb);
  const Matrix& ff = tape.value(feat_flow);
  const Matrix& ar = tape.value(att_rgb);
  if (fr.cols != ff.cols || fr.cols != ar.cols) {
    throw ShapeError("ddg_forward: inconsistent snippet counts");
  }

  DdgResult result;
  result.partition = preclassify(ar, tape.value(att_flow), hyper.eta);

  Matrix adj_rgb;
  Matrix adj_flow;
  if (flags.fuse_adjacency) {
    adj_rgb = fuse_adjacency(modal_adjacency(fr), modal_adjacency(ff));
    adj_flow = adj_rgb;
  } else {
    adj_rgb = modal_adjacency(fr);
    adj_flow = modal_adjacency(ff);
  }

  ModalityOut rgb_out;
  ModalityOut flow_out;
  if (flags.disconnect) {
    Subgraphs sub_rgb = build_subgraphs(adj_rgb, result.partition, hyper);
    Subgraphs sub_flow =
        flags.fuse_adjacency ? sub_rgb : build_subgraphs(adj_flow, result.partition, hyper);
    rgb_out = run_masked(tape, feat_rgb, sub_rgb, model.gcn_rgb_action, model.gcn_rgb_background,
                         flags);
    flow_out = run_masked(tape, feat_flow, sub_flow, model.gcn_flow_action,
                          model.gcn_flow_background, flags);
    result.subgraphs = std::move(sub_rgb);
  } else {
    Matrix full_rgb = full_graph_adjacency(adj_rgb, hyper);
    Matrix full_flow = flags.fuse_adjacency ? full_rgb : full_graph_adjacency(adj_flow, hyper);
    rgb_out = run_unmasked(tape, feat_rgb, full_rgb, result.partition, model.gcn_rgb_action, flags);
    flow_out =
        run_unmasked(tape, feat_flow, full_flow, result.partition, model.gcn_flow_action, flags);
    result.subgraphs.partition = result.partition;
  }

  result.enhanced_rgb = rgb_out.enhanced;
  result.enhanced_flow = flow_out.enhanced;

  if (flags.lfc && flags.gcn) {
    Var fused_att = fuse_attention(tape, att_rgb, att_flow);
    Var l_rgb = feature_consistency_loss(tape, result.partition, fused_att, rgb_out.action,
                                         rgb_out.background, hyper.tau);
    Var l_flow = feature_consistency_loss(tape, result.partition, fused_att, flow_out.action,
                                          flow_out.background, hyper.tau);
    result.lfc = tape.add(l_rgb, l_flow);
  } else {
    result.lfc = tape.scalar(0.0);
  }
  return result;
}

}  // namespace ddg
