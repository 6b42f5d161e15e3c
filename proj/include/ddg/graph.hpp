#pragma once

#include <optional>
#include <vector>

#include "ddg/base_model.hpp"
#include "ddg/matrix.hpp"
#include "ddg/tape.hpp"

namespace ddg {

struct DdgHyper {
  double eta = 0.5;    // action threshold
  double theta = 0.8;  // similarity threshold
  int top_k = 10;      // surviving off-diagonal entries per column
  double tau = 0.5;    // temperature of the consistency weight
  int layers = 2;      // GCN depth

  void validate() const;
};

// Disjoint cover of {0..T-1}: pseudo-action, pseudo-background, ambiguous.
// Index lists are kept sorted ascending.
struct SnippetPartition {
  std::vector<int> action;
  std::vector<int> background;
  std::vector<int> ambiguous;

  int total() const {
    return static_cast<int>(action.size() + background.size() + ambiguous.size());
  }
};

// t is pseudo-action iff both modality attentions exceed eta, pseudo-background
// iff both fall below 1-eta, ambiguous otherwise.
SnippetPartition preclassify(const Matrix& att_rgb, const Matrix& att_flow, double eta);

// T x T cosine similarities between snippet feature columns; diagonal exactly 1.
// A zero-norm snippet gets 0 off-diagonal (with a warning on stderr).
Matrix modal_adjacency(const Matrix& features);

// Elementwise mean of the two modality adjacency matrices.
Matrix fuse_adjacency(const Matrix& adj_rgb, const Matrix& adj_flow);

// Masked, filtered, column-softmaxed subgraph adjacencies.
//   action_adj     |Va| x |Va|   (rows/cols in partition.action order)
//   background_adj |Vb| x |Vb|
//   ambiguous_adj  T x |Vm|      (global rows; nonzero only at discriminative
//                                 rows and the self position)
// Every nonempty column sums to 1.
struct Subgraphs {
  SnippetPartition partition;
  Matrix action_adj;
  Matrix background_adj;
  Matrix ambiguous_adj;
};

Subgraphs build_subgraphs(const Matrix& fused_adj, const SnippetPartition& partition,
                          const DdgHyper& hyper);

// Unpartitioned variant used when the disconnection of ambiguity is ablated:
// one T x T graph with the same theta/top-k filtering and column softmax.
Matrix full_graph_adjacency(const Matrix& fused_adj, const DdgHyper& hyper);

// F * A: column j becomes the adjacency-weighted mean of neighbor features.
Var graph_average(Tape& tape, Var features, Var adjacency);

// L layers of LeakyReLU(W_l * F_{l-1} * A).
Var gcn_forward(Tape& tape, Var features, Var adjacency, const BoundGcn& branch);

// Eq-style three-term aggregation for ambiguous columns; any term may be
// absent (empty set or GCN disabled).
Var ambiguous_aggregate(Tape& tape, std::optional<Var> action_gcn, std::optional<Var> background_gcn,
                        Var ambiguous_feats, const Matrix& action_rows, const Matrix& background_rows,
                        const Matrix& self_weights);

// F' = ((avg + gcn)/2 + F)/2, degrading gracefully when a path is disabled.
Var enhance(Tape& tape, Var features, std::optional<Var> avg, std::optional<Var> gcn);

// w(x) = exp(-(1/x - 1)/tau); strictly increasing on (0, 1], w(1) = 1.
double consistency_weight(double x, double tau);

struct BranchFeatures {
  Var gcn;
  Var avg;
};

// Attention-weighted euclidean distance between GCN and graph-average
// features, averaged per discriminative set; an empty set contributes 0.
Var feature_consistency_loss(Tape& tape, const SnippetPartition& partition, Var fused_att,
                             const std::optional<BranchFeatures>& action,
                             const std::optional<BranchFeatures>& background, double tau);

struct GraphFlags {
  bool graph_avg = true;
  bool gcn = true;
  bool lfc = true;
  bool disconnect = true;       // Eq-6 masking of ambiguous snippets
  bool fuse_adjacency = true;   // shared fused adjacency for both modalities
};

struct DdgResult {
  Var enhanced_rgb;
  Var enhanced_flow;
  Var lfc;  // 1x1; constant 0 when disabled or no discriminative set exists
  SnippetPartition partition;
  Subgraphs subgraphs;  // from the RGB-side adjacency when fusion is ablated
};

// Full graph stage: partition from the given attentions, adjacency from the
// feature values, masked subgraph inference per modality, enhanced features
// reassembled in temporal order, plus the summed per-modality consistency
// loss. Gradients flow through features and GCN weights; the partition and
// the filtered edge structure are fixed within the pass.
DdgResult ddg_forward(Tape& tape, const BoundModel& model, Var feat_rgb, Var feat_flow,
                      Var att_rgb, Var att_flow, const DdgHyper& hyper, const GraphFlags& flags);

}  // namespace ddg
