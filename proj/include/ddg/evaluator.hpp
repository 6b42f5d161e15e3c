#pragma once

#include <string>
#include <vector>

#include "ddg/corpus.hpp"
#include "ddg/graph.hpp"
#include "ddg/pipeline.hpp"

namespace ddg {

struct ActionProposal {
  int start = 1;  // 1-based inclusive snippet range
  int end = 1;
  int category = 0;
  double confidence = 0.0;
  std::string video_id;
};

struct GtInstance {
  std::string video_id;
  int start = 1;
  int end = 1;
  int category = 0;
};

struct EvalSettings {
  std::vector<double> iou_list = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  int attention_thresholds = 10;
  double nms_iou = 0.5;
  double score_cut = 0.1;    // video softmax score needed to emit a category
  double outer_ratio = 0.25;  // flank length as a fraction of proposal length
  double k_ratio = 0.125;
  int threads = 1;
};

// `count` thresholds evenly spaced strictly inside (0.1, 0.9).
std::vector<double> attention_threshold_list(int count);

// IoU of [a_start, a_end+1) and [b_start, b_end+1).
double temporal_iou(int a_start, int a_end, int b_start, int b_end);

// Threshold sweep over the attention curve; each maximal run of snippets with
// att >= v becomes a candidate scored by outer-inner contrast on the
// suppressed CAS plus the category video score. video_id is left empty.
std::vector<ActionProposal> generate_proposals(const Matrix& attention, const Matrix& suppressed,
                                               const std::vector<double>& video_scores,
                                               const std::vector<double>& thresholds,
                                               double score_cut, double outer_ratio);

// Greedy per-category (and per-video) suppression; keeps the confidence
// maximum, drops anything overlapping a kept proposal above iou_cut.
std::vector<ActionProposal> nms(std::vector<ActionProposal> proposals, double iou_cut);

// Standard detection AP with greedy one-to-one matching and all-points
// interpolation. Returns NaN when the category has no ground truth.
double average_precision(std::vector<ActionProposal> proposals, const std::vector<GtInstance>& gts,
                         double iou_thr);

struct EvalReport {
  std::vector<double> iou_list;
  int categories = 0;
  std::vector<std::vector<double>> ap;  // [category][iou], NaN when undefined
  std::vector<double> map_per_iou;
  double map_avg = 0.0;

  std::string to_csv() const;
  // Mean of map_per_iou restricted to the given thresholds (exact match).
  double map_over(const std::vector<double>& ious) const;
};

struct VideoInference {
  std::string video_id;
  Matrix att_rgb;
  Matrix att_flow;
  Matrix att_fused;
  Matrix suppressed;
  std::vector<double> video_scores;  // softmax over C+1
  SnippetPartition partition;
  Subgraphs subgraphs;
  std::vector<ActionProposal> proposals;  // post-NMS
};

VideoInference infer_video(const VideoRecord& video, const ModelParams& params,
                           const DdgHyper& hyper, const GraphFlags& flags,
                           const EvalSettings& settings);

// Full inference over a corpus split plus AP aggregation.
EvalReport evaluate(const Corpus& corpus, bool train_split, const ModelParams& params,
                    const DdgHyper& hyper, const GraphFlags& flags, const EvalSettings& settings);

// AP table from already-collected proposals and ground truth (used both by
// evaluate() and by oracle-style tests).
EvalReport build_report(const std::vector<ActionProposal>& proposals,
                        const std::vector<GtInstance>& gts, int categories,
                        const std::vector<double>& iou_list);

}  // namespace ddg
