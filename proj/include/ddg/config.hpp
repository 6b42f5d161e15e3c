#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddg/corpus.hpp"
#include "ddg/evaluator.hpp"
#include "ddg/trainer.hpp"

namespace ddg {

// Merged view of every runtime knob. Parsed from a flat `key = value` file
// with `#` comments and dotted section prefixes; unknown keys are rejected,
// every key has a default.
struct RunConfig {
  std::uint64_t seed = 7;
  int threads = 1;
  std::string data_dir = "data";
  std::string out_dir = "out";

  CorpusSpec corpus;
  DdgHyper ddg;

  double lambda1 = 1.0;
  double lambda2 = 3.2;
  double learning_rate = 0.02;
  int epochs = 100;
  double k_ratio = 0.125;
  bool enable_graph_avg = true;
  bool enable_gcn = true;
  bool enable_lfc = true;
  bool disconnect_ambiguity = true;
  bool fuse_adjacency = true;
  bool eval_during_train = false;
  int eval_every = 10;

  std::vector<double> iou_list = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  int attention_thresholds = 10;
  double nms_iou = 0.5;
  double score_cut = 0.1;
  double outer_ratio = 0.25;

  static RunConfig load(const std::string& path);  // defaults + file overrides
  void set(const std::string& key, const std::string& value);
  void apply_env();  // DDG_SEED overrides seed
  std::string serialize() const;

  CorpusSpec corpus_spec() const;
  TrainConfig train_config() const;
  EvalSettings eval_settings() const;
};

// Named ablation presets mirroring the experiment grid.
//   none | no-graph | avg-only | no-lfc | per-modal | no-disconnect
void apply_ablation(RunConfig& cfg, const std::string& name);

std::vector<std::string> ablation_names();

}  // namespace ddg
