#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ddg/corpus.hpp"
#include "ddg/evaluator.hpp"
#include "ddg/gradcheck.hpp"
#include "ddg/pipeline.hpp"

namespace ddg {

struct TrainConfig {
  double lambda1 = 1.0;
  double lambda2 = 3.2;  // weight of the complementary-learning hook (zero by default)
  double learning_rate = 0.02;
  int epochs = 100;
  std::uint64_t seed = 7;
  double k_ratio = 0.125;
  DdgHyper hyper;
  GraphFlags flags;
  bool eval_during_train = false;
  int eval_every = 10;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double base_loss = 0.0;
  double lfc = 0.0;
  double total = 0.0;
  double map_avg = -1.0;  // negative when evaluation was skipped
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> history;

  std::string metrics_csv() const;
};

// Adam with bias correction; state matrices follow ModelParams::named() order.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;

  static AdamState init(ModelParams& params);
};

void adam_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
               double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
               double epsilon = 1e-8);

// One optimizer step on one video; returns the loss pieces. Exposed for
// step-level tests.
struct StepResult {
  double base = 0.0;
  double lfc = 0.0;
  double total = 0.0;
};

StepResult train_step(ModelParams& params, AdamState& state, const VideoRecord& video,
                      const TrainConfig& cfg);

// Deterministic given cfg.seed: identical parameter trajectories and logs.
// Throws NumericError naming the offending video when the loss goes
// non-finite.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const EvalSettings* eval_settings = nullptr);

// Central-difference validation of the full composite objective on a small
// random instance. Pure: nothing is trained or mutated. `inject_bug` corrupts
// one analytic gradient entry (negative-control hook).
struct GradCheckReport {
  FiniteDiffReport fd;
  int parameter_count = 0;
  bool pass(double tolerance = 1e-4) const { return fd.max_rel_err <= tolerance; }
};

GradCheckReport grad_check(const TrainConfig& cfg, int snippets, int feature_dim, int categories,
                           std::uint64_t seed, bool inject_bug = false);

}  // namespace ddg
