#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ddg/checkpoint.hpp"
#include "ddg/pipeline.hpp"
#include "ddg/trainer.hpp"
#include "helpers/test_util.hpp"

using ddg::Corpus;
using ddg::CorpusSpec;
using ddg::Matrix;
using ddg::TrainConfig;

namespace {

CorpusSpec tiny_spec(int train, int test) {
  CorpusSpec spec;
  spec.categories = 3;
  spec.feature_dim = 8;
  spec.train_videos = train;
  spec.test_videos = test;
  spec.snippets = 32;
  spec.min_segments = 1;
  spec.max_segments = 2;
  spec.boundary_width = 2;
  spec.noise_scale = 0.2;
  spec.seed = 31;
  return spec;
}

TrainConfig fast_config(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = 5;
  cfg.k_ratio = 0.25;
  return cfg;
}

}  // namespace

TEST_CASE("total_loss scalar composition") {
  CHECK(ddg::total_loss(2.0, 0.4, 7.0, 0.0, 0.0) == 2.0);
  CHECK(ddg::total_loss(2.0, 0.4, 0.0, 1.0, 3.2) == doctest::Approx(2.4).epsilon(1e-12));
  // linearity in the consistency term
  const double a = ddg::total_loss(1.0, 0.3, 0.0, 2.0, 0.0);
  const double b = ddg::total_loss(1.0, 0.6, 0.0, 2.0, 0.0);
  CHECK(b - a == doctest::Approx(2.0 * 0.3).epsilon(1e-12));
  CHECK_THROWS_AS(ddg::total_loss(std::numeric_limits<double>::infinity(), 0, 0, 1, 1),
                  ddg::NumericError);
}

TEST_CASE("same seed trains to a bitwise-identical checkpoint") {
  Corpus corpus = ddg::generate_corpus(tiny_spec(3, 1));
  TrainConfig cfg = fast_config(5);
  ddg::TrainResult a = ddg::train(corpus, cfg);
  ddg::TrainResult b = ddg::train(corpus, cfg);
  CHECK(ddg::checkpoint_bytes(a.params) == ddg::checkpoint_bytes(b.params));
  CHECK(a.metrics_csv() == b.metrics_csv());
}

TEST_CASE("overfitting a one-video corpus drives the base loss near zero") {
  CorpusSpec spec = tiny_spec(1, 0);
  Corpus corpus = ddg::generate_corpus(spec);
  TrainConfig cfg = fast_config(200);
  ddg::TrainResult result = ddg::train(corpus, cfg);
  CHECK(result.history.back().base_loss < 0.05);
}

TEST_CASE("a large consistency weight shrinks the consistency loss") {
  Corpus corpus = ddg::generate_corpus(tiny_spec(3, 0));
  TrainConfig off = fast_config(30);
  off.lambda1 = 0.0;
  TrainConfig strong = fast_config(30);
  strong.lambda1 = 100.0;
  ddg::TrainResult a = ddg::train(corpus, off);
  ddg::TrainResult b = ddg::train(corpus, strong);
  CHECK(b.history.back().lfc < a.history.back().lfc);
}

TEST_CASE("small steps on a fixed batch rarely increase the loss") {
  Corpus corpus = ddg::generate_corpus(tiny_spec(1, 0));
  const ddg::VideoRecord& video = corpus.videos.front();
  TrainConfig cfg = fast_config(1);
  cfg.learning_rate = 1e-4;

  ddg::ModelParams params =
      ddg::ModelParams::init(corpus.spec.feature_dim, corpus.spec.categories, cfg.hyper.layers,
                             cfg.seed);
  ddg::AdamState adam = ddg::AdamState::init(params);
  // settle into a smooth region first, then count
  for (int i = 0; i < 50; ++i) {
    ddg::train_step(params, adam, video, cfg);
  }
  const int steps = 100;
  int decreased = 0;
  double prev = ddg::train_step(params, adam, video, cfg).total;
  for (int i = 0; i < steps; ++i) {
    const double cur = ddg::train_step(params, adam, video, cfg).total;
    if (cur < prev) {
      ++decreased;
    }
    prev = cur;
  }
  CHECK(decreased >= 95);
}

TEST_CASE("disabling every graph flag reproduces the baseline exactly") {
  Corpus corpus = ddg::generate_corpus(tiny_spec(3, 0));
  TrainConfig baseline = fast_config(4);
  baseline.flags = ddg::GraphFlags{false, false, false, true, true};
  TrainConfig all_off = fast_config(4);
  all_off.flags = ddg::GraphFlags{false, false, false, false, false};
  ddg::TrainResult a = ddg::train(corpus, baseline);
  ddg::TrainResult b = ddg::train(corpus, all_off);
  CHECK(ddg::checkpoint_bytes(a.params) == ddg::checkpoint_bytes(b.params));
}

TEST_CASE("non-finite forward names the offending video") {
  Corpus corpus = ddg::generate_corpus(tiny_spec(1, 0));
  corpus.videos.front().rgb.at(0, 0) = 1e300;  // overflows the first convolution
  corpus.videos.front().rgb.at(1, 0) = 1e300;
  TrainConfig cfg = fast_config(1);
  try {
    ddg::train(corpus, cfg);
    FAIL("expected NumericError");
  } catch (const ddg::NumericError& e) {
    CHECK(std::string(e.what()).find(corpus.videos.front().id) != std::string::npos);
  }
}

TEST_CASE("grad_check passes for the full model and the baseline") {
  TrainConfig full = fast_config(1);
  ddg::GradCheckReport report = ddg::grad_check(full, 12, 8, 3, 17);
  CHECK(report.fd.max_rel_err <= 1e-4);

  TrainConfig baseline = fast_config(1);
  baseline.flags = ddg::GraphFlags{false, false, false, true, true};
  ddg::GradCheckReport base_report = ddg::grad_check(baseline, 12, 8, 3, 17);
  CHECK(base_report.fd.max_rel_err <= 1e-4);
}

TEST_CASE("grad_check is pure and deterministic") {
  TrainConfig cfg = fast_config(1);
  ddg::GradCheckReport a = ddg::grad_check(cfg, 8, 6, 2, 3);
  ddg::GradCheckReport b = ddg::grad_check(cfg, 8, 6, 2, 3);
  CHECK(a.fd.max_rel_err == b.fd.max_rel_err);
  CHECK(a.fd.worst_param == b.fd.worst_param);
}

TEST_CASE("the negative-control hook makes grad_check fail") {
  TrainConfig cfg = fast_config(1);
  ddg::GradCheckReport report = ddg::grad_check(cfg, 8, 6, 2, 3, /*inject_bug=*/true);
  CHECK(report.fd.max_rel_err > 1e-4);
}

TEST_CASE("per-modal and no-disconnect variants also differentiate cleanly") {
  TrainConfig per_modal = fast_config(1);
  per_modal.flags.fuse_adjacency = false;
  CHECK(ddg::grad_check(per_modal, 10, 6, 2, 19).fd.max_rel_err <= 1e-4);

  TrainConfig no_disconnect = fast_config(1);
  no_disconnect.flags.disconnect = false;
  CHECK(ddg::grad_check(no_disconnect, 10, 6, 2, 19).fd.max_rel_err <= 1e-4);
}

TEST_CASE("metrics csv has the documented header") {
  Corpus corpus = ddg::generate_corpus(tiny_spec(2, 0));
  ddg::TrainResult result = ddg::train(corpus, fast_config(2));
  CHECK(result.metrics_csv().rfind("epoch,base_loss,lfc,total,map_avg\n", 0) == 0);
}
