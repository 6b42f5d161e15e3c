#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ddg/corpus.hpp"
#include "ddg/evaluator.hpp"
#include "helpers/pr_oracle.hpp"
#include "helpers/test_util.hpp"

using ddg::ActionProposal;
using ddg::GtInstance;
using ddg::Matrix;
using ddgtest::random_matrix;

namespace {

ActionProposal prop(const std::string& video, int start, int end, int category,
                    double confidence) {
  ActionProposal p;
  p.video_id = video;
  p.start = start;
  p.end = end;
  p.category = category;
  p.confidence = confidence;
  return p;
}

GtInstance gt(const std::string& video, int start, int end, int category) {
  return GtInstance{video, start, end, category};
}

std::vector<GtInstance> random_gts(std::mt19937_64& rng, int max_count) {
  std::vector<GtInstance> out;
  const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_count));
  for (int i = 0; i < n; ++i) {
    const int start = 1 + static_cast<int>(rng() % 40);
    const int len = 1 + static_cast<int>(rng() % 10);
    out.push_back(gt(rng() % 2 == 0 ? "v0" : "v1", start, start + len, 0));
  }
  return out;
}

}  // namespace

TEST_CASE("temporal_iou basic identities") {
  CHECK(ddg::temporal_iou(3, 7, 3, 7) == 1.0);
  CHECK(ddg::temporal_iou(1, 2, 5, 9) == 0.0);
  CHECK(ddg::temporal_iou(2, 5, 4, 7) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // single-snippet segments still have unit length
  CHECK(ddg::temporal_iou(4, 4, 4, 4) == 1.0);
}

TEST_CASE("attention_threshold_list is ascending and strictly inside (0.1, 0.9)") {
  auto list = ddg::attention_threshold_list(10);
  REQUIRE(list.size() == 10);
  for (std::size_t i = 0; i < list.size(); ++i) {
    CHECK(list[i] > 0.1);
    CHECK(list[i] < 0.9);
    if (i > 0) {
      CHECK(list[i] > list[i - 1]);
    }
  }
}

TEST_CASE("generate_proposals finds the single plateau run") {
  const int T = 30;
  Matrix att(1, T, 0.0);
  for (int t = 9; t <= 19; ++t) {  // snippets 10..20, 1-based
    att.at(0, t) = 1.0;
  }
  Matrix cas(3, T, 0.0);  // 2 categories + background
  for (int t = 9; t <= 19; ++t) {
    cas.at(0, t) = 2.0;
  }
  std::vector<double> scores = {0.8, 0.05, 0.15};
  auto proposals = ddg::generate_proposals(att, cas, scores, {0.5}, 0.1, 0.25);
  REQUIRE(proposals.size() == 1);  // category 1 is below the score cut
  CHECK(proposals[0].category == 0);
  CHECK(proposals[0].start == 10);
  CHECK(proposals[0].end == 20);
  CHECK(proposals[0].confidence > 0.8);  // inner 2.0, outer 0, plus video score
}

TEST_CASE("all attention below every threshold gives an empty set") {
  Matrix att(1, 10, 0.05);
  Matrix cas(2, 10, 1.0);
  auto proposals =
      ddg::generate_proposals(att, cas, {0.9, 0.1}, ddg::attention_threshold_list(10), 0.1, 0.25);
  CHECK(proposals.empty());
}

TEST_CASE("two runs separated by one low snippet are never merged") {
  Matrix att(1, 9, 0.0);
  for (int t : {1, 2, 3, 5, 6, 7}) {
    att.at(0, t) = 0.9;
  }
  Matrix cas(2, 9, 1.0);
  auto proposals = ddg::generate_proposals(att, cas, {0.9, 0.1}, {0.5}, 0.1, 0.25);
  REQUIRE(proposals.size() == 2);
  CHECK(proposals[0].start == 2);
  CHECK(proposals[0].end == 4);
  CHECK(proposals[1].start == 6);
  CHECK(proposals[1].end == 8);
}

TEST_CASE("nms keeps singletons, drops duplicates, keeps disjoint") {
  auto single = ddg::nms({prop("v0", 1, 5, 0, 0.9)}, 0.5);
  CHECK(single.size() == 1);

  auto dup = ddg::nms({prop("v0", 1, 5, 0, 0.9), prop("v0", 1, 5, 0, 0.7)}, 0.5);
  REQUIRE(dup.size() == 1);
  CHECK(dup[0].confidence == 0.9);

  auto disjoint = ddg::nms({prop("v0", 1, 5, 0, 0.9), prop("v0", 10, 15, 0, 0.2)}, 0.5);
  CHECK(disjoint.size() == 2);
}

TEST_CASE("nms output is a subset containing the per-category maximum") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ActionProposal> proposals;
    const int n = 3 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      const int start = 1 + static_cast<int>(rng() % 30);
      proposals.push_back(prop("v0", start, start + 1 + static_cast<int>(rng() % 8),
                               static_cast<int>(rng() % 2),
                               static_cast<double>(rng() % 1000) / 1000.0));
    }
    auto kept = ddg::nms(proposals, 0.5);
    CHECK(kept.size() <= proposals.size());
    for (int c = 0; c < 2; ++c) {
      double best = -1.0;
      for (const auto& p : proposals) {
        if (p.category == c) {
          best = std::max(best, p.confidence);
        }
      }
      if (best < 0.0) {
        continue;
      }
      bool found = false;
      for (const auto& k : kept) {
        found = found || (k.category == c && k.confidence == best);
      }
      CHECK(found);
    }
  }
}

TEST_CASE("average_precision simple cases") {
  std::vector<GtInstance> gts = {gt("v0", 10, 20, 0)};
  CHECK(ddg::average_precision({prop("v0", 10, 20, 0, 0.9)}, gts, 0.5) == 1.0);
  CHECK(ddg::average_precision({prop("v0", 40, 50, 0, 0.9)}, gts, 0.5) == 0.0);
  CHECK(std::isnan(ddg::average_precision({prop("v0", 1, 5, 0, 0.9)}, {}, 0.5)));
}

TEST_CASE("average_precision equals the brute-force PR oracle") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    auto gts = random_gts(rng, 4);
    std::vector<ActionProposal> proposals;
    const int n = static_cast<int>(rng() % 7);
    for (int i = 0; i < n; ++i) {
      const int start = 1 + static_cast<int>(rng() % 45);
      proposals.push_back(prop(rng() % 2 == 0 ? "v0" : "v1", start,
                               start + static_cast<int>(rng() % 12), 0,
                               static_cast<double>(rng() % 1000) / 1000.0));
    }
    const double iou_thr = 0.1 + 0.2 * static_cast<double>(rng() % 4);
    const double got = ddg::average_precision(proposals, gts, iou_thr);
    const double want = ddgtest::oracle_average_precision(proposals, gts, iou_thr);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("AP is monotonically non-increasing in the IoU threshold") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    auto gts = random_gts(rng, 3);
    std::vector<ActionProposal> proposals;
    for (int i = 0; i < 5; ++i) {
      const int start = 1 + static_cast<int>(rng() % 45);
      proposals.push_back(prop(rng() % 2 == 0 ? "v0" : "v1", start,
                               start + static_cast<int>(rng() % 12), 0,
                               static_cast<double>(rng() % 1000) / 1000.0));
    }
    double prev = 2.0;
    for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double ap = ddg::average_precision(proposals, gts, thr);
      CHECK(ap <= prev + 1e-12);
      prev = ap;
    }
  }
}

TEST_CASE("ground truth fed back as proposals scores mAP 1 at every threshold") {
  std::mt19937_64 rng(43);
  std::vector<GtInstance> gts;
  std::vector<ActionProposal> proposals;
  for (int v = 0; v < 4; ++v) {
    const std::string id = "v" + std::to_string(v);
    int cursor = 1;
    for (int s = 0; s < 3; ++s) {
      const int len = 3 + static_cast<int>(rng() % 6);
      const int cat = static_cast<int>(rng() % 3);
      gts.push_back(gt(id, cursor, cursor + len, cat));
      proposals.push_back(prop(id, cursor, cursor + len, cat, 1.0));
      cursor += len + 5;
    }
  }
  ddg::EvalReport report =
      ddg::build_report(proposals, gts, 3, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
  for (double v : report.map_per_iou) {
    CHECK(v == 1.0);
  }
  CHECK(report.map_avg == 1.0);
}

TEST_CASE("empty proposal set gives mAP 0") {
  std::vector<GtInstance> gts = {gt("v0", 1, 5, 0), gt("v0", 10, 14, 1)};
  ddg::EvalReport report = ddg::build_report({}, gts, 2, {0.3, 0.5});
  CHECK(report.map_avg == 0.0);
}

TEST_CASE("categories without ground truth are excluded from the mean") {
  std::vector<GtInstance> gts = {gt("v0", 1, 5, 0)};
  std::vector<ActionProposal> proposals = {prop("v0", 1, 5, 0, 0.9),
                                           prop("v0", 8, 12, 1, 0.8)};
  ddg::EvalReport report = ddg::build_report(proposals, gts, 2, {0.5});
  CHECK(std::isnan(report.ap[1][0]));
  CHECK(report.map_per_iou[0] == 1.0);
}

TEST_CASE("report is invariant to proposal collection order") {
  std::mt19937_64 rng(44);
  std::vector<GtInstance> gts;
  std::vector<ActionProposal> proposals;
  for (int i = 0; i < 12; ++i) {
    const std::string id = "v" + std::to_string(i % 3);
    const int start = 1 + static_cast<int>(rng() % 40);
    gts.push_back(gt(id, start, start + 4, i % 2));
    proposals.push_back(prop(id, start + static_cast<int>(rng() % 3),
                             start + 4 + static_cast<int>(rng() % 3), i % 2,
                             static_cast<double>(rng() % 1000) / 1000.0));
  }
  ddg::EvalReport a = ddg::build_report(proposals, gts, 2, {0.3, 0.5, 0.7});
  std::reverse(proposals.begin(), proposals.end());
  std::reverse(gts.begin(), gts.end());
  ddg::EvalReport b = ddg::build_report(proposals, gts, 2, {0.3, 0.5, 0.7});
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("report csv layout has category rows and a mAP row") {
  std::vector<GtInstance> gts = {gt("v0", 1, 5, 0), gt("v0", 10, 14, 1)};
  std::vector<ActionProposal> proposals = {prop("v0", 1, 5, 0, 0.9)};
  ddg::EvalReport report = ddg::build_report(proposals, gts, 2, {0.3, 0.5});
  const std::string csv = report.to_csv();
  CHECK(csv.find("category,0.3") != std::string::npos);
  CHECK(csv.find("cat0,") != std::string::npos);
  CHECK(csv.find("cat1,") != std::string::npos);
  CHECK(csv.find("mAP,") != std::string::npos);
  CHECK(csv.find("Avg") != std::string::npos);
}

TEST_CASE("evaluate runs the full inference path deterministically") {
  ddg::CorpusSpec spec;
  spec.categories = 2;
  spec.feature_dim = 8;
  spec.train_videos = 2;
  spec.test_videos = 3;
  spec.snippets = 32;
  spec.min_segments = 1;
  spec.max_segments = 2;
  spec.boundary_width = 2;
  spec.seed = 9;
  ddg::Corpus corpus = ddg::generate_corpus(spec);
  ddg::ModelParams params = ddg::ModelParams::init(8, 2, 2, 77);
  ddg::DdgHyper hyper;
  ddg::GraphFlags flags;
  ddg::EvalSettings settings;
  settings.k_ratio = 0.25;

  ddg::EvalReport a = ddg::evaluate(corpus, false, params, hyper, flags, settings);
  ddg::EvalReport b = ddg::evaluate(corpus, false, params, hyper, flags, settings);
  CHECK(a.to_csv() == b.to_csv());

  // thread fan-out must not change the report
  settings.threads = 3;
  ddg::EvalReport c = ddg::evaluate(corpus, false, params, hyper, flags, settings);
  CHECK(a.to_csv() == c.to_csv());
}
