#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ddg/corpus.hpp"

using ddg::Corpus;
using ddg::CorpusSpec;
using ddg::Matrix;

namespace fs = std::filesystem;

namespace {

CorpusSpec small_spec() {
  CorpusSpec spec;
  spec.categories = 3;
  spec.feature_dim = 8;
  spec.train_videos = 4;
  spec.test_videos = 2;
  spec.snippets = 40;
  spec.min_segments = 1;
  spec.max_segments = 2;
  spec.boundary_width = 2;
  spec.noise_scale = 0.2;
  spec.disagreement_prob = 0.1;
  spec.seed = 123;
  return spec;
}

double cosine(const Matrix& f, int col, const std::vector<double>& v) {
  double dot = 0.0;
  double n1 = 0.0;
  double n2 = 0.0;
  for (int d = 0; d < f.rows; ++d) {
    dot += f.at(d, col) * v[static_cast<std::size_t>(d)];
    n1 += f.at(d, col) * f.at(d, col);
    n2 += v[static_cast<std::size_t>(d)] * v[static_cast<std::size_t>(d)];
  }
  return dot / std::sqrt(n1 * n2);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("requesting zero segments is a spec error") {
  CorpusSpec spec = small_spec();
  spec.min_segments = 0;
  spec.max_segments = 0;
  CHECK_THROWS_AS(ddg::generate_corpus(spec), ddg::ConfigError);
}

TEST_CASE("segments that cannot fit raise a spec error") {
  CorpusSpec spec = small_spec();
  spec.snippets = 16;
  spec.min_segments = 4;
  spec.max_segments = 4;
  spec.boundary_width = 3;
  CHECK_THROWS_AS(ddg::generate_corpus(spec), ddg::ConfigError);
}

TEST_CASE("same seed gives a bitwise-identical corpus") {
  Corpus a = ddg::generate_corpus(small_spec());
  Corpus b = ddg::generate_corpus(small_spec());
  REQUIRE(a.videos.size() == b.videos.size());
  for (std::size_t i = 0; i < a.videos.size(); ++i) {
    CHECK(a.videos[i].id == b.videos[i].id);
    CHECK(a.videos[i].rgb == b.videos[i].rgb);
    CHECK(a.videos[i].flow == b.videos[i].flow);
    CHECK(a.videos[i].label == b.videos[i].label);
  }
}

TEST_CASE("zero noise and zero boundary width put action snippets on their centroid") {
  CorpusSpec spec = small_spec();
  spec.noise_scale = 0.0;
  spec.boundary_width = 0;
  spec.disagreement_prob = 0.0;
  Corpus corpus = ddg::generate_corpus(spec);

  for (const auto& video : corpus.videos) {
    for (const auto& seg : video.segments) {
      // every snippet of one segment should be the same unit vector
      std::vector<double> centroid(static_cast<std::size_t>(spec.feature_dim));
      for (int d = 0; d < spec.feature_dim; ++d) {
        centroid[static_cast<std::size_t>(d)] = video.rgb.at(d, seg.start - 1);
      }
      for (int t = seg.start - 1; t <= seg.end - 1; ++t) {
        CHECK(cosine(video.rgb, t, centroid) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("segments never overlap and every labeled category has a segment") {
  Corpus corpus = ddg::generate_corpus(small_spec());
  for (const auto& video : corpus.videos) {
    for (std::size_t i = 0; i < video.segments.size(); ++i) {
      const auto& a = video.segments[i];
      CHECK(a.start >= 1);
      CHECK(a.end >= a.start);
      CHECK(a.end <= corpus.spec.snippets);
      for (std::size_t j = i + 1; j < video.segments.size(); ++j) {
        const auto& b = video.segments[j];
        CHECK((a.end < b.start || b.end < a.start));
      }
    }
    std::vector<int> seen(static_cast<std::size_t>(corpus.spec.categories), 0);
    for (const auto& seg : video.segments) {
      seen[static_cast<std::size_t>(seg.category)] = 1;
    }
    CHECK(seen == video.label);
  }
}

TEST_CASE("boundary snippets sit strictly between action and background similarity") {
  CorpusSpec spec = small_spec();
  spec.noise_scale = 0.0;
  spec.disagreement_prob = 0.0;
  spec.boundary_width = 3;
  Corpus corpus = ddg::generate_corpus(spec);

  const auto& video = corpus.videos.front();
  REQUIRE(!video.segments.empty());
  const auto& seg = video.segments.front();
  const int inside = spec.boundary_width / 2;  // majority-action mixtures, annotated
  const int outside = spec.boundary_width - inside;

  // pure action column (center of the annotation) and a deep background
  // column as references
  std::vector<double> action_ref(static_cast<std::size_t>(spec.feature_dim));
  const int mid = (seg.start + seg.end) / 2 - 1;
  for (int d = 0; d < spec.feature_dim; ++d) {
    action_ref[static_cast<std::size_t>(d)] = video.rgb.at(d, mid);
  }
  const int bg_col = 0;
  REQUIRE(seg.start - 1 - outside > 0);
  const double bg_sim = cosine(video.rgb, bg_col, action_ref);

  // every mixture column of the ramp, annotated or not, sits strictly
  // between pure background and pure action similarity
  for (int d = 1; d <= outside; ++d) {
    const double sim = cosine(video.rgb, seg.start - 1 - d, action_ref);
    CHECK(sim > bg_sim + 1e-9);
    CHECK(sim < 1.0 - 1e-9);
  }
  for (int d = 0; d < inside; ++d) {
    const double sim = cosine(video.rgb, seg.start - 1 + d, action_ref);
    CHECK(sim > bg_sim + 1e-9);
    CHECK(sim < 1.0 - 1e-9);
  }
}

TEST_CASE("feature file round trip is bitwise exact") {
  TempDir dir("ddg_corpus_rt");
  fs::create_directories(dir.path);
  std::mt19937_64 rng(5);
  Matrix rgb(6, 9);
  Matrix flow(6, 9);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (double& v : rgb.data) {
    v = unif(rng);
  }
  for (double& v : flow.data) {
    v = unif(rng);
  }
  const std::string path = (dir.path / "x.ddgf").string();
  ddg::write_features(path, rgb, flow);
  auto [r2, f2] = ddg::read_features(path);
  CHECK(r2 == rgb);
  CHECK(f2 == flow);
}

TEST_CASE("truncated feature file reports a format error with no partial value") {
  TempDir dir("ddg_corpus_trunc");
  fs::create_directories(dir.path);
  const std::string path = (dir.path / "x.ddgf").string();
  ddg::write_features(path, Matrix(4, 4, 1.0), Matrix(4, 4, 2.0));
  const auto size = fs::file_size(path);
  fs::resize_file(path, size / 2);
  CHECK_THROWS_AS(ddg::read_features(path), ddg::FormatError);
  try {
    ddg::read_features(path);
  } catch (const ddg::FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
}

TEST_CASE("bad magic and bad version are format errors") {
  TempDir dir("ddg_corpus_magic");
  fs::create_directories(dir.path);
  const std::string path = (dir.path / "x.ddgf").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(ddg::read_features(path), ddg::FormatError);
}

TEST_CASE("corpus directory round trip preserves everything") {
  TempDir dir("ddg_corpus_dir");
  Corpus corpus = ddg::generate_corpus(small_spec());
  ddg::write_corpus(corpus, dir.path.string());
  Corpus loaded = ddg::read_corpus(dir.path.string(), corpus.spec.categories);
  REQUIRE(loaded.videos.size() == corpus.videos.size());
  for (std::size_t i = 0; i < corpus.videos.size(); ++i) {
    CHECK(loaded.videos[i].id == corpus.videos[i].id);
    CHECK(loaded.videos[i].is_train == corpus.videos[i].is_train);
    CHECK(loaded.videos[i].rgb == corpus.videos[i].rgb);
    CHECK(loaded.videos[i].flow == corpus.videos[i].flow);
    CHECK(loaded.videos[i].label == corpus.videos[i].label);
    REQUIRE(loaded.videos[i].segments.size() == corpus.videos[i].segments.size());
    for (std::size_t s = 0; s < corpus.videos[i].segments.size(); ++s) {
      CHECK(loaded.videos[i].segments[s].start == corpus.videos[i].segments[s].start);
      CHECK(loaded.videos[i].segments[s].end == corpus.videos[i].segments[s].end);
      CHECK(loaded.videos[i].segments[s].category == corpus.videos[i].segments[s].category);
    }
  }
  CHECK(loaded.spec.train_videos == 4);
  CHECK(loaded.spec.test_videos == 2);
}

TEST_CASE("modality disagreement manufactures cross-stream conflicts") {
  CorpusSpec spec = small_spec();
  spec.train_videos = 10;
  spec.noise_scale = 0.0;
  spec.disagreement_prob = 0.25;
  Corpus corpus = ddg::generate_corpus(spec);

  // With zero noise, undrifted action snippets of one segment are bitwise
  // identical columns; a drifted snippet differs in exactly one modality.
  auto column = [](const Matrix& m, int t) {
    std::vector<double> v(static_cast<std::size_t>(m.rows));
    for (int d = 0; d < m.rows; ++d) {
      v[static_cast<std::size_t>(d)] = m.at(d, t);
    }
    return v;
  };
  int conflicts = 0;
  for (const auto& video : corpus.videos) {
    for (const auto& seg : video.segments) {
      for (int t = seg.start - 1; t <= seg.end - 1; ++t) {
        int rgb_matches = 0;
        int flow_matches = 0;
        for (int ref = seg.start - 1; ref <= seg.end - 1; ++ref) {
          if (ref == t) {
            continue;
          }
          rgb_matches += column(video.rgb, t) == column(video.rgb, ref) ? 1 : 0;
          flow_matches += column(video.flow, t) == column(video.flow, ref) ? 1 : 0;
        }
        if ((rgb_matches == 0) != (flow_matches == 0)) {
          ++conflicts;
        }
      }
    }
  }
  CHECK(conflicts > 0);
}
