#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ddg/matrix.hpp"

namespace ddg {

struct CorpusSpec {
  int categories = 4;  // C
  int feature_dim = 32;
  int train_videos = 60;
  int test_videos = 30;
  int snippets = 80;  // T
  int min_segments = 2;
  int max_segments = 4;
  int boundary_width = 3;       // ambiguous context snippets on each side
  double noise_scale = 0.25;    // expected noise norm relative to unit centroids
  double disagreement_prob = 0.1;  // chance an action snippet drifts to
                                   // background in one modality
  std::uint64_t seed = 7;

  void validate() const;
};

// 1-based inclusive snippet range.
struct GtSegment {
  int start = 1;
  int end = 1;
  int category = 0;
};

struct VideoRecord {
  std::string id;
  bool is_train = true;
  Matrix rgb;   // D x T
  Matrix flow;  // D x T
  std::vector<int> label;  // multi-hot, length C
  std::vector<GtSegment> segments;
};

struct Corpus {
  CorpusSpec spec;
  std::vector<VideoRecord> videos;

  std::vector<const VideoRecord*> split(bool train) const;
};

// Deterministic two-stream corpus: per-category unit centroids (pairwise
// |cosine| < 0.3), noisy action/background snippets, convex action-background
// mixtures around every segment boundary, and occasional single-modality
// drifts toward background inside segments.
Corpus generate_corpus(const CorpusSpec& spec);

// Binary feature file: "DDGF" | version u32 | T u32 | D u32 | rgb f64 LE
// row-major | flow f64 LE row-major.
void write_features(const std::string& path, const Matrix& rgb, const Matrix& flow);
std::pair<Matrix, Matrix> read_features(const std::string& path);

// Dataset directory: manifest.txt, labels.txt, annotations.txt,
// features/<id>.ddgf.
void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus read_corpus(const std::string& dir, int categories);

}  // namespace ddg
