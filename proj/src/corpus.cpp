#include "ddg/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "ddg/serialize.hpp"

namespace fs = std::filesystem;

namespace ddg {

void CorpusSpec::validate() const {
  if (categories < 2) {
    throw ConfigError("CorpusSpec: categories must be >= 2");
  }
  if (feature_dim < 4) {
    throw ConfigError("CorpusSpec: feature_dim must be >= 4");
  }
  if (snippets < 16) {
    throw ConfigError("CorpusSpec: snippets must be >= 16");
  }
  if (train_videos < 1 || test_videos < 0) {
    throw ConfigError("CorpusSpec: invalid video counts");
  }
  if (min_segments < 1) {
    throw ConfigError("CorpusSpec: every video needs at least one segment");
  }
  if (max_segments < min_segments) {
    throw ConfigError("CorpusSpec: max_segments < min_segments");
  }
  if (boundary_width < 0) {
    throw ConfigError("CorpusSpec: boundary_width must be >= 0");
  }
  if (noise_scale < 0.0) {
    throw ConfigError("CorpusSpec: noise_scale must be >= 0");
  }
  if (disagreement_prob < 0.0 || disagreement_prob > 1.0) {
    throw ConfigError("CorpusSpec: disagreement_prob must be in [0, 1]");
  }
}

std::vector<const VideoRecord*> Corpus::split(bool train) const {
  std::vector<const VideoRecord*> out;
  for (const auto& v : videos) {
    if (v.is_train == train) {
      out.push_back(&v);
    }
  }
  return out;
}

namespace {

constexpr int kMinSegmentLen = 5;
constexpr int kMaxSegmentLen = 10;
// Drift targets for the disagreeing modality. Action snippets lose motion
// evidence (drift toward background) while staying reachable from
// discriminative snippets through the fused similarity; background snippets
// gain misleading appearance evidence for one labeled category.
constexpr double kActionDriftAlpha = 0.55;
constexpr double kBackgroundDriftAlpha = 0.45;

std::vector<double> unit_vector(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim));
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : v) {
      x = dist(rng);
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : v) {
    x /= norm;
  }
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

// categories + 1 unit centroids (background last) with pairwise |cos| < 0.3.
std::vector<std::vector<double>> draw_centroids(int count, int dim, std::mt19937_64& rng) {
  std::vector<std::vector<double>> centroids;
  int attempts = 0;
  while (static_cast<int>(centroids.size()) < count) {
    if (++attempts > 100000) {
      throw ConfigError("generate_corpus: cannot place separated centroids in dimension " +
                        std::to_string(dim));
    }
    auto v = unit_vector(dim, rng);
    bool ok = true;
    for (const auto& u : centroids) {
      if (std::abs(dot(u, v)) >= 0.3) {
        ok = false;
        break;
      }
    }
    if (ok) {
      centroids.push_back(std::move(v));
    }
  }
  return centroids;
}

struct SnippetPlan {
  double alpha = 0.0;  // action fraction of the base mixture
  int category = -1;   // -1 for pure background
};

struct VideoPlan {
  std::vector<GtSegment> segments;
  std::vector<SnippetPlan> snippets;
};

VideoPlan plan_video(const CorpusSpec& spec, std::mt19937_64& rng) {
  const int T = spec.snippets;
  const int w = spec.boundary_width;
  const int edge_gap = w;
  const int inner_gap = 2 * w + 2;

  std::uniform_int_distribution<int> seg_count_dist(spec.min_segments, spec.max_segments);
  int n = seg_count_dist(rng);
  auto feasible = [&](int count) {
    const int avail = T - 2 * edge_gap - (count - 1) * inner_gap;
    return avail >= count * kMinSegmentLen;
  };
  while (n > spec.min_segments && !feasible(n)) {
    --n;
  }
  if (!feasible(n)) {
    throw ConfigError("generate_corpus: segments do not fit in " + std::to_string(T) +
                      " snippets (min_segments=" + std::to_string(spec.min_segments) +
                      ", boundary_width=" + std::to_string(w) + ")");
  }

  const int avail = T - 2 * edge_gap - (n - 1) * inner_gap;
  const int len_cap = std::min(kMaxSegmentLen, avail / n);
  std::uniform_int_distribution<int> len_dist(kMinSegmentLen, len_cap);
  std::vector<int> lens(static_cast<std::size_t>(n));
  int used = 0;
  for (int& len : lens) {
    len = len_dist(rng);
    used += len;
  }
  int leftover = avail - used;

  std::vector<int> gaps(static_cast<std::size_t>(n) + 1, inner_gap);
  gaps.front() = edge_gap;
  gaps.back() = edge_gap;
  for (std::size_t i = 0; i < gaps.size() && leftover > 0; ++i) {
    std::uniform_int_distribution<int> extra(0, leftover);
    const int e = extra(rng);
    gaps[i] += e;
    leftover -= e;
  }
  gaps.back() += leftover;

  std::uniform_int_distribution<int> cat_dist(0, spec.categories - 1);
  VideoPlan plan;
  plan.snippets.assign(static_cast<std::size_t>(T), SnippetPlan{});
  // Mixture snippets with majority action content count as part of the
  // annotated instance; the rest of the ramp is action context outside it.
  const int inside = w / 2;
  int cursor = gaps[0];  // 0-based index of the next core start
  for (int s = 0; s < n; ++s) {
    const int core_start = cursor + 1;  // 1-based
    const int core_end = cursor + lens[static_cast<std::size_t>(s)];
    GtSegment seg;
    seg.category = cat_dist(rng);
    seg.start = core_start - inside;
    seg.end = core_end + inside;
    plan.segments.push_back(seg);
    for (int t = core_start - 1; t <= core_end - 1; ++t) {
      plan.snippets[static_cast<std::size_t>(t)] = SnippetPlan{1.0, seg.category};
    }
    // Ambiguous ramps on both sides of the core, descending outward.
    for (int d = 1; d <= w; ++d) {
      const double alpha = static_cast<double>(w + 1 - d) / (w + 1);
      const int before = core_start - 1 - d;
      const int after = core_end - 1 + d;
      if (before >= 0) {
        plan.snippets[static_cast<std::size_t>(before)] = SnippetPlan{alpha, seg.category};
      }
      if (after < T) {
        plan.snippets[static_cast<std::size_t>(after)] = SnippetPlan{alpha, seg.category};
      }
    }
    cursor = core_end + gaps[static_cast<std::size_t>(s) + 1];
  }
  return plan;
}

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int D = spec.feature_dim;
  const int T = spec.snippets;
  const int C = spec.categories;

  const auto centroids_rgb = draw_centroids(C + 1, D, rng);
  const auto centroids_flow = draw_centroids(C + 1, D, rng);
  const double coord_sigma = spec.noise_scale / std::sqrt(static_cast<double>(D));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Corpus corpus;
  corpus.spec = spec;
  const int total = spec.train_videos + spec.test_videos;
  for (int v = 0; v < total; ++v) {
    VideoRecord rec;
    {
      std::ostringstream id;
      id << "v" << (v < 100 ? (v < 10 ? "00" : "0") : "") << v;
      rec.id = id.str();
    }
    rec.is_train = v < spec.train_videos;
    VideoPlan plan = plan_video(spec, rng);
    rec.segments = plan.segments;
    rec.label.assign(static_cast<std::size_t>(C), 0);
    for (const auto& seg : plan.segments) {
      rec.label[static_cast<std::size_t>(seg.category)] = 1;
    }
    std::vector<int> labeled;
    for (int c = 0; c < C; ++c) {
      if (rec.label[static_cast<std::size_t>(c)] != 0) {
        labeled.push_back(c);
      }
    }
    rec.rgb = Matrix(D, T);
    rec.flow = Matrix(D, T);
    for (int t = 0; t < T; ++t) {
      const SnippetPlan& sp = plan.snippets[static_cast<std::size_t>(t)];
      double alpha_rgb = sp.alpha;
      double alpha_flow = sp.alpha;
      int cat = sp.category;
      if (spec.disagreement_prob > 0.0 && unif(rng) < spec.disagreement_prob) {
        if (sp.alpha == 1.0) {
          // An action snippet loses motion or appearance evidence.
          if (unif(rng) < 0.5) {
            alpha_rgb = kActionDriftAlpha;
          } else {
            alpha_flow = kActionDriftAlpha;
          }
        } else if (sp.category < 0) {
          // A background snippet picks up misleading evidence for one of the
          // video's categories in a single modality.
          cat = labeled[static_cast<std::size_t>(rng() % labeled.size())];
          if (unif(rng) < 0.5) {
            alpha_rgb = kBackgroundDriftAlpha;
          } else {
            alpha_flow = kBackgroundDriftAlpha;
          }
        }
      }
      const auto& u_rgb =
          cat >= 0 ? centroids_rgb[static_cast<std::size_t>(cat)] : centroids_rgb.back();
      const auto& u_flow =
          cat >= 0 ? centroids_flow[static_cast<std::size_t>(cat)] : centroids_flow.back();
      const auto& bg_rgb = centroids_rgb.back();
      const auto& bg_flow = centroids_flow.back();
      for (int d = 0; d < D; ++d) {
        rec.rgb.at(d, t) = alpha_rgb * u_rgb[static_cast<std::size_t>(d)] +
                           (1.0 - alpha_rgb) * bg_rgb[static_cast<std::size_t>(d)] +
                           coord_sigma * noise(rng);
      }
      for (int d = 0; d < D; ++d) {
        rec.flow.at(d, t) = alpha_flow * u_flow[static_cast<std::size_t>(d)] +
                            (1.0 - alpha_flow) * bg_flow[static_cast<std::size_t>(d)] +
                            coord_sigma * noise(rng);
      }
    }
    corpus.videos.push_back(std::move(rec));
  }
  return corpus;
}

namespace {

constexpr char kFeatureMagic[] = "DDGF";
constexpr std::uint32_t kFeatureVersion = 1;

}  // namespace

void write_features(const std::string& path, const Matrix& rgb, const Matrix& flow) {
  if (!rgb.same_shape(flow)) {
    throw ShapeError("write_features: rgb " + shape_str(rgb) + " vs flow " + shape_str(flow));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("write_features: cannot open " + path);
  }
  ByteWriter w(out);
  w.bytes(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(rgb.cols));  // T
  w.u32(static_cast<std::uint32_t>(rgb.rows));  // D
  for (double v : rgb.data) {
    w.f64(v);
  }
  for (double v : flow.data) {
    w.f64(v);
  }
  if (!out) {
    throw IoError("write_features: write failed for " + path);
  }
}

std::pair<Matrix, Matrix> read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("read_features: cannot open " + path);
  }
  ByteReader r(in);
  if (r.bytes(4, "magic") != kFeatureMagic) {
    r.fail("read_features: bad magic in " + path);
  }
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureVersion) {
    r.fail("read_features: unsupported version " + std::to_string(version));
  }
  const std::uint32_t T = r.u32("snippet count");
  const std::uint32_t D = r.u32("feature dim");
  if (T == 0 || D == 0 || static_cast<std::uint64_t>(T) * D > (1u << 28)) {
    r.fail("read_features: implausible header " + std::to_string(D) + "x" + std::to_string(T));
  }
  Matrix rgb(static_cast<int>(D), static_cast<int>(T));
  Matrix flow(static_cast<int>(D), static_cast<int>(T));
  for (double& v : rgb.data) {
    v = r.f64("rgb values");
  }
  for (double& v : flow.data) {
    v = r.f64("flow values");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    r.fail("read_features: trailing bytes in " + path);
  }
  if (!rgb.is_finite() || !flow.is_finite()) {
    throw NumericError("read_features: non-finite feature values in " + path);
  }
  return {std::move(rgb), std::move(flow)};
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "features", ec);
  if (ec) {
    throw IoError("write_corpus: cannot create " + dir + ": " + ec.message());
  }
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  std::ofstream labels(fs::path(dir) / "labels.txt");
  std::ofstream annotations(fs::path(dir) / "annotations.txt");
  if (!manifest || !labels || !annotations) {
    throw IoError("write_corpus: cannot open output files in " + dir);
  }
  for (const auto& v : corpus.videos) {
    manifest << v.id << "," << (v.is_train ? "train" : "test") << "\n";
    labels << v.id << ",";
    bool first = true;
    for (std::size_t c = 0; c < v.label.size(); ++c) {
      if (v.label[c] != 0) {
        if (!first) {
          labels << "|";
        }
        labels << c;
        first = false;
      }
    }
    labels << "\n";
    for (const auto& seg : v.segments) {
      annotations << v.id << "," << seg.start << "," << seg.end << "," << seg.category << "\n";
    }
    write_features((fs::path(dir) / "features" / (v.id + ".ddgf")).string(), v.rgb, v.flow);
  }
  if (!manifest || !labels || !annotations) {
    throw IoError("write_corpus: write failed in " + dir);
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  return parts;
}

int parse_int(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) {
      throw std::invalid_argument(s);
    }
    return v;
  } catch (const std::exception&) {
    throw FormatError("read_corpus: bad integer '" + s + "' in " + context);
  }
}

}  // namespace

Corpus read_corpus(const std::string& dir, int categories) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) {
    throw IoError("read_corpus: cannot open " + (fs::path(dir) / "manifest.txt").string());
  }
  Corpus corpus;
  corpus.spec.categories = categories;

  std::string line;
  std::vector<std::pair<std::string, bool>> entries;
  while (std::getline(manifest, line)) {
    if (line.empty()) {
      continue;
    }
    auto parts = split_line(line, ',');
    if (parts.size() != 2 || (parts[1] != "train" && parts[1] != "test")) {
      throw FormatError("read_corpus: bad manifest line '" + line + "'");
    }
    entries.emplace_back(parts[0], parts[1] == "train");
  }

  std::ifstream labels(fs::path(dir) / "labels.txt");
  if (!labels) {
    throw IoError("read_corpus: cannot open labels.txt in " + dir);
  }
  std::vector<std::pair<std::string, std::vector<int>>> label_rows;
  while (std::getline(labels, line)) {
    if (line.empty()) {
      continue;
    }
    auto parts = split_line(line, ',');
    if (parts.size() != 2) {
      throw FormatError("read_corpus: bad label line '" + line + "'");
    }
    std::vector<int> multi_hot(static_cast<std::size_t>(categories), 0);
    for (const auto& c : split_line(parts[1], '|')) {
      const int cat = parse_int(c, "labels.txt");
      if (cat < 0 || cat >= categories) {
        throw FormatError("read_corpus: category " + c + " out of range in labels.txt");
      }
      multi_hot[static_cast<std::size_t>(cat)] = 1;
    }
    label_rows.emplace_back(parts[0], std::move(multi_hot));
  }

  std::ifstream annotations(fs::path(dir) / "annotations.txt");
  if (!annotations) {
    throw IoError("read_corpus: cannot open annotations.txt in " + dir);
  }
  std::vector<std::pair<std::string, GtSegment>> segment_rows;
  while (std::getline(annotations, line)) {
    if (line.empty()) {
      continue;
    }
    auto parts = split_line(line, ',');
    if (parts.size() != 4) {
      throw FormatError("read_corpus: bad annotation line '" + line + "'");
    }
    GtSegment seg;
    seg.start = parse_int(parts[1], "annotations.txt");
    seg.end = parse_int(parts[2], "annotations.txt");
    seg.category = parse_int(parts[3], "annotations.txt");
    if (seg.start < 1 || seg.end < seg.start || seg.category < 0 || seg.category >= categories) {
      throw FormatError("read_corpus: invalid segment '" + line + "'");
    }
    segment_rows.emplace_back(parts[0], seg);
  }

  for (const auto& [id, is_train] : entries) {
    VideoRecord rec;
    rec.id = id;
    rec.is_train = is_train;
    auto [rgb, flow] = read_features((fs::path(dir) / "features" / (id + ".ddgf")).string());
    rec.rgb = std::move(rgb);
    rec.flow = std::move(flow);
    bool found = false;
    for (const auto& [lid, multi_hot] : label_rows) {
      if (lid == id) {
        rec.label = multi_hot;
        found = true;
        break;
      }
    }
    if (!found) {
      throw FormatError("read_corpus: no label for video " + id);
    }
    for (const auto& [sid, seg] : segment_rows) {
      if (sid == id) {
        if (seg.end > rec.rgb.cols) {
          throw FormatError("read_corpus: segment beyond video length for " + id);
        }
        rec.segments.push_back(seg);
      }
    }
    corpus.videos.push_back(std::move(rec));
  }
  if (!corpus.videos.empty()) {
    corpus.spec.feature_dim = corpus.videos.front().rgb.rows;
    corpus.spec.snippets = corpus.videos.front().rgb.cols;
    corpus.spec.train_videos = 0;
    corpus.spec.test_videos = 0;
    for (const auto& v : corpus.videos) {
      (v.is_train ? corpus.spec.train_videos : corpus.spec.test_videos) += 1;
    }
  }
  return corpus;
}

}  // namespace ddg
