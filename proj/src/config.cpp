#include "ddg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace ddg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument(v);
    }
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer '" + v + "' for key '" + key + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument(v);
    }
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("config: bad unsigned integer '" + v + "' for key '" + key + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) {
      throw std::invalid_argument(v);
    }
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number '" + v + "' for key '" + key + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") {
    return true;
  }
  if (v == "false" || v == "0") {
    return false;
  }
  throw ConfigError("config: bad boolean '" + v + "' for key '" + key + "'");
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    out.push_back(parse_double(trim(cur), key));
  }
  if (out.empty()) {
    throw ConfigError("config: empty list for key '" + key + "'");
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

std::string format_double_list(const std::vector<double>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) {
      out << ",";
    }
    out << v[i];
  }
  return out.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") {
    seed = parse_u64(value, key);
  } else if (key == "threads") {
    threads = parse_int(value, key);
  } else if (key == "paths.data_dir") {
    data_dir = value;
  } else if (key == "paths.out_dir") {
    out_dir = value;
  } else if (key == "corpus.categories") {
    corpus.categories = parse_int(value, key);
  } else if (key == "corpus.feature_dim") {
    corpus.feature_dim = parse_int(value, key);
  } else if (key == "corpus.train_videos") {
    corpus.train_videos = parse_int(value, key);
  } else if (key == "corpus.test_videos") {
    corpus.test_videos = parse_int(value, key);
  } else if (key == "corpus.snippets") {
    corpus.snippets = parse_int(value, key);
  } else if (key == "corpus.min_segments") {
    corpus.min_segments = parse_int(value, key);
  } else if (key == "corpus.max_segments") {
    corpus.max_segments = parse_int(value, key);
  } else if (key == "corpus.boundary_width") {
    corpus.boundary_width = parse_int(value, key);
  } else if (key == "corpus.noise_scale") {
    corpus.noise_scale = parse_double(value, key);
  } else if (key == "corpus.disagreement_prob") {
    corpus.disagreement_prob = parse_double(value, key);
  } else if (key == "ddg.eta") {
    ddg.eta = parse_double(value, key);
  } else if (key == "ddg.theta") {
    ddg.theta = parse_double(value, key);
  } else if (key == "ddg.top_k") {
    ddg.top_k = parse_int(value, key);
  } else if (key == "ddg.tau") {
    ddg.tau = parse_double(value, key);
  } else if (key == "ddg.layers") {
    ddg.layers = parse_int(value, key);
  } else if (key == "train.lambda1") {
    lambda1 = parse_double(value, key);
  } else if (key == "train.lambda2") {
    lambda2 = parse_double(value, key);
  } else if (key == "train.learning_rate") {
    learning_rate = parse_double(value, key);
  } else if (key == "train.epochs") {
    epochs = parse_int(value, key);
  } else if (key == "train.k_ratio") {
    k_ratio = parse_double(value, key);
  } else if (key == "train.enable_graph_avg") {
    enable_graph_avg = parse_bool(value, key);
  } else if (key == "train.enable_gcn") {
    enable_gcn = parse_bool(value, key);
  } else if (key == "train.enable_lfc") {
    enable_lfc = parse_bool(value, key);
  } else if (key == "train.disconnect_ambiguity") {
    disconnect_ambiguity = parse_bool(value, key);
  } else if (key == "train.fuse_adjacency") {
    fuse_adjacency = parse_bool(value, key);
  } else if (key == "train.eval_during_train") {
    eval_during_train = parse_bool(value, key);
  } else if (key == "train.eval_every") {
    eval_every = parse_int(value, key);
  } else if (key == "eval.iou_list") {
    iou_list = parse_double_list(value, key);
  } else if (key == "eval.attention_thresholds") {
    attention_thresholds = parse_int(value, key);
  } else if (key == "eval.nms_iou") {
    nms_iou = parse_double(value, key);
  } else if (key == "eval.score_cut") {
    score_cut = parse_double(value, key);
  } else if (key == "eval.outer_ratio") {
    outer_ratio = parse_double(value, key);
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("config: cannot open " + path);
  }
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: missing '=' on line " + std::to_string(line_no));
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::apply_env() {
  if (const char* env = std::getenv("DDG_SEED")) {
    seed = parse_u64(env, "DDG_SEED");
  }
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out << "seed = " << seed << "\n";
  out << "threads = " << threads << "\n";
  out << "paths.data_dir = " << data_dir << "\n";
  out << "paths.out_dir = " << out_dir << "\n";
  out << "corpus.categories = " << corpus.categories << "\n";
  out << "corpus.feature_dim = " << corpus.feature_dim << "\n";
  out << "corpus.train_videos = " << corpus.train_videos << "\n";
  out << "corpus.test_videos = " << corpus.test_videos << "\n";
  out << "corpus.snippets = " << corpus.snippets << "\n";
  out << "corpus.min_segments = " << corpus.min_segments << "\n";
  out << "corpus.max_segments = " << corpus.max_segments << "\n";
  out << "corpus.boundary_width = " << corpus.boundary_width << "\n";
  out << "corpus.noise_scale = " << format_double(corpus.noise_scale) << "\n";
  out << "corpus.disagreement_prob = " << format_double(corpus.disagreement_prob) << "\n";
  out << "ddg.eta = " << format_double(ddg.eta) << "\n";
  out << "ddg.theta = " << format_double(ddg.theta) << "\n";
  out << "ddg.top_k = " << ddg.top_k << "\n";
  out << "ddg.tau = " << format_double(ddg.tau) << "\n";
  out << "ddg.layers = " << ddg.layers << "\n";
  out << "train.lambda1 = " << format_double(lambda1) << "\n";
  out << "train.lambda2 = " << format_double(lambda2) << "\n";
  out << "train.learning_rate = " << format_double(learning_rate) << "\n";
  out << "train.epochs = " << epochs << "\n";
  out << "train.k_ratio = " << format_double(k_ratio) << "\n";
  out << "train.enable_graph_avg = " << (enable_graph_avg ? "true" : "false") << "\n";
  out << "train.enable_gcn = " << (enable_gcn ? "true" : "false") << "\n";
  out << "train.enable_lfc = " << (enable_lfc ? "true" : "false") << "\n";
  out << "train.disconnect_ambiguity = " << (disconnect_ambiguity ? "true" : "false") << "\n";
  out << "train.fuse_adjacency = " << (fuse_adjacency ? "true" : "false") << "\n";
  out << "train.eval_during_train = " << (eval_during_train ? "true" : "false") << "\n";
  out << "train.eval_every = " << eval_every << "\n";
  out << "eval.iou_list = " << format_double_list(iou_list) << "\n";
  out << "eval.attention_thresholds = " << attention_thresholds << "\n";
  out << "eval.nms_iou = " << format_double(nms_iou) << "\n";
  out << "eval.score_cut = " << format_double(score_cut) << "\n";
  out << "eval.outer_ratio = " << format_double(outer_ratio) << "\n";
  return out.str();
}

CorpusSpec RunConfig::corpus_spec() const {
  CorpusSpec spec = corpus;
  spec.seed = seed;
  return spec;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.lambda1 = lambda1;
  cfg.lambda2 = lambda2;
  cfg.learning_rate = learning_rate;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.k_ratio = k_ratio;
  cfg.hyper = ddg;
  cfg.flags.graph_avg = enable_graph_avg;
  cfg.flags.gcn = enable_gcn;
  cfg.flags.lfc = enable_lfc;
  cfg.flags.disconnect = disconnect_ambiguity;
  cfg.flags.fuse_adjacency = fuse_adjacency;
  cfg.eval_during_train = eval_during_train;
  cfg.eval_every = eval_every;
  return cfg;
}

EvalSettings RunConfig::eval_settings() const {
  EvalSettings s;
  s.iou_list = iou_list;
  s.attention_thresholds = attention_thresholds;
  s.nms_iou = nms_iou;
  s.score_cut = score_cut;
  s.outer_ratio = outer_ratio;
  s.k_ratio = k_ratio;
  s.threads = threads;
  return s;
}

void apply_ablation(RunConfig& cfg, const std::string& name) {
  if (name == "none") {
    return;
  }
  if (name == "no-graph") {
    cfg.enable_graph_avg = false;
    cfg.enable_gcn = false;
    cfg.enable_lfc = false;
    return;
  }
  if (name == "avg-only") {
    cfg.enable_graph_avg = true;
    cfg.enable_gcn = false;
    cfg.enable_lfc = false;
    return;
  }
  if (name == "no-lfc") {
    cfg.enable_graph_avg = true;
    cfg.enable_gcn = true;
    cfg.enable_lfc = false;
    return;
  }
  if (name == "per-modal") {
    cfg.fuse_adjacency = false;
    return;
  }
  if (name == "no-disconnect") {
    cfg.disconnect_ambiguity = false;
    return;
  }
  throw ConfigError("unknown ablation '" + name + "'");
}

std::vector<std::string> ablation_names() {
  return {"no-graph", "avg-only", "no-lfc", "none", "per-modal", "no-disconnect"};
}

}  // namespace ddg
