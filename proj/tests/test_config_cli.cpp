#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "ddg/config.hpp"

namespace fs = std::filesystem;

using ddg::RunConfig;

namespace {

std::string cli_path() {
  const char* env = std::getenv("DDG_CLI");
  return env ? std::string(env) : std::string();
}

int run_cmd(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string tiny_config(const fs::path& dir) {
  std::ostringstream cfg;
  cfg << "seed = 11\n"
      << "paths.data_dir = " << (dir / "data").string() << "\n"
      << "paths.out_dir = " << (dir / "out").string() << "\n"
      << "corpus.categories = 2\n"
      << "corpus.feature_dim = 8\n"
      << "corpus.train_videos = 3\n"
      << "corpus.test_videos = 2\n"
      << "corpus.snippets = 32\n"
      << "corpus.min_segments = 1\n"
      << "corpus.max_segments = 2\n"
      << "corpus.boundary_width = 2\n"
      << "train.epochs = 2\n"
      << "train.k_ratio = 0.25\n";
  return cfg.str();
}

}  // namespace

TEST_CASE("config defaults match the documented values") {
  RunConfig cfg;
  CHECK(cfg.seed == 7);
  CHECK(cfg.corpus.categories == 4);
  CHECK(cfg.corpus.feature_dim == 32);
  CHECK(cfg.corpus.train_videos == 60);
  CHECK(cfg.corpus.test_videos == 30);
  CHECK(cfg.corpus.snippets == 80);
  CHECK(cfg.ddg.eta == 0.5);
  CHECK(cfg.ddg.theta == 0.8);
  CHECK(cfg.ddg.top_k == 10);
  CHECK(cfg.ddg.tau == 0.5);
  CHECK(cfg.ddg.layers == 2);
  CHECK(cfg.lambda1 == 1.0);
  CHECK(cfg.lambda2 == 3.2);
  CHECK(cfg.epochs == 100);
  CHECK(cfg.iou_list.size() == 7);
}

TEST_CASE("config parsing handles comments, whitespace, and dotted keys") {
  TempDir dir("ddg_cfg_parse");
  write_file(dir.path / "a.cfg",
             "# comment line\n"
             "  ddg.eta = 0.6   # trailing comment\n"
             "\n"
             "train.epochs=17\n"
             "eval.iou_list = 0.3, 0.5 ,0.7\n"
             "train.enable_gcn = false\n");
  RunConfig cfg = RunConfig::load((dir.path / "a.cfg").string());
  CHECK(cfg.ddg.eta == 0.6);
  CHECK(cfg.epochs == 17);
  CHECK(cfg.iou_list == std::vector<double>{0.3, 0.5, 0.7});
  CHECK_FALSE(cfg.enable_gcn);
}

TEST_CASE("unknown config keys are rejected by name") {
  TempDir dir("ddg_cfg_unknown");
  write_file(dir.path / "bad.cfg", "ddg.ETA = 0.5\n");
  try {
    RunConfig::load((dir.path / "bad.cfg").string());
    FAIL("expected ConfigError");
  } catch (const ddg::ConfigError& e) {
    CHECK(std::string(e.what()).find("ddg.ETA") != std::string::npos);
  }
}

TEST_CASE("malformed values are config errors") {
  TempDir dir("ddg_cfg_badval");
  write_file(dir.path / "bad.cfg", "train.epochs = soon\n");
  CHECK_THROWS_AS(RunConfig::load((dir.path / "bad.cfg").string()), ddg::ConfigError);
  write_file(dir.path / "bad2.cfg", "train.enable_gcn = maybe\n");
  CHECK_THROWS_AS(RunConfig::load((dir.path / "bad2.cfg").string()), ddg::ConfigError);
  write_file(dir.path / "bad3.cfg", "just a line\n");
  CHECK_THROWS_AS(RunConfig::load((dir.path / "bad3.cfg").string()), ddg::ConfigError);
}

TEST_CASE("serialize/parse round trip is lossless") {
  TempDir dir("ddg_cfg_rt");
  RunConfig cfg;
  cfg.seed = 99;
  cfg.ddg.theta = 0.75;
  cfg.iou_list = {0.25, 0.5};
  cfg.enable_lfc = false;
  write_file(dir.path / "rt.cfg", cfg.serialize());
  RunConfig loaded = RunConfig::load((dir.path / "rt.cfg").string());
  CHECK(loaded.serialize() == cfg.serialize());
}

TEST_CASE("DDG_SEED overrides the configured seed") {
  RunConfig cfg;
  setenv("DDG_SEED", "4242", 1);
  cfg.apply_env();
  unsetenv("DDG_SEED");
  CHECK(cfg.seed == 4242);
}

TEST_CASE("ablation presets configure the documented flag combinations") {
  RunConfig cfg;
  ddg::apply_ablation(cfg, "no-graph");
  CHECK_FALSE(cfg.enable_graph_avg);
  CHECK_FALSE(cfg.enable_gcn);
  CHECK_FALSE(cfg.enable_lfc);

  RunConfig c2;
  ddg::apply_ablation(c2, "no-lfc");
  CHECK(c2.enable_graph_avg);
  CHECK(c2.enable_gcn);
  CHECK_FALSE(c2.enable_lfc);

  RunConfig c3;
  ddg::apply_ablation(c3, "no-disconnect");
  CHECK_FALSE(c3.disconnect_ambiguity);
  CHECK(c3.fuse_adjacency);

  RunConfig c4;
  ddg::apply_ablation(c4, "per-modal");
  CHECK_FALSE(c4.fuse_adjacency);
  CHECK(c4.disconnect_ambiguity);

  RunConfig c5;
  CHECK_THROWS_AS(ddg::apply_ablation(c5, "everything"), ddg::ConfigError);
}

TEST_CASE("cli end-to-end: gen, train, eval, gradcheck") {
  const std::string cli = cli_path();
  if (cli.empty()) {
    MESSAGE("DDG_CLI not set; skipping CLI end-to-end checks");
    return;
  }
  TempDir dir("ddg_cli_e2e");
  const fs::path cfg_path = dir.path / "run.cfg";
  write_file(cfg_path, tiny_config(dir.path));

  SUBCASE("gen is deterministic and idempotent") {
    CHECK(run_cmd(cli + " gen --config " + cfg_path.string()) == 0);
    const std::string manifest = slurp(dir.path / "data" / "manifest.txt");
    CHECK(manifest.find("v000,train") != std::string::npos);
    const std::string features = slurp(dir.path / "data" / "features" / "v000.ddgf");
    CHECK(run_cmd(cli + " gen --config " + cfg_path.string()) == 0);
    CHECK(slurp(dir.path / "data" / "features" / "v000.ddgf") == features);
  }

  SUBCASE("full pipeline and exit codes") {
    REQUIRE(run_cmd(cli + " gen --config " + cfg_path.string()) == 0);
    REQUIRE(run_cmd(cli + " train --config " + cfg_path.string()) == 0);
    CHECK(fs::exists(dir.path / "out" / "checkpoint.ddgc"));
    CHECK(fs::exists(dir.path / "out" / "metrics.csv"));
    CHECK(fs::exists(dir.path / "out" / "effective_config.txt"));

    REQUIRE(run_cmd(cli + " eval --config " + cfg_path.string()) == 0);
    CHECK(fs::exists(dir.path / "out" / "report.csv"));
    const std::string report = slurp(dir.path / "out" / "report.csv");
    REQUIRE(run_cmd(cli + " eval --config " + cfg_path.string()) == 0);
    CHECK(slurp(dir.path / "out" / "report.csv") == report);

    // attention curves carry a valid partition tag per snippet
    const std::string att = slurp(dir.path / "out" / "attention" / "v003.csv");
    CHECK(att.rfind("t,att_rgb,att_flow,att_fused,partition_tag\n", 0) == 0);
    std::istringstream lines(att);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
      const bool tagged = line.find("action") != std::string::npos ||
                          line.find("background") != std::string::npos ||
                          line.find("ambiguous") != std::string::npos;
      CHECK(tagged);
      ++rows;
    }
    CHECK(rows == 32);

    // rerunning train from the effective config reproduces the checkpoint
    const std::string ckpt = slurp(dir.path / "out" / "checkpoint.ddgc");
    REQUIRE(run_cmd(cli + " train --config " +
                    (dir.path / "out" / "effective_config.txt").string()) == 0);
    CHECK(slurp(dir.path / "out" / "checkpoint.ddgc") == ckpt);

    // corrupt checkpoint -> exit 5
    write_file(dir.path / "out" / "broken.ddgc", "XXXX not a checkpoint");
    CHECK(run_cmd(cli + " eval --config " + cfg_path.string() + " --checkpoint " +
                  (dir.path / "out" / "broken.ddgc").string()) == 5);
  }

  SUBCASE("error exit codes") {
    write_file(dir.path / "bad.cfg", "mystery.key = 1\n");
    CHECK(run_cmd(cli + " gen --config " + (dir.path / "bad.cfg").string()) == 3);

    write_file(dir.path / "nowhere.cfg",
               tiny_config(dir.path) + "paths.data_dir = /dev/null/nope\n");
    CHECK(run_cmd(cli + " gen --config " + (dir.path / "nowhere.cfg").string()) == 2);

    CHECK(run_cmd(cli + " train --config " + (dir.path / "nowhere.cfg").string()) == 2);
  }

  SUBCASE("gradcheck exit code follows the verdict") {
    CHECK(run_cmd(cli + " gradcheck --config " + cfg_path.string()) == 0);
    CHECK(run_cmd(cli + " gradcheck --config " + cfg_path.string() + " --force-grad-bug") == 1);
  }
}
