#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ddg/checkpoint.hpp"
#include "ddg/config.hpp"
#include "ddg/corpus.hpp"
#include "ddg/evaluator.hpp"
#include "ddg/trainer.hpp"

namespace fs = std::filesystem;

namespace {

ddg::RunConfig load_config(const std::string& path) {
  ddg::RunConfig cfg = path.empty() ? ddg::RunConfig{} : ddg::RunConfig::load(path);
  cfg.apply_env();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw ddg::IoError("cannot open " + path.string());
  }
  out << text;
  if (!out) {
    throw ddg::IoError("write failed for " + path.string());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw ddg::IoError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

void cmd_gen(const ddg::RunConfig& cfg) {
  ddg::Corpus corpus = ddg::generate_corpus(cfg.corpus_spec());
  ddg::write_corpus(corpus, cfg.data_dir);
  int train = 0;
  int test = 0;
  for (const auto& v : corpus.videos) {
    (v.is_train ? train : test) += 1;
  }
  std::printf("generated %zu videos into %s (%d train / %d test, T=%d, D=%d, C=%d)\n",
              corpus.videos.size(), cfg.data_dir.c_str(), train, test, cfg.corpus.snippets,
              cfg.corpus.feature_dim, cfg.corpus.categories);
}

std::string train_once(const ddg::RunConfig& cfg, const std::string& checkpoint_path) {
  ddg::Corpus corpus = ddg::read_corpus(cfg.data_dir, cfg.corpus.categories);
  ddg::TrainConfig tc = cfg.train_config();
  ddg::EvalSettings es = cfg.eval_settings();
  ddg::TrainResult result = ddg::train(corpus, tc, &es);

  ensure_dir(cfg.out_dir);
  const std::string ckpt =
      checkpoint_path.empty() ? (fs::path(cfg.out_dir) / "checkpoint.ddgc").string()
                              : checkpoint_path;
  ddg::save_checkpoint(result.params, ckpt);
  write_text(fs::path(cfg.out_dir) / "metrics.csv", result.metrics_csv());
  write_text(fs::path(cfg.out_dir) / "effective_config.txt", cfg.serialize());
  const auto& last = result.history.back();
  std::printf("trained %d epochs: base=%.6f lfc=%.6f total=%.6f -> %s\n", last.epoch,
              last.base_loss, last.lfc, last.total, ckpt.c_str());
  return ckpt;
}

void write_attention_csv(const fs::path& path, const ddg::VideoInference& inf) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  out << "t,att_rgb,att_flow,att_fused,partition_tag\n";
  const int T = inf.att_fused.cols;
  std::vector<std::string> tags(static_cast<std::size_t>(T), "ambiguous");
  for (int t : inf.partition.action) {
    tags[static_cast<std::size_t>(t)] = "action";
  }
  for (int t : inf.partition.background) {
    tags[static_cast<std::size_t>(t)] = "background";
  }
  for (int t = 0; t < T; ++t) {
    out << (t + 1) << "," << inf.att_rgb.at(0, t) << "," << inf.att_flow.at(0, t) << ","
        << inf.att_fused.at(0, t) << "," << tags[static_cast<std::size_t>(t)] << "\n";
  }
  write_text(path, out.str());
}

void write_debug_dump(const fs::path& path, const ddg::VideoInference& inf) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(9);
  auto list = [&out](const char* name, const std::vector<int>& idx) {
    out << name << " (" << idx.size() << "):";
    for (int t : idx) {
      out << " " << (t + 1);
    }
    out << "\n";
  };
  out << "video " << inf.video_id << "\n";
  list("action", inf.partition.action);
  list("background", inf.partition.background);
  list("ambiguous", inf.partition.ambiguous);
  auto dump_matrix = [&out](const char* name, const ddg::Matrix& m) {
    for (int j = 0; j < m.cols; ++j) {
      int survivors = 0;
      double sum = 0.0;
      for (int i = 0; i < m.rows; ++i) {
        if (m.at(i, j) != 0.0) {
          ++survivors;
        }
        sum += m.at(i, j);
      }
      out << name << " col " << j << ": survivors=" << survivors << " sum=" << sum << "\n";
    }
  };
  if (inf.subgraphs.action_adj.cols > 0 || inf.subgraphs.background_adj.cols > 0 ||
      inf.subgraphs.ambiguous_adj.cols > 0) {
    dump_matrix("A_a", inf.subgraphs.action_adj);
    dump_matrix("A_b", inf.subgraphs.background_adj);
    dump_matrix("A_m", inf.subgraphs.ambiguous_adj);
  } else {
    out << "subgraphs: not built for this configuration\n";
  }
  write_text(path, out.str());
}

void cmd_eval(const ddg::RunConfig& cfg, const std::string& checkpoint_path, bool debug_dump) {
  ddg::Corpus corpus = ddg::read_corpus(cfg.data_dir, cfg.corpus.categories);
  if (corpus.videos.empty()) {
    throw ddg::IoError("eval: corpus in " + cfg.data_dir + " is empty");
  }
  ddg::ModelParams params =
      ddg::ModelParams::init(corpus.videos.front().rgb.rows, cfg.corpus.categories,
                             cfg.ddg.layers, cfg.seed);
  ddg::load_checkpoint(checkpoint_path, params);

  ddg::EvalSettings settings = cfg.eval_settings();
  ddg::GraphFlags flags = cfg.train_config().flags;
  ddg::EvalReport report = ddg::evaluate(corpus, false, params, cfg.ddg, flags, settings);

  ensure_dir(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "report.csv", report.to_csv());

  ensure_dir(fs::path(cfg.out_dir) / "attention");
  if (debug_dump) {
    ensure_dir(fs::path(cfg.out_dir) / "debug");
  }
  for (const auto* video : corpus.split(false)) {
    ddg::VideoInference inf = ddg::infer_video(*video, params, cfg.ddg, flags, settings);
    write_attention_csv(fs::path(cfg.out_dir) / "attention" / (video->id + ".csv"), inf);
    if (debug_dump) {
      write_debug_dump(fs::path(cfg.out_dir) / "debug" / (video->id + ".txt"), inf);
    }
  }

  std::printf("mAP");
  for (std::size_t i = 0; i < report.iou_list.size(); ++i) {
    std::printf(" @%.2f=%.4f", report.iou_list[i], report.map_per_iou[i]);
  }
  std::printf(" avg=%.4f\n", report.map_avg);
}

int cmd_gradcheck(const ddg::RunConfig& cfg, bool force_bug) {
  constexpr double kTolerance = 1e-4;
  ddg::TrainConfig full = cfg.train_config();
  ddg::TrainConfig baseline = full;
  baseline.flags = ddg::GraphFlags{false, false, false, true, true};

  bool ok = true;
  auto run = [&](const char* name, const ddg::TrainConfig& tc) {
    ddg::GradCheckReport report = ddg::grad_check(tc, 12, 8, 3, cfg.seed, force_bug);
    const bool pass = report.pass(kTolerance);
    ok = ok && pass;
    std::printf("gradcheck %-8s max_rel_err=%.3e (worst %s[%d], %d params) %s\n", name,
                report.fd.max_rel_err, report.fd.worst_param.c_str(), report.fd.worst_index,
                report.parameter_count, pass ? "PASS" : "FAIL");
  };
  run("full", full);
  run("baseline", baseline);
  return ok ? 0 : 1;
}

void cmd_ablate_suite(const ddg::RunConfig& base_cfg) {
  ddg::Corpus corpus = ddg::read_corpus(base_cfg.data_dir, base_cfg.corpus.categories);
  ensure_dir(base_cfg.out_dir);

  std::ostringstream csv;
  csv.setf(std::ios::fixed);
  csv.precision(6);
  csv << "variant";
  for (double iou : base_cfg.iou_list) {
    csv << ",mAP@" << iou;
  }
  csv << ",Avg\n";

  for (const std::string& name : ddg::ablation_names()) {
    ddg::RunConfig cfg = base_cfg;
    ddg::apply_ablation(cfg, name);
    ddg::TrainConfig tc = cfg.train_config();
    ddg::TrainResult result = ddg::train(corpus, tc, nullptr);
    ddg::save_checkpoint(result.params,
                         (fs::path(cfg.out_dir) / ("ablate_" + name + ".ddgc")).string());
    ddg::EvalReport report =
        ddg::evaluate(corpus, false, result.params, tc.hyper, tc.flags, cfg.eval_settings());
    csv << name;
    for (double v : report.map_per_iou) {
      csv << "," << v;
    }
    csv << "," << report.map_avg << "\n";
    std::printf("%-14s avg mAP = %.4f\n", name.c_str(), report.map_avg);
  }
  write_text(fs::path(base_cfg.out_dir) / "ablation_summary.csv", csv.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminability-driven graph network for weakly-supervised temporal action "
               "localization on synthetic two-stream features"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::string ablate = "none";
  bool debug_dump = false;
  bool force_bug = false;
  int threads_override = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file");
    cmd->add_option("--threads", threads_override, "worker threads for per-video evaluation");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate the synthetic corpus");
  add_common(gen);
  CLI::App* train = app.add_subcommand("train", "train a model on the corpus");
  add_common(train);
  train->add_option("--checkpoint", checkpoint_path, "checkpoint output path");
  train->add_option("--ablate", ablate, "ablation preset (none|no-graph|avg-only|no-lfc|per-modal|no-disconnect)");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint to load");
  eval->add_option("--ablate", ablate, "ablation preset used at inference");
  eval->add_flag("--debug-dump", debug_dump, "write per-video graph dumps");
  CLI::App* suite = app.add_subcommand("ablate-suite", "train and evaluate the ablation grid");
  add_common(suite);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the objective");
  add_common(gradcheck);
  gradcheck->add_flag("--force-grad-bug", force_bug, "corrupt one gradient (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    std::cerr << e.what() << "\n";
    return 3;
  }

  try {
    ddg::RunConfig cfg = load_config(config_path);
    if (threads_override > 0) {
      cfg.threads = threads_override;
    }
    ddg::apply_ablation(cfg, ablate);

    if (gen->parsed()) {
      cmd_gen(cfg);
    } else if (train->parsed()) {
      train_once(cfg, checkpoint_path);
    } else if (eval->parsed()) {
      if (checkpoint_path.empty()) {
        checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.ddgc").string();
      }
      cmd_eval(cfg, checkpoint_path, debug_dump);
    } else if (suite->parsed()) {
      cmd_ablate_suite(cfg);
    } else if (gradcheck->parsed()) {
      return cmd_gradcheck(cfg, force_bug);
    }
    return 0;
  } catch (const ddg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const ddg::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 5;
  } catch (const ddg::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 4;
  } catch (const ddg::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const ddg::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
