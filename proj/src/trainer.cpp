#include "ddg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ddg {

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0) {
    throw ConfigError("TrainConfig: lambda weights must be >= 0");
  }
  if (learning_rate <= 0.0) {
    throw ConfigError("TrainConfig: learning_rate must be positive");
  }
  if (epochs < 1) {
    throw ConfigError("TrainConfig: epochs must be >= 1");
  }
  if (k_ratio <= 0.0 || k_ratio > 1.0) {
    throw ConfigError("TrainConfig: k_ratio must be in (0, 1]");
  }
  hyper.validate();
}

AdamState AdamState::init(ModelParams& params) {
  AdamState s;
  for (auto& [name, m] : params.named()) {
    s.m.emplace_back(m->rows, m->cols, 0.0);
    s.v.emplace_back(m->rows, m->cols, 0.0);
  }
  return s;
}

void adam_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double epsilon) {
  auto entries = params.named();
  if (grads.size() != entries.size()) {
    throw ContractError("adam_step: gradient count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Matrix& theta = *entries[p].second;
    const Matrix& g = grads[p];
    if (!theta.same_shape(g)) {
      throw ShapeError("adam_step: gradient shape mismatch for " + entries[p].first);
    }
    Matrix& m = state.m[p];
    Matrix& v = state.v[p];
    for (std::size_t i = 0; i < theta.data.size(); ++i) {
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      theta.data[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
    }
  }
}

namespace {

std::vector<Matrix> collect_gradients(Tape& tape, const ModelParams& params) {
  auto entries = params.named();
  std::vector<Matrix> grads;
  grads.reserve(entries.size());
  for (const auto& [name, m] : entries) {
    const Matrix* found = nullptr;
    for (const auto& [pname, var] : tape.params()) {
      if (pname == name) {
        found = &tape.grad(var);
        break;
      }
    }
    if (found == nullptr) {
      throw ContractError("collect_gradients: parameter " + name + " not on tape");
    }
    grads.push_back(*found);
  }
  return grads;
}

}  // namespace

StepResult train_step(ModelParams& params, AdamState& state, const VideoRecord& video,
                      const TrainConfig& cfg) {
  Tape tape;
  StepResult r;
  try {
    BoundModel model = bind_model(tape, params);
    VideoForward fwd = forward_video(tape, model, video.rgb, video.flow, cfg.hyper, cfg.flags);
    LossBreakdown loss = video_loss(tape, fwd, video.label, cfg.k_ratio, cfg.lambda1, cfg.lambda2);
    r.base = tape.value(loss.base).at(0, 0);
    r.lfc = tape.value(loss.lfc).at(0, 0);
    r.total = tape.value(loss.total).at(0, 0);
    if (!std::isfinite(r.total)) {
      throw NumericError("non-finite loss");
    }
    tape.backward(loss.total);
    adam_step(params, collect_gradients(tape, params), state, cfg.learning_rate);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " on video " + video.id);
  }
  return r;
}

TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const EvalSettings* eval_settings) {
  cfg.validate();
  auto train_videos = corpus.split(true);
  if (train_videos.empty()) {
    throw ContractError("train: corpus has no training videos");
  }
  for (const auto* v : train_videos) {
    bool any = false;
    for (int x : v->label) {
      any = any || (x != 0);
    }
    if (!any) {
      throw ContractError("train: video " + v->id + " has an empty label");
    }
  }

  TrainResult result;
  result.params = ModelParams::init(corpus.videos.front().rgb.rows, corpus.spec.categories,
                                    cfg.hyper.layers, cfg.seed);
  AdamState adam = AdamState::init(result.params);
  std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  std::vector<std::size_t> order(train_videos.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochMetrics metrics;
    metrics.epoch = epoch;
    for (std::size_t i : order) {
      try {
        StepResult step = train_step(result.params, adam, *train_videos[i], cfg);
        metrics.base_loss += step.base;
        metrics.lfc += step.lfc;
        metrics.total += step.total;
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
      }
    }
    const double n = static_cast<double>(train_videos.size());
    metrics.base_loss /= n;
    metrics.lfc /= n;
    metrics.total /= n;
    if (cfg.eval_during_train && eval_settings != nullptr &&
        (epoch % std::max(1, cfg.eval_every) == 0 || epoch == cfg.epochs)) {
      EvalReport report =
          evaluate(corpus, false, result.params, cfg.hyper, cfg.flags, *eval_settings);
      metrics.map_avg = report.map_avg;
    }
    result.history.push_back(metrics);
  }
  return result;
}

std::string TrainResult::metrics_csv() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  out << "epoch,base_loss,lfc,total,map_avg\n";
  for (const auto& m : history) {
    out << m.epoch << "," << m.base_loss << "," << m.lfc << "," << m.total << ",";
    if (m.map_avg >= 0.0) {
      out << m.map_avg;
    }
    out << "\n";
  }
  return out.str();
}

namespace {

ParamStore params_to_store(const ModelParams& params) {
  ParamStore store;
  for (const auto& [name, m] : params.named()) {
    store.add(name, *m);
  }
  return store;
}

void store_to_params(const ParamStore& store, ModelParams& params) {
  for (auto& [name, m] : params.named()) {
    const Matrix* src = store.find(name);
    if (src == nullptr || !src->same_shape(*m)) {
      throw ContractError("store_to_params: missing or misshaped " + name);
    }
    *m = *src;
  }
}

}  // namespace

GradCheckReport grad_check(const TrainConfig& cfg, int snippets, int feature_dim, int categories,
                           std::uint64_t seed, bool inject_bug) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Matrix rgb(feature_dim, snippets);
  Matrix flow(feature_dim, snippets);
  for (double& v : rgb.data) {
    v = unif(rng);
  }
  for (double& v : flow.data) {
    v = unif(rng);
  }
  std::vector<int> label(static_cast<std::size_t>(categories), 0);
  label[static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(categories))] = 1;
  for (int c = 0; c < categories; ++c) {
    if (unif(rng) > 0.5) {
      label[static_cast<std::size_t>(c)] = 1;
    }
  }

  ModelParams reference = ModelParams::init(feature_dim, categories, cfg.hyper.layers, seed + 1);

  LossFn loss_fn = [&](const ParamStore& store, ParamStore* grads) -> double {
    ModelParams probe = reference;
    store_to_params(store, probe);
    Tape tape;
    BoundModel model = bind_model(tape, probe);
    VideoForward fwd = forward_video(tape, model, rgb, flow, cfg.hyper, cfg.flags);
    LossBreakdown loss = video_loss(tape, fwd, label, cfg.k_ratio, cfg.lambda1, cfg.lambda2);
    const double value = tape.value(loss.total).at(0, 0);
    if (grads != nullptr) {
      tape.backward(loss.total);
      for (const auto& [name, var] : tape.params()) {
        grads->add(name, tape.grad(var));
      }
      if (inject_bug && !grads->items.empty()) {
        grads->items.front().second.data.front() += 0.5;
      }
    }
    return value;
  };

  GradCheckReport report;
  ParamStore store = params_to_store(reference);
  for (const auto& [name, m] : store.items) {
    report.parameter_count += m.size();
  }
  report.fd = finite_diff_check(loss_fn, store, 1e-5);
  return report;
}

}  // namespace ddg
