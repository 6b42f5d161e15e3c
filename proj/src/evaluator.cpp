#include "ddg/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace ddg {

std::vector<double> attention_threshold_list(int count) {
  if (count < 1) {
    throw ConfigError("attention_threshold_list: count must be >= 1");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    out.push_back(0.1 + 0.8 * i / (count + 1));
  }
  return out;
}

double temporal_iou(int a_start, int a_end, int b_start, int b_end) {
  const double inter =
      std::max(0.0, static_cast<double>(std::min(a_end, b_end) + 1 - std::max(a_start, b_start)));
  const double len_a = a_end - a_start + 1;
  const double len_b = b_end - b_start + 1;
  const double uni = len_a + len_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<ActionProposal> generate_proposals(const Matrix& attention, const Matrix& suppressed,
                                               const std::vector<double>& video_scores,
                                               const std::vector<double>& thresholds,
                                               double score_cut, double outer_ratio) {
  if (attention.rows != 1 || attention.cols != suppressed.cols) {
    throw ShapeError("generate_proposals: attention " + shape_str(attention) + " vs CAS " +
                     shape_str(suppressed));
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    if (thresholds[i] <= thresholds[i - 1]) {
      throw ContractError("generate_proposals: thresholds must be ascending");
    }
  }
  const int T = attention.cols;
  const int num_categories = suppressed.rows - 1;  // background row excluded

  std::vector<ActionProposal> out;
  std::set<std::tuple<int, int, int>> seen;
  for (int c = 0; c < num_categories; ++c) {
    if (video_scores[static_cast<std::size_t>(c)] <= score_cut) {
      continue;
    }
    for (double v : thresholds) {
      int t = 0;
      while (t < T) {
        if (attention.at(0, t) < v) {
          ++t;
          continue;
        }
        int s0 = t;
        while (t < T && attention.at(0, t) >= v) {
          ++t;
        }
        const int e0 = t - 1;
        if (!seen.insert({c, s0, e0}).second) {
          continue;
        }
        const int len = e0 - s0 + 1;
        double inner = 0.0;
        for (int i = s0; i <= e0; ++i) {
          inner += suppressed.at(c, i);
        }
        inner /= len;
        const int flank = std::max(1, static_cast<int>(std::lround(outer_ratio * len)));
        double outer = 0.0;
        int outer_count = 0;
        for (int i = std::max(0, s0 - flank); i < s0; ++i) {
          outer += suppressed.at(c, i);
          ++outer_count;
        }
        for (int i = e0 + 1; i <= std::min(T - 1, e0 + flank); ++i) {
          outer += suppressed.at(c, i);
          ++outer_count;
        }
        if (outer_count > 0) {
          outer /= outer_count;
        }
        ActionProposal p;
        p.start = s0 + 1;
        p.end = e0 + 1;
        p.category = c;
        p.confidence = inner - outer + video_scores[static_cast<std::size_t>(c)];
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

namespace {

bool confidence_order(const ActionProposal& a, const ActionProposal& b) {
  if (a.confidence != b.confidence) {
    return a.confidence > b.confidence;
  }
  if (a.video_id != b.video_id) {
    return a.video_id < b.video_id;
  }
  if (a.start != b.start) {
    return a.start < b.start;
  }
  return a.end < b.end;
}

}  // namespace

std::vector<ActionProposal> nms(std::vector<ActionProposal> proposals, double iou_cut) {
  std::stable_sort(proposals.begin(), proposals.end(), confidence_order);
  std::vector<ActionProposal> kept;
  for (const auto& p : proposals) {
    bool suppressed_flag = false;
    for (const auto& k : kept) {
      if (k.category == p.category && k.video_id == p.video_id &&
          temporal_iou(k.start, k.end, p.start, p.end) > iou_cut) {
        suppressed_flag = true;
        break;
      }
    }
    if (!suppressed_flag) {
      kept.push_back(p);
    }
  }
  return kept;
}

double average_precision(std::vector<ActionProposal> proposals, const std::vector<GtInstance>& gts,
                         double iou_thr) {
  if (gts.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::stable_sort(proposals.begin(), proposals.end(), confidence_order);
  std::vector<bool> matched(gts.size(), false);
  const int npos = static_cast<int>(gts.size());

  std::vector<bool> is_tp(proposals.size(), false);
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    const auto& p = proposals[k];
    double best_iou = 0.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[g] || gts[g].video_id != p.video_id) {
        continue;
      }
      const double iou = temporal_iou(p.start, p.end, gts[g].start, gts[g].end);
      if (iou >= iou_thr && iou > best_iou) {
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      matched[static_cast<std::size_t>(best_gt)] = true;
      is_tp[k] = true;
    }
  }

  std::vector<double> precision(proposals.size());
  std::vector<double> recall(proposals.size());
  int tp = 0;
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    tp += is_tp[k] ? 1 : 0;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / npos;
  }
  // All-points interpolation: integrate the precision envelope over recall.
  double ap = 0.0;
  double envelope = 0.0;
  for (std::size_t k = proposals.size(); k-- > 0;) {
    envelope = std::max(envelope, precision[k]);
    const double prev_recall = k == 0 ? 0.0 : recall[k - 1];
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * envelope;
    }
  }
  return ap;
}

EvalReport build_report(const std::vector<ActionProposal>& proposals,
                        const std::vector<GtInstance>& gts, int categories,
                        const std::vector<double>& iou_list) {
  EvalReport report;
  report.iou_list = iou_list;
  report.categories = categories;
  report.ap.assign(static_cast<std::size_t>(categories),
                   std::vector<double>(iou_list.size(), std::numeric_limits<double>::quiet_NaN()));

  for (int c = 0; c < categories; ++c) {
    std::vector<ActionProposal> cat_props;
    for (const auto& p : proposals) {
      if (p.category == c) {
        cat_props.push_back(p);
      }
    }
    std::vector<GtInstance> cat_gts;
    for (const auto& g : gts) {
      if (g.category == c) {
        cat_gts.push_back(g);
      }
    }
    for (std::size_t i = 0; i < iou_list.size(); ++i) {
      report.ap[static_cast<std::size_t>(c)][i] = average_precision(cat_props, cat_gts, iou_list[i]);
    }
  }

  report.map_per_iou.assign(iou_list.size(), 0.0);
  for (std::size_t i = 0; i < iou_list.size(); ++i) {
    double sum = 0.0;
    int defined = 0;
    for (int c = 0; c < categories; ++c) {
      const double ap = report.ap[static_cast<std::size_t>(c)][i];
      if (!std::isnan(ap)) {
        sum += ap;
        ++defined;
      }
    }
    report.map_per_iou[i] = defined > 0 ? sum / defined : 0.0;
  }
  report.map_avg = 0.0;
  for (double v : report.map_per_iou) {
    report.map_avg += v;
  }
  if (!report.map_per_iou.empty()) {
    report.map_avg /= static_cast<double>(report.map_per_iou.size());
  }
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  out << "category";
  for (double iou : iou_list) {
    out << "," << iou;
  }
  out << ",Avg\n";
  for (int c = 0; c < categories; ++c) {
    out << "cat" << c;
    double sum = 0.0;
    int defined = 0;
    for (std::size_t i = 0; i < iou_list.size(); ++i) {
      const double v = ap[static_cast<std::size_t>(c)][i];
      if (std::isnan(v)) {
        out << ",";
      } else {
        out << "," << v;
        sum += v;
        ++defined;
      }
    }
    if (defined > 0) {
      out << "," << (sum / defined) << "\n";
    } else {
      out << ",\n";
    }
  }
  out << "mAP";
  for (double v : map_per_iou) {
    out << "," << v;
  }
  out << "," << map_avg << "\n";
  return out.str();
}

double EvalReport::map_over(const std::vector<double>& ious) const {
  double sum = 0.0;
  int count = 0;
  for (double want : ious) {
    for (std::size_t i = 0; i < iou_list.size(); ++i) {
      if (std::abs(iou_list[i] - want) < 1e-9) {
        sum += map_per_iou[i];
        ++count;
        break;
      }
    }
  }
  if (count == 0) {
    throw ContractError("EvalReport::map_over: no matching IoU thresholds");
  }
  return sum / count;
}

VideoInference infer_video(const VideoRecord& video, const ModelParams& params,
                           const DdgHyper& hyper, const GraphFlags& flags,
                           const EvalSettings& settings) {
  Tape tape;
  BoundModel model = bind_model(tape, params);
  VideoForward fwd = forward_video(tape, model, video.rgb, video.flow, hyper, flags);
  Var scores = video_scores(tape, fwd.suppressed, settings.k_ratio);

  VideoInference out;
  out.video_id = video.id;
  out.att_rgb = tape.value(fwd.att_rgb);
  out.att_flow = tape.value(fwd.att_flow);
  out.att_fused = tape.value(fwd.att_fused);
  out.suppressed = tape.value(fwd.suppressed);
  out.video_scores = tape.value(scores).data;
  out.partition = fwd.partition;
  out.subgraphs = fwd.subgraphs;

  auto proposals = generate_proposals(out.att_fused, out.suppressed, out.video_scores,
                                      attention_threshold_list(settings.attention_thresholds),
                                      settings.score_cut, settings.outer_ratio);
  for (auto& p : proposals) {
    p.video_id = video.id;
  }
  out.proposals = nms(std::move(proposals), settings.nms_iou);
  return out;
}

EvalReport evaluate(const Corpus& corpus, bool train_split, const ModelParams& params,
                    const DdgHyper& hyper, const GraphFlags& flags, const EvalSettings& settings) {
  auto videos = corpus.split(train_split);
  std::vector<VideoInference> results(videos.size());

  const int threads = std::max(1, settings.threads);
  if (threads == 1 || videos.size() <= 1) {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      results[i] = infer_video(*videos[i], params, hyper, flags, settings);
    }
  } else {
    std::vector<std::thread> workers;
    std::size_t chunk = (videos.size() + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      const std::size_t lo = static_cast<std::size_t>(w) * chunk;
      const std::size_t hi = std::min(videos.size(), lo + chunk);
      if (lo >= hi) {
        break;
      }
      workers.emplace_back([&, lo, hi]() {
        for (std::size_t i = lo; i < hi; ++i) {
          results[i] = infer_video(*videos[i], params, hyper, flags, settings);
        }
      });
    }
    for (auto& w : workers) {
      w.join();
    }
  }

  std::vector<ActionProposal> proposals;
  std::vector<GtInstance> gts;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    proposals.insert(proposals.end(), results[i].proposals.begin(), results[i].proposals.end());
    for (const auto& seg : videos[i]->segments) {
      gts.push_back(GtInstance{videos[i]->id, seg.start, seg.end, seg.category});
    }
  }
  return build_report(proposals, gts, corpus.spec.categories, settings.iou_list);
}

}  // namespace ddg
