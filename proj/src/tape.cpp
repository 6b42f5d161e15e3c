#include "ddg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ddg {

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
  }
}

double stable_sigmoid(double x) {
  const double z = std::clamp(x, -500.0, 500.0);
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
  }
  // Outputs must stay strictly inside (0, 1): downstream weights divide by
  // the attention value and by its complement.
  return std::clamp(s, 1e-12, 1.0 - 1e-12);
}

}  // namespace

Var Tape::push(Matrix value, std::function<void(Tape&)> back, const char* op) {
  if (!value.is_finite()) {
    throw NumericError(std::string(op) + ": non-finite result");
  }
  Node n;
  n.grad = Matrix(value.rows, value.cols, 0.0);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr, "constant"); }

Var Tape::scalar(double value) { return constant(Matrix(1, 1, value)); }

Var Tape::param(const std::string& name, const Matrix& value) {
  Var v = push(value, nullptr, "param");
  params_.emplace_back(name, v);
  return v;
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::grad(Var v) const { return node(v).grad; }

void Tape::backward(Var loss) {
  if (backward_done_) {
    throw ContractError("backward: tape already differentiated");
  }
  const Matrix& lv = value(loss);
  if (lv.rows != 1 || lv.cols != 1) {
    throw ContractError("backward: loss must be 1x1, got " + shape_str(lv));
  }
  node(loss).grad.at(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.back) {
      n.back(*this);
    }
  }
  backward_done_ = true;
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Matrix out = value(a);
  const Matrix& bv = value(b);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] += bv.data[i];
  }
  Var self = push(std::move(out), nullptr, "add");
  node(self).back = [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(a).grad;
    Matrix& gb = t.node(b).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] += g.data[i];
    }
  };
  return self;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  Matrix out = value(a);
  const Matrix& bv = value(b);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] -= bv.data[i];
  }
  Var self = push(std::move(out), nullptr, "sub");
  node(self).back = [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(a).grad;
    Matrix& gb = t.node(b).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i];
      gb.data[i] -= g.data[i];
    }
  };
  return self;
}

Var Tape::hadamard(Var a, Var b) {
  check_same_shape(value(a), value(b), "hadamard");
  Matrix out = value(a);
  const Matrix& bv = value(b);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] *= bv.data[i];
  }
  Var self = push(std::move(out), nullptr, "hadamard");
  node(self).back = [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av = t.node(a).value;
    const Matrix& bv2 = t.node(b).value;
    Matrix& ga = t.node(a).grad;
    Matrix& gb = t.node(b).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * bv2.data[i];
      gb.data[i] += g.data[i] * av.data[i];
    }
  };
  return self;
}

Var Tape::scale(Var a, double c) {
  Matrix out = value(a);
  for (double& v : out.data) {
    v *= c;
  }
  Var self = push(std::move(out), nullptr, "scale");
  node(self).back = [a, c, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(a).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += c * g.data[i];
    }
  };
  return self;
}

Var Tape::add_const(Var a, double c) {
  Matrix out = value(a);
  for (double& v : out.data) {
    v += c;
  }
  Var self = push(std::move(out), nullptr, "add_const");
  node(self).back = [a, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(a).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i];
    }
  };
  return self;
}

Var Tape::sigmoid(Var a) {
  Matrix out = value(a);
  for (double& v : out.data) {
    v = stable_sigmoid(v);
  }
  Var self = push(std::move(out), nullptr, "sigmoid");
  node(self).back = [a, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& s = t.node(self).value;
    Matrix& ga = t.node(a).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * s.data[i] * (1.0 - s.data[i]);
    }
  };
  return self;
}

Var Tape::leaky_relu(Var a, double slope) {
  Matrix out = value(a);
  for (double& v : out.data) {
    if (v < 0.0) {
      v *= slope;
    }
  }
  Var self = push(std::move(out), nullptr, "leaky_relu");
  node(self).back = [a, slope, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& x = t.node(a).value;
    Matrix& ga = t.node(a).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * (x.data[i] > 0.0 ? 1.0 : slope);
    }
  };
  return self;
}

Var Tape::exp(Var a) {
  Matrix out = value(a);
  for (double& v : out.data) {
    v = std::exp(v);
  }
  Var self = push(std::move(out), nullptr, "exp");
  node(self).back = [a, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& e = t.node(self).value;
    Matrix& ga = t.node(a).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * e.data[i];
    }
  };
  return self;
}

Var Tape::fc_weight(Var a, double tau) {
  if (tau <= 0.0) {
    throw DomainError("fc_weight: tau must be positive");
  }
  const Matrix& av = value(a);
  Matrix out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.data.size(); ++i) {
    const double x = av.data[i];
    if (x <= 0.0) {
      throw DomainError("fc_weight: argument " + std::to_string(x) + " outside (0, 1]");
    }
    out.data[i] = std::exp(-(1.0 / x - 1.0) / tau);
  }
  Var self = push(std::move(out), nullptr, "fc_weight");
  node(self).back = [a, tau, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& x = t.node(a).value;
    const Matrix& w = t.node(self).value;
    Matrix& ga = t.node(a).grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] * w.data[i] / (tau * x.data[i] * x.data[i]);
    }
  };
  return self;
}

Var Tape::matmul(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  Matrix out = ddg::matmul(av, bv);
  Var self = push(std::move(out), nullptr, "matmul");
  node(self).back = [a, b, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av2 = t.node(a).value;
    const Matrix& bv2 = t.node(b).value;
    Matrix& ga = t.node(a).grad;
    Matrix& gb = t.node(b).grad;
    // dA += G * B^T
    for (int i = 0; i < ga.rows; ++i) {
      for (int k = 0; k < ga.cols; ++k) {
        double s = 0.0;
        for (int j = 0; j < g.cols; ++j) {
          s += g.at(i, j) * bv2.at(k, j);
        }
        ga.at(i, k) += s;
      }
    }
    // dB += A^T * G
    for (int k = 0; k < gb.rows; ++k) {
      for (int j = 0; j < gb.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < av2.rows; ++i) {
          s += av2.at(i, k) * g.at(i, j);
        }
        gb.at(k, j) += s;
      }
    }
  };
  return self;
}

Var Tape::mul_rowvec(Var a, Var v) {
  const Matrix& av = value(a);
  const Matrix& vv = value(v);
  if (vv.rows != 1 || vv.cols != av.cols) {
    throw ShapeError("mul_rowvec: " + shape_str(av) + " by " + shape_str(vv));
  }
  Matrix out = av;
  for (int i = 0; i < out.rows; ++i) {
    for (int j = 0; j < out.cols; ++j) {
      out.at(i, j) *= vv.at(0, j);
    }
  }
  Var self = push(std::move(out), nullptr, "mul_rowvec");
  node(self).back = [a, v, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av2 = t.node(a).value;
    const Matrix& vv2 = t.node(v).value;
    Matrix& ga = t.node(a).grad;
    Matrix& gv = t.node(v).grad;
    for (int i = 0; i < g.rows; ++i) {
      for (int j = 0; j < g.cols; ++j) {
        ga.at(i, j) += g.at(i, j) * vv2.at(0, j);
        gv.at(0, j) += g.at(i, j) * av2.at(i, j);
      }
    }
  };
  return self;
}

Var Tape::vconcat(Var top, Var bottom) {
  const Matrix& tv = value(top);
  const Matrix& bv = value(bottom);
  if (tv.cols != bv.cols) {
    throw ShapeError("vconcat: " + shape_str(tv) + " over " + shape_str(bv));
  }
  const int top_rows = tv.rows;
  Matrix out(tv.rows + bv.rows, tv.cols);
  std::copy(tv.data.begin(), tv.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + tv.data.size());
  Var self = push(std::move(out), nullptr, "vconcat");
  node(self).back = [top, bottom, top_rows, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix& gt = t.node(top).grad;
    Matrix& gb = t.node(bottom).grad;
    const std::size_t split = static_cast<std::size_t>(top_rows) * g.cols;
    for (std::size_t i = 0; i < split; ++i) {
      gt.data[i] += g.data[i];
    }
    for (std::size_t i = split; i < g.data.size(); ++i) {
      gb.data[i - split] += g.data[i];
    }
  };
  return self;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) {
    throw ContractError("concat_cols: no parts");
  }
  const int rows = value(parts[0]).rows;
  int total = 0;
  for (Var p : parts) {
    if (value(p).rows != rows) {
      throw ShapeError("concat_cols: row mismatch");
    }
    total += value(p).cols;
  }
  Matrix out(rows, total);
  int off = 0;
  for (Var p : parts) {
    const Matrix& pv = value(p);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < pv.cols; ++j) {
        out.at(i, off + j) = pv.at(i, j);
      }
    }
    off += pv.cols;
  }
  Var self = push(std::move(out), nullptr, "concat_cols");
  auto parts_copy = parts;
  node(self).back = [parts_copy, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    int off2 = 0;
    for (Var p : parts_copy) {
      Matrix& gp = t.node(p).grad;
      for (int i = 0; i < gp.rows; ++i) {
        for (int j = 0; j < gp.cols; ++j) {
          gp.at(i, j) += g.at(i, off2 + j);
        }
      }
      off2 += gp.cols;
    }
  };
  return self;
}

Var Tape::gather_cols(Var a, const std::vector<int>& idx) {
  const Matrix& av = value(a);
  for (int j : idx) {
    if (j < 0 || j >= av.cols) {
      throw ShapeError("gather_cols: index " + std::to_string(j) + " out of " + shape_str(av));
    }
  }
  Matrix out(av.rows, static_cast<int>(idx.size()));
  for (int i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.at(i, static_cast<int>(j)) = av.at(i, idx[j]);
    }
  }
  Var self = push(std::move(out), nullptr, "gather_cols");
  node(self).back = [a, idx, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(a).grad;
    for (int i = 0; i < g.rows; ++i) {
      for (std::size_t j = 0; j < idx.size(); ++j) {
        ga.at(i, idx[j]) += g.at(i, static_cast<int>(j));
      }
    }
  };
  return self;
}

Var Tape::sum(Var a) {
  const Matrix& av = value(a);
  double s = std::accumulate(av.data.begin(), av.data.end(), 0.0);
  Var self = push(Matrix(1, 1, s), nullptr, "sum");
  node(self).back = [a, self](Tape& t) {
    const double g = t.node(self).grad.at(0, 0);
    Matrix& ga = t.node(a).grad;
    for (double& v : ga.data) {
      v += g;
    }
  };
  return self;
}

Var Tape::col_norms(Var a) {
  const Matrix& av = value(a);
  Matrix out(1, av.cols, 0.0);
  for (int j = 0; j < av.cols; ++j) {
    double s = 0.0;
    for (int i = 0; i < av.rows; ++i) {
      s += av.at(i, j) * av.at(i, j);
    }
    out.at(0, j) = std::sqrt(s);
  }
  Var self = push(std::move(out), nullptr, "col_norms");
  node(self).back = [a, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& av2 = t.node(a).value;
    const Matrix& n = t.node(self).value;
    Matrix& ga = t.node(a).grad;
    for (int j = 0; j < av2.cols; ++j) {
      const double nj = n.at(0, j);
      if (nj == 0.0) {
        continue;  // subgradient 0 at the kink
      }
      const double gj = g.at(0, j) / nj;
      for (int i = 0; i < av2.rows; ++i) {
        ga.at(i, j) += gj * av2.at(i, j);
      }
    }
  };
  return self;
}

Var Tape::topk_mean_rows(Var a, int k) {
  const Matrix& av = value(a);
  if (k < 1 || k > av.cols) {
    throw ContractError("topk_mean_rows: k=" + std::to_string(k) + " for " + shape_str(av));
  }
  // Selection is fixed at forward time; gradient flows only into the
  // selected entries.
  std::vector<int> chosen(static_cast<std::size_t>(av.rows) * k);
  Matrix out(av.rows, 1, 0.0);
  std::vector<int> order(static_cast<std::size_t>(av.cols));
  for (int i = 0; i < av.rows; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return av.at(i, x) > av.at(i, y);
    });
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      chosen[static_cast<std::size_t>(i) * k + j] = order[static_cast<std::size_t>(j)];
      s += av.at(i, order[static_cast<std::size_t>(j)]);
    }
    out.at(i, 0) = s / k;
  }
  Var self = push(std::move(out), nullptr, "topk_mean_rows");
  node(self).back = [a, k, chosen, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    Matrix& ga = t.node(a).grad;
    for (int i = 0; i < ga.rows; ++i) {
      const double gi = g.at(i, 0) / k;
      for (int j = 0; j < k; ++j) {
        ga.at(i, chosen[static_cast<std::size_t>(i) * k + j]) += gi;
      }
    }
  };
  return self;
}

Var Tape::log_softmax_vec(Var a) {
  const Matrix& av = value(a);
  if (av.cols != 1) {
    throw ShapeError("log_softmax_vec: expected n x 1, got " + shape_str(av));
  }
  const double mx = *std::max_element(av.data.begin(), av.data.end());
  double lse = 0.0;
  for (double v : av.data) {
    lse += std::exp(v - mx);
  }
  lse = mx + std::log(lse);
  Matrix out = av;
  for (double& v : out.data) {
    v -= lse;
  }
  Var self = push(std::move(out), nullptr, "log_softmax_vec");
  node(self).back = [a, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& ls = t.node(self).value;
    Matrix& ga = t.node(a).grad;
    double gsum = 0.0;
    for (double v : g.data) {
      gsum += v;
    }
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      ga.data[i] += g.data[i] - std::exp(ls.data[i]) * gsum;
    }
  };
  return self;
}

Var Tape::conv1d(Var x, Var weight, Var bias, int span) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(weight);
  const Matrix& bv = value(bias);
  if (span < 1 || span % 2 == 0) {
    throw ContractError("conv1d: span must be odd and positive");
  }
  const int din = xv.rows;
  const int T = xv.cols;
  const int dout = wv.rows;
  if (wv.cols != din * span) {
    throw ShapeError("conv1d: weight " + shape_str(wv) + " incompatible with input " +
                     shape_str(xv) + " span " + std::to_string(span));
  }
  if (bv.rows != dout || bv.cols != 1) {
    throw ShapeError("conv1d: bias " + shape_str(bv) + " for " + std::to_string(dout) +
                     " output channels");
  }
  const int pad = (span - 1) / 2;
  Matrix out(dout, T);
  for (int o = 0; o < dout; ++o) {
    for (int t = 0; t < T; ++t) {
      double acc = bv.at(o, 0);
      for (int i = 0; i < din; ++i) {
        for (int kk = 0; kk < span; ++kk) {
          const int tt = t + kk - pad;
          if (tt < 0 || tt >= T) {
            continue;
          }
          acc += wv.at(o, i * span + kk) * xv.at(i, tt);
        }
      }
      out.at(o, t) = acc;
    }
  }
  Var self = push(std::move(out), nullptr, "conv1d");
  node(self).back = [x, weight, bias, span, pad, self](Tape& t) {
    const Matrix& g = t.node(self).grad;
    const Matrix& xv2 = t.node(x).value;
    const Matrix& wv2 = t.node(weight).value;
    Matrix& gx = t.node(x).grad;
    Matrix& gw = t.node(weight).grad;
    Matrix& gb = t.node(bias).grad;
    const int din = xv2.rows;
    const int T = xv2.cols;
    const int dout = wv2.rows;
    for (int o = 0; o < dout; ++o) {
      double bsum = 0.0;
      for (int tt = 0; tt < T; ++tt) {
        bsum += g.at(o, tt);
      }
      gb.at(o, 0) += bsum;
      for (int tt = 0; tt < T; ++tt) {
        const double go = g.at(o, tt);
        if (go == 0.0) {
          continue;
        }
        for (int i = 0; i < din; ++i) {
          for (int kk = 0; kk < span; ++kk) {
            const int src = tt + kk - pad;
            if (src < 0 || src >= T) {
              continue;
            }
            gw.at(o, i * span + kk) += go * xv2.at(i, src);
            gx.at(i, src) += go * wv2.at(o, i * span + kk);
          }
        }
      }
    }
  };
  return self;
}

}  // namespace ddg
