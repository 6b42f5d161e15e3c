#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ddg/matrix.hpp"

namespace ddg {

class Tape;

// Handle to a node owned by a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode differentiation tape. A tape records one forward
// pass; backward() runs once and accumulates gradients into every node.
// Rebuilt per forward pass (the graph topology changes per video).
//
// Single-threaded per tape; distinct tapes may run concurrently on disjoint
// data.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var constant(Matrix value);
  Var scalar(double value);  // 1x1 constant
  Var param(const std::string& name, const Matrix& value);

  // Elementwise / scalar ops.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var sigmoid(Var a);
  Var leaky_relu(Var a, double slope);
  Var exp(Var a);
  // w(x) = exp(-(1/x - 1)/tau), elementwise; requires entries in (0, 1].
  Var fc_weight(Var a, double tau);

  // Linear algebra.
  Var matmul(Var a, Var b);
  // out[i][j] = a[i][j] * v[0][j]; v is 1 x cols(a).
  Var mul_rowvec(Var a, Var v);

  // Structure.
  Var vconcat(Var top, Var bottom);                  // stack rows
  Var concat_cols(const std::vector<Var>& parts);    // stack columns
  Var gather_cols(Var a, const std::vector<int>& idx);

  // Reductions.
  Var sum(Var a);                      // 1x1
  Var col_norms(Var a);                // 1 x cols, euclidean norm per column
  Var topk_mean_rows(Var a, int k);    // rows x 1, mean of k largest per row
  Var log_softmax_vec(Var a);          // a is n x 1

  // Temporal convolution over a D_in x T input. weight is D_out x (D_in*span),
  // bias is D_out x 1, span odd; zero padding preserves T.
  Var conv1d(Var x, Var weight, Var bias, int span);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;  // valid after backward()

  // Reverse pass from a scalar (1x1) loss. May be called once per tape.
  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  const std::vector<std::pair<std::string, Var>>& params() const { return params_; }

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;  // null for leaves
  };

  Var push(Matrix value, std::function<void(Tape&)> back, const char* op);
  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, Var>> params_;
  bool backward_done_ = false;
};

}  // namespace ddg
