#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ddg/matrix.hpp"

namespace ddg {

// Ordered set of named parameter matrices. Order is the canonical
// serialization / reporting order.
struct ParamStore {
  std::vector<std::pair<std::string, Matrix>> items;

  Matrix* find(const std::string& name);
  const Matrix* find(const std::string& name) const;
  Matrix& add(const std::string& name, Matrix value);
};

// Evaluates the loss at the given parameters. When `grads` is non-null the
// callee also fills one gradient matrix per parameter (same names/shapes).
using LossFn = std::function<double(const ParamStore& params, ParamStore* grads)>;

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_central = 0.0;
};

// Central-difference check of the analytic gradient:
//   rel = |analytic - cd| / max(|analytic|, |cd|, 1e-8)
// Reports the max over every entry of every parameter; never throws on
// disagreement.
FiniteDiffReport finite_diff_check(const LossFn& loss_fn, const ParamStore& params, double eps);

}  // namespace ddg
