#include "ddg/gradcheck.hpp"

#include <cmath>

namespace ddg {

Matrix* ParamStore::find(const std::string& name) {
  for (auto& [n, m] : items) {
    if (n == name) {
      return &m;
    }
  }
  return nullptr;
}

const Matrix* ParamStore::find(const std::string& name) const {
  for (const auto& [n, m] : items) {
    if (n == name) {
      return &m;
    }
  }
  return nullptr;
}

Matrix& ParamStore::add(const std::string& name, Matrix value) {
  items.emplace_back(name, std::move(value));
  return items.back().second;
}

FiniteDiffReport finite_diff_check(const LossFn& loss_fn, const ParamStore& params, double eps) {
  ParamStore grads;
  loss_fn(params, &grads);

  FiniteDiffReport report;
  ParamStore probe = params;
  for (std::size_t p = 0; p < params.items.size(); ++p) {
    const std::string& name = params.items[p].first;
    const Matrix* g = grads.find(name);
    Matrix& m = probe.items[p].second;
    for (std::size_t i = 0; i < m.data.size(); ++i) {
      const double saved = m.data[i];
      m.data[i] = saved + eps;
      const double up = loss_fn(probe, nullptr);
      m.data[i] = saved - eps;
      const double down = loss_fn(probe, nullptr);
      m.data[i] = saved;
      const double cd = (up - down) / (2.0 * eps);
      const double analytic = g ? g->data[i] : 0.0;
      const double denom = std::max({std::abs(analytic), std::abs(cd), 1e-8});
      const double rel = std::abs(analytic - cd) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = name;
        report.worst_index = static_cast<int>(i);
        report.worst_analytic = analytic;
        report.worst_central = cd;
      }
    }
  }
  return report;
}

}  // namespace ddg
