#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "audiosr/diffgraph/tensor.hpp"

namespace audiosr::dg {

/// A named trainable tensor.
struct Parameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<Parameter>;

inline void zero_grad(ParameterList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamState {
  long step = 0;
  double alpha = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::map<std::string, AdamMoments> moments;  // keyed by parameter name
};

/// One bias-corrected Adam update of every parameter from its .grad.
inline void adam_step(ParameterList& params, AdamState& state) {
  require(state.beta1 >= 0.0 && state.beta1 < 1.0 && state.beta2 >= 0.0 && state.beta2 < 1.0,
          "adam: betas must lie in [0, 1)");
  require(state.eps > 0.0, "adam: eps must be positive");
  for (const auto& p : params) {
    require(p.tensor.grad().defined(), "adam: parameter '" + p.name + "' has no gradient");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& p : params) {
    auto& mom = state.moments[p.name];
    const std::size_t n = p.tensor.numel();
    if (mom.m.size() != n) {
      require(mom.m.empty(), "adam: moment shape mismatch for '" + p.name + "'");
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    auto w = p.tensor.mutable_data();
    const auto g = p.tensor.grad().data();
    for (std::size_t i = 0; i < n; ++i) {
      mom.m[i] = state.beta1 * mom.m[i] + (1.0 - state.beta1) * g[i];
      mom.v[i] = state.beta2 * mom.v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      w[i] -= state.alpha * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace audiosr::dg
