// Copyright 2026 The Footfall Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "footfall/autodiff.hpp"
#include "footfall/error.hpp"

namespace footfall::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  long step = 0;
};

// One bias-corrected Adam update of params in place. Moments are created on
// the first call and must keep matching the parameter shapes afterwards.
template <typename T>
void adam_step(std::vector<Tensor<T>*> params, const std::vector<const Tensor<T>*>& grads, AdamState<T>& state) {
  if (params.size() != grads.size()) throw ContractViolation("adam_step: params and grads differ in count");
  if (state.first_moment.empty()) {
    for (const Tensor<T>* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw ContractViolation("adam_step: state tracks other parameters");
  state.step += 1;
  const auto& c = state.config;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    Tensor<T>& m = state.first_moment[i];
    Tensor<T>& v = state.second_moment[i];
    if (g.shape() != p.shape() || m.shape() != p.shape())
      throw ContractViolation("adam_step: shape mismatch for parameter " + std::to_string(i));
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double gj = g[j];
      const double mj = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
      const double vj = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = c.learning_rate * (mj / correction1) / (std::sqrt(vj / correction2) + c.epsilon);
      p[j] = static_cast<T>(p[j] - update);
    }
  }
}

// Adam over a fixed list of parameter Vars.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, AdamConfig config = {}) : params_(std::move(params)) { state_.config = config; }

  void step() {
    std::vector<Tensor<T>*> values;
    std::vector<const Tensor<T>*> grads;
    for (auto& p : params_) {
      values.push_back(&p.mutable_value());
      grads.push_back(&p.grad());
    }
    adam_step(values, grads, state_);
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  const AdamState<T>& state() const noexcept { return state_; }
  const std::vector<Var<T>>& params() const noexcept { return params_; }

 private:
  std::vector<Var<T>> params_;
  AdamState<T> state_;
};

}  // namespace footfall::ad
