#pragma once

// Adam with bias correction:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)

#include <cmath>

#include "depthstyle/params.hpp"

namespace depthstyle {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  ParamSet<Scalar> m;
  ParamSet<Scalar> v;
  std::int64_t t = 0;

  static AdamState like(const ParamSet<Scalar>& params) { return {params.zeros_like(), params.zeros_like(), 0}; }
};

template <typename Scalar>
void adam_step(ParamSet<Scalar>& params, const ParamSet<Scalar>& grads, AdamState<Scalar>& state,
               const AdamOptions& opt) {
  ++state.t;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.t));
  const auto b1 = static_cast<Scalar>(opt.beta1), b2 = static_cast<Scalar>(opt.beta2);
  const auto step = static_cast<Scalar>(opt.learning_rate / c1);
  const auto inv_c2 = static_cast<Scalar>(1.0 / c2), eps = static_cast<Scalar>(opt.epsilon);
  for (auto& e : params) {
    auto g = grads.at(e.name).flat().array();
    auto m = state.m.at(e.name).flat().array();
    auto v = state.v.at(e.name).flat().array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.square();
    e.value.flat().array() -= step * m / ((v * inv_c2).sqrt() + eps);
  }
}

}  // namespace depthstyle
