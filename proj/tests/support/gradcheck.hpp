#pragma once

// Central-difference gradient checking for scalar losses built from Ops.

#include <algorithm>
#include <cmath>
#include <functional>

#include "depthstyle/ops.hpp"
#include "depthstyle/rng.hpp"

namespace depthstyle::testing {

template <typename Scalar>
Tensor<Scalar> random_tensor(Index n, Index c, Index h, Index w, std::uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
  Rng rng(seed);
  Tensor<Scalar> t(n, c, h, w);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  return t;
}

struct GradCheckResult {
  double max_rel_error = 0;
  int coords = 0;
};

inline double rel_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares d loss / d x from a Tape against central differences on `coords` random
/// coordinates. `loss(ops, x)` must return a scalar Value.
template <typename Scalar, class Loss>
GradCheckResult check_input_gradient(Loss loss, Tensor<Scalar> x, int coords, double step, std::uint64_t seed) {
  Tape<Scalar> tape;
  auto xv = tape.input(x, true);
  tape.backward(loss(tape, xv));
  const Tensor<Scalar> grad = tape.grad(xv);

  auto eval = [&](const Tensor<Scalar>& at) {
    Eager<Scalar> ops;
    return static_cast<double>(loss(ops, at).item());
  };
  Rng rng(seed);
  GradCheckResult r;
  for (int k = 0; k < coords; ++k) {
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(x.size())));
    const Scalar orig = x.data()[i];
    x.data()[i] = static_cast<Scalar>(orig + step);
    const double up = eval(x);
    x.data()[i] = static_cast<Scalar>(orig - step);
    const double down = eval(x);
    x.data()[i] = orig;
    const double numeric = (up - down) / (2 * step);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(static_cast<double>(grad.data()[i]), numeric));
    ++r.coords;
  }
  return r;
}

/// Same protocol for a parameter tensor: `loss(ops, ref)` receives a ParamRef to `param`.
template <typename Scalar, class Loss>
GradCheckResult check_param_gradient(Loss loss, Tensor<Scalar>& param, int coords, double step, std::uint64_t seed) {
  Tensor<Scalar> grad(param.shape());
  {
    Tape<Scalar> tape;
    tape.backward(loss(tape, ParamRef<Scalar>{&param, &grad}));
  }
  auto eval = [&]() {
    Eager<Scalar> ops;
    return static_cast<double>(loss(ops, ParamRef<Scalar>{&param, nullptr}).item());
  };
  Rng rng(seed);
  GradCheckResult r;
  for (int k = 0; k < coords; ++k) {
    const auto i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(param.size())));
    const Scalar orig = param.data()[i];
    param.data()[i] = static_cast<Scalar>(orig + step);
    const double up = eval();
    param.data()[i] = static_cast<Scalar>(orig - step);
    const double down = eval();
    param.data()[i] = orig;
    const double numeric = (up - down) / (2 * step);
    r.max_rel_error = std::max(r.max_rel_error, rel_error(static_cast<double>(grad.data()[i]), numeric));
    ++r.coords;
  }
  return r;
}

}  // namespace depthstyle::testing
