#pragma once

// Two interchangeable execution policies with the same member-function surface:
//
//   Eager<Scalar>  evaluates immediately, Value = Tensor<Scalar>.
//   Tape<Scalar>   records a reverse-mode graph, Value = Tape<Scalar>::Var.
//
// Network and loss code is written once as `template <class Ops>` and runs
// under either policy. Parameters enter through ParamRef so gradient buffers
// are owned by the caller rather than the tape.

#include <functional>
#include <utility>
#include <vector>

#include "depthstyle/kernels.hpp"

namespace depthstyle {

template <typename Scalar>
struct ParamRef {
  const Tensor<Scalar>* value = nullptr;
  Tensor<Scalar>* grad = nullptr;  // null for frozen parameters

  const Tensor<Scalar>& operator*() const { return *value; }
};

template <typename Scalar>
ParamRef<Scalar> frozen(const Tensor<Scalar>& t) {
  return {&t, nullptr};
}

template <typename Scalar>
class Eager {
 public:
  using scalar_type = Scalar;
  using Value = Tensor<Scalar>;
  using Param = ParamRef<Scalar>;

  static constexpr bool records_gradients = false;

  Value input(Tensor<Scalar> t, bool = false) { return t; }
  Value constant(Tensor<Scalar> t) { return t; }
  const Tensor<Scalar>& value(const Value& v) const { return v; }

  Value conv2d(const Value& x, Param w, Param b, const kernels::ConvSpec& spec) {
    return kernels::conv2d(x, *w, b.value ? *b : Tensor<Scalar>{}, spec);
  }
  Value conv_transpose2d(const Value& x, Param w, Param b, const kernels::TransposedConvSpec& spec) {
    return kernels::conv_transpose2d(x, *w, b.value ? *b : Tensor<Scalar>{}, spec);
  }
  Value instance_norm(const Value& x, Param gamma, Param beta, Scalar eps) {
    return kernels::instance_norm(x, *gamma, *beta, eps);
  }
  Value relu(Value x) {
    x.flat() = x.flat().cwiseMax(Scalar(0));
    return x;
  }
  Value tanh(Value x) {
    x.flat() = x.flat().array().tanh();
    return x;
  }
  /// a * x + b elementwise.
  Value affine(Value x, Scalar a, Scalar b) {
    x.flat() = (x.flat().array() * a + b).matrix();
    return x;
  }
  Value channel_affine(Value x, const std::vector<Scalar>& scale, const std::vector<Scalar>& shift) {
    check_channel_vectors(x, scale, shift);
    for (Index n = 0; n < x.batch(); ++n)
      for (Index c = 0; c < x.channels(); ++c) {
        const auto ci = static_cast<std::size_t>(c);
        x.instance(n).row(c).array() = x.instance(n).row(c).array() * scale[ci] + shift[ci];
      }
    return x;
  }
  Value add(const Value& a, const Value& b) {
    check_same(a, b, "add");
    Value out = a;
    out.flat() += b.flat();
    return out;
  }
  Value upsample_nearest(const Value& x, Index factor) { return kernels::upsample_nearest(x, factor); }
  Value max_pool2(const Value& x) { return kernels::max_pool2(x); }
  Value resize_bilinear(const Value& x, Index h, Index w) { return kernels::resize_bilinear(x, h, w); }
  Value select_channel(const Value& x, Index c) {
    Value out(x.batch(), 1, x.height(), x.width());
    for (Index n = 0; n < x.batch(); ++n) out.plane(n, 0) = x.plane(n, c);
    return out;
  }
  Value minmax_normalize(Value x, Scalar eps) {
    for (Index n = 0; n < x.batch(); ++n)
      for (Index c = 0; c < x.channels(); ++c) {
        auto p = x.instance(n).row(c).array();
        const Scalar lo = p.minCoeff(), hi = p.maxCoeff();
        p = (p - lo) / (hi - lo + eps);
      }
    return x;
  }
  Value gram(const Value& features) { return kernels::gram(features); }

  /// Mean over every element of (a - b)^2, a scalar.
  Value mean_squared_distance(const Value& a, const Value& b) {
    check_same(a, b, "mean_squared_distance");
    return Value::scalar((a.flat() - b.flat()).squaredNorm() / static_cast<Scalar>(a.size()));
  }
  /// Sum of squared entries of (a - target) divided by a's batch size; target batch 1 broadcasts.
  Value batch_mean_squared_frobenius(const Value& a, const Value& target) {
    check_broadcast(a, target);
    Scalar total = 0;
    for (Index n = 0; n < a.batch(); ++n) {
      const Index tn = target.batch() == 1 ? 0 : n;
      total += (a.instance(n) - target.instance(tn)).squaredNorm();
    }
    return Value::scalar(total / static_cast<Scalar>(a.batch()));
  }
  /// sum_i weights[i] * terms[i] for scalar terms.
  Value weighted_sum(const std::vector<Value>& terms, const std::vector<Scalar>& weights) {
    Scalar total = 0;
    for (std::size_t i = 0; i < terms.size(); ++i) total += weights[i] * terms[i].item();
    return Value::scalar(total);
  }

 protected:
  static void check_same(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
    if (!a.same_shape(b))
      throw ArgumentError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
  static void check_broadcast(const Tensor<Scalar>& a, const Tensor<Scalar>& t) {
    if (a.channels() != t.channels() || a.height() != t.height() || a.width() != t.width() ||
        (t.batch() != 1 && t.batch() != a.batch()))
      throw ArgumentError("shape mismatch " + shape_string(a) + " vs target " + shape_string(t));
  }
  static void check_channel_vectors(const Tensor<Scalar>& x, const std::vector<Scalar>& scale,
                                    const std::vector<Scalar>& shift) {
    if (static_cast<Index>(scale.size()) != x.channels() || static_cast<Index>(shift.size()) != x.channels())
      throw ArgumentError("channel_affine: vector length must equal channel count");
  }
};

/// Reverse-mode recorder. Not copyable; Vars are indices into this tape.
template <typename Scalar>
class Tape {
 public:
  using scalar_type = Scalar;
  using Param = ParamRef<Scalar>;
  static constexpr bool records_gradients = true;

  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
  };
  using Value = Var;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var input(Tensor<Scalar> t, bool requires_grad = false) { return push(std::move(t), requires_grad, {}); }
  Var constant(Tensor<Scalar> t) { return push(std::move(t), false, {}); }

  const Tensor<Scalar>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient of the last backward() root with respect to v (zeros if unreached).
  Tensor<Scalar> grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.empty() ? Tensor<Scalar>(n.shape) : n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  /// Back-propagates from a scalar root. Intermediate values and grads are released as
  /// they are consumed; only leaf gradients survive, so a tape supports one backward().
  void backward(Var root) {
    Node& r = nodes_.at(root.id);
    if (r.value.size() != 1) throw ArgumentError("backward: root must be a scalar");
    r.grad = Tensor<Scalar>::scalar(Scalar(1));
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.back) continue;
      if (!n.grad.empty()) n.back(n.grad);
      n.back = nullptr;
      n.grad = Tensor<Scalar>{};
      n.value = Tensor<Scalar>{};
    }
  }

  Var conv2d(Var x, Param w, Param b, const kernels::ConvSpec& spec) {
    const Tensor<Scalar> no_bias;
    Tensor<Scalar> out = kernels::conv2d(value(x), *w, b.value ? *b : no_bias, spec);
    const bool rg = requires_grad(x) || w.grad || b.grad;
    return push(std::move(out), rg, [this, x, w, b, spec](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx;
      kernels::conv2d_backward(value(x), *w, g, spec, requires_grad(x) ? &gx : nullptr, w.grad, b.grad);
      if (requires_grad(x)) accumulate(x, gx);
    });
  }

  Var conv_transpose2d(Var x, Param w, Param b, const kernels::TransposedConvSpec& spec) {
    const Tensor<Scalar> no_bias;
    Tensor<Scalar> out = kernels::conv_transpose2d(value(x), *w, b.value ? *b : no_bias, spec);
    const bool rg = requires_grad(x) || w.grad || b.grad;
    return push(std::move(out), rg, [this, x, w, b, spec](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx;
      kernels::conv_transpose2d_backward(value(x), *w, g, spec, requires_grad(x) ? &gx : nullptr, w.grad, b.grad);
      if (requires_grad(x)) accumulate(x, gx);
    });
  }

  Var instance_norm(Var x, Param gamma, Param beta, Scalar eps) {
    kernels::InstanceNormCache<Scalar> cache;
    Tensor<Scalar> out = kernels::instance_norm(value(x), *gamma, *beta, eps, &cache);
    const bool rg = requires_grad(x) || gamma.grad || beta.grad;
    return push(std::move(out), rg, [this, x, gamma, beta, cache = std::move(cache)](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx;
      kernels::instance_norm_backward(cache, *gamma, g, requires_grad(x) ? &gx : nullptr, gamma.grad, beta.grad);
      if (requires_grad(x)) accumulate(x, gx);
    });
  }

  Var relu(Var x) {
    Tensor<Scalar> out = value(x);
    out.flat() = out.flat().cwiseMax(Scalar(0));
    return push(std::move(out), requires_grad(x), [this, x](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx = g;
      gx.flat().array() *= (value(x).flat().array() > Scalar(0)).template cast<Scalar>();
      accumulate(x, gx);
    });
  }

  Var tanh(Var x) {
    Tensor<Scalar> out = value(x);
    out.flat() = out.flat().array().tanh();
    const std::size_t self = nodes_.size();
    return push(std::move(out), requires_grad(x), [this, x, self](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx = g;
      gx.flat().array() *= Scalar(1) - nodes_[self].value.flat().array().square();
      accumulate(x, gx);
    });
  }

  Var affine(Var x, Scalar a, Scalar b) {
    Tensor<Scalar> out = value(x);
    out.flat() = (out.flat().array() * a + b).matrix();
    return push(std::move(out), requires_grad(x), [this, x, a](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx = g;
      gx.flat() *= a;
      accumulate(x, gx);
    });
  }

  Var channel_affine(Var x, const std::vector<Scalar>& scale, const std::vector<Scalar>& shift) {
    Eager<Scalar> eager;
    Tensor<Scalar> out = eager.channel_affine(value(x), scale, shift);
    return push(std::move(out), requires_grad(x), [this, x, scale](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx = g;
      for (Index n = 0; n < gx.batch(); ++n)
        for (Index c = 0; c < gx.channels(); ++c) gx.instance(n).row(c) *= scale[static_cast<std::size_t>(c)];
      accumulate(x, gx);
    });
  }

  Var add(Var a, Var b) {
    Eager<Scalar> eager;
    Tensor<Scalar> out = eager.add(value(a), value(b));
    return push(std::move(out), requires_grad(a) || requires_grad(b), [this, a, b](const Tensor<Scalar>& g) {
      if (requires_grad(a)) accumulate(a, g);
      if (requires_grad(b)) accumulate(b, g);
    });
  }

  Var upsample_nearest(Var x, Index factor) {
    Tensor<Scalar> out = kernels::upsample_nearest(value(x), factor);
    return push(std::move(out), requires_grad(x), [this, x, factor](const Tensor<Scalar>& g) {
      accumulate(x, kernels::upsample_nearest_backward(g, factor));
    });
  }

  Var max_pool2(Var x) {
    std::vector<Index> argmax;
    Tensor<Scalar> out = kernels::max_pool2(value(x), &argmax);
    const auto in_shape = value(x).shape();
    return push(std::move(out), requires_grad(x),
                [this, x, in_shape, argmax = std::move(argmax)](const Tensor<Scalar>& g) {
                  accumulate(x, kernels::max_pool2_backward<Scalar>(in_shape, argmax, g));
                });
  }

  Var resize_bilinear(Var x, Index h, Index w) {
    const Index in_h = value(x).height(), in_w = value(x).width();
    Tensor<Scalar> out = kernels::resize_bilinear(value(x), h, w);
    return push(std::move(out), requires_grad(x), [this, x, in_h, in_w](const Tensor<Scalar>& g) {
      accumulate(x, kernels::resize_bilinear_backward(g, in_h, in_w));
    });
  }

  Var select_channel(Var x, Index c) {
    Eager<Scalar> eager;
    Tensor<Scalar> out = eager.select_channel(value(x), c);
    const auto in_shape = value(x).shape();
    return push(std::move(out), requires_grad(x), [this, x, c, in_shape](const Tensor<Scalar>& g) {
      Tensor<Scalar> gx(in_shape);
      for (Index n = 0; n < gx.batch(); ++n) gx.plane(n, c) = g.plane(n, 0);
      accumulate(x, gx);
    });
  }

  Var minmax_normalize(Var x, Scalar eps) {
    Eager<Scalar> eager;
    Tensor<Scalar> out = eager.minmax_normalize(value(x), eps);
    return push(std::move(out), requires_grad(x), [this, x, eps](const Tensor<Scalar>& g) {
      const Tensor<Scalar>& xv = value(x);
      Tensor<Scalar> gx(xv.shape());
      for (Index n = 0; n < xv.batch(); ++n)
        for (Index c = 0; c < xv.channels(); ++c) {
          auto p = xv.instance(n).row(c);
          auto gp = g.instance(n).row(c);
          Index lo_i = 0, hi_i = 0;
          const Scalar lo = p.minCoeff(&lo_i), hi = p.maxCoeff(&hi_i);
          const Scalar d = hi - lo + eps;
          auto dst = gx.instance(n).row(c);
          dst = gp / d;
          const Scalar gsum = gp.sum();
          const Scalar weighted = (gp.array() * (p.array() - lo)).sum();
          dst(hi_i) += -weighted / (d * d);
          dst(lo_i) += -gsum / d + weighted / (d * d);
        }
      accumulate(x, gx);
    });
  }

  Var gram(Var features) {
    Tensor<Scalar> out = kernels::gram(value(features));
    return push(std::move(out), requires_grad(features), [this, features](const Tensor<Scalar>& g) {
      accumulate(features, kernels::gram_backward(value(features), g));
    });
  }

  Var mean_squared_distance(Var a, Var b) {
    Eager<Scalar> eager;
    Tensor<Scalar> out = eager.mean_squared_distance(value(a), value(b));
    return push(std::move(out), requires_grad(a) || requires_grad(b), [this, a, b](const Tensor<Scalar>& g) {
      Tensor<Scalar> d = value(a);
      d.flat() -= value(b).flat();
      d.flat() *= Scalar(2) * g.item() / static_cast<Scalar>(d.size());
      if (requires_grad(a)) accumulate(a, d);
      if (requires_grad(b)) {
        d.flat() = -d.flat();
        accumulate(b, d);
      }
    });
  }

  Var batch_mean_squared_frobenius(Var a, Var target) {
    Eager<Scalar> eager;
    Tensor<Scalar> out = eager.batch_mean_squared_frobenius(value(a), value(target));
    return push(std::move(out), requires_grad(a) || requires_grad(target),
                [this, a, target](const Tensor<Scalar>& g) {
                  const Tensor<Scalar>& av = value(a);
                  const Tensor<Scalar>& tv = value(target);
                  const Scalar k = Scalar(2) * g.item() / static_cast<Scalar>(av.batch());
                  Tensor<Scalar> ga(av.shape());
                  Tensor<Scalar> gt(tv.shape());
                  for (Index n = 0; n < av.batch(); ++n) {
                    const Index tn = tv.batch() == 1 ? 0 : n;
                    ga.instance(n) = k * (av.instance(n) - tv.instance(tn));
                    gt.instance(tn) -= ga.instance(n);
                  }
                  if (requires_grad(a)) accumulate(a, ga);
                  if (requires_grad(target)) accumulate(target, gt);
                });
  }

  Var weighted_sum(const std::vector<Var>& terms, const std::vector<Scalar>& weights) {
    Scalar total = 0;
    bool rg = false;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      total += weights[i] * value(terms[i]).item();
      rg = rg || requires_grad(terms[i]);
    }
    return push(Tensor<Scalar>::scalar(total), rg, [this, terms, weights](const Tensor<Scalar>& g) {
      for (std::size_t i = 0; i < terms.size(); ++i)
        if (requires_grad(terms[i]) && weights[i] != Scalar(0))
          accumulate(terms[i], Tensor<Scalar>::scalar(weights[i] * g.item()));
    });
  }

 private:
  using Backward = std::function<void(const Tensor<Scalar>&)>;

  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    typename Tensor<Scalar>::Shape shape{};
    bool requires_grad = false;
    Backward back;
  };

  Var push(Tensor<Scalar> v, bool requires_grad, Backward back) {
    Node n;
    n.shape = v.shape();
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    if (requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  void accumulate(Var v, const Tensor<Scalar>& g) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) {
      n.grad = g;
    } else {
      n.grad.flat() += g.flat();
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace depthstyle
