#pragma once

// Feed-forward image transformation network: a reflection-padded residual
// encoder/decoder with instance normalisation.
//
//   enc0   9x9 conv, stride 1, 3 -> c0            IN, ReLU
//   enc_i  3x3 conv, stride 2, c_{i-1} -> c_i     IN, ReLU
//   res_r  [3x3 conv, IN, ReLU, 3x3 conv, IN] + identity
//   dec_i  x2 upsample + 3x3 conv (or transposed conv), c_{L-1-i} -> c_{L-2-i}, IN, ReLU
//   out    9x9 conv, c0 -> 3, then 0.5 * tanh(.) + 0.5
//
// Parameter keys: "<layer>.conv.weight" (out,in,k,k; transposed convs store
// in,out,k,k), "<layer>.conv.bias" (1,out,1,1), "<layer>.norm.gamma" and
// "<layer>.norm.beta" (1,C,1,1). Residual blocks use conv1/norm1/conv2/norm2.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthstyle/archive.hpp"
#include "depthstyle/params.hpp"
#include "depthstyle/rng.hpp"

namespace depthstyle {

enum class UpsampleMode { NearestConv, TransposedConv };

struct TransformNetConfig {
  std::vector<Index> downsample_channels{32, 64, 128};
  Index num_residual_blocks = 5;
  kernels::PadMode padding_mode = kernels::PadMode::Reflect;
  UpsampleMode upsample_mode = UpsampleMode::NearestConv;
  double in_epsilon = 1e-5;

  static constexpr Index kOuterKernel = 9;
  static constexpr Index kInnerKernel = 3;
  static constexpr Index kImageChannels = 3;

  void validate() const;
  Index downsample_factor() const { return Index{1} << (downsample_channels.size() - 1); }

  nlohmann::json to_json() const;
  static TransformNetConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TransformNetConfig&, const TransformNetConfig&) = default;
};

std::string to_string(kernels::PadMode m);
std::string to_string(UpsampleMode m);
kernels::PadMode parse_pad_mode(const std::string& s);
UpsampleMode parse_upsample_mode(const std::string& s);

template <typename Scalar>
class TransformNet {
 public:
  TransformNet(TransformNetConfig config, ParamSet<Scalar> params)
      : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    check_params();
  }

  const TransformNetConfig& config() const { return config_; }
  const ParamSet<Scalar>& params() const { return params_; }
  ParamSet<Scalar>& params() { return params_; }

  /// Builds the parameter layout for `config` with IN gamma=1, beta=0 and zero tensors elsewhere.
  static ParamSet<Scalar> layout(const TransformNetConfig& config) {
    config.validate();
    ParamSet<Scalar> p;
    const auto& ch = config.downsample_channels;
    const Index outer = TransformNetConfig::kOuterKernel, inner = TransformNetConfig::kInnerKernel;
    auto conv = [&p](const std::string& name, Index out, Index in, Index k, bool transposed) {
      p.add(name + ".weight", transposed ? Tensor<Scalar>(in, out, k, k) : Tensor<Scalar>(out, in, k, k));
      p.add(name + ".bias", Tensor<Scalar>(1, out, 1, 1));
    };
    auto norm = [&p](const std::string& name, Index c) {
      p.add(name + ".gamma", Tensor<Scalar>::constant(1, c, 1, 1, Scalar(1)));
      p.add(name + ".beta", Tensor<Scalar>(1, c, 1, 1));
    };
    conv("enc0.conv", ch[0], TransformNetConfig::kImageChannels, outer, false);
    norm("enc0.norm", ch[0]);
    for (std::size_t i = 1; i < ch.size(); ++i) {
      conv("enc" + std::to_string(i) + ".conv", ch[i], ch[i - 1], inner, false);
      norm("enc" + std::to_string(i) + ".norm", ch[i]);
    }
    const Index c = ch.back();
    for (Index r = 0; r < config.num_residual_blocks; ++r) {
      const std::string base = "res" + std::to_string(r);
      conv(base + ".conv1", c, c, inner, false);
      norm(base + ".norm1", c);
      conv(base + ".conv2", c, c, inner, false);
      norm(base + ".norm2", c);
    }
    const bool transposed = config.upsample_mode == UpsampleMode::TransposedConv;
    for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
      const Index in = ch[ch.size() - 1 - i], out = ch[ch.size() - 2 - i];
      conv("dec" + std::to_string(i) + ".conv", out, in, inner, transposed);
      norm("dec" + std::to_string(i) + ".norm", out);
    }
    conv("out.conv", TransformNetConfig::kImageChannels, ch[0], outer, false);
    return p;
  }

  /// Maps a unit-range (N,3,H,W) batch to a unit-range stylised batch. H and W must be
  /// multiples of config().downsample_factor(). Gradients go to `grads` when given.
  template <class Ops>
  typename Ops::Value run(Ops& ops, typename Ops::Value x, ParamSet<Scalar>* grads = nullptr) const {
    const ParamBinder<Scalar> p(params_, grads);
    const auto& ch = config_.downsample_channels;
    const Scalar eps = static_cast<Scalar>(config_.in_epsilon);
    const kernels::PadMode pm = config_.padding_mode;
    const Index outer = TransformNetConfig::kOuterKernel, inner = TransformNetConfig::kInnerKernel;

    auto conv_block = [&](typename Ops::Value v, const std::string& name, Index k, Index stride) {
      v = ops.conv2d(v, p(name + ".conv.weight"), p(name + ".conv.bias"), {stride, k / 2, pm});
      v = ops.instance_norm(v, p(name + ".norm.gamma"), p(name + ".norm.beta"), eps);
      v = ops.relu(v);
      ensure_finite(ops, v, name);
      return v;
    };

    auto v = conv_block(x, "enc0", outer, 1);
    for (std::size_t i = 1; i < ch.size(); ++i) v = conv_block(v, "enc" + std::to_string(i), inner, 2);
    for (Index r = 0; r < config_.num_residual_blocks; ++r) {
      const std::string base = "res" + std::to_string(r);
      auto h = ops.conv2d(v, p(base + ".conv1.weight"), p(base + ".conv1.bias"), {1, 1, pm});
      h = ops.instance_norm(h, p(base + ".norm1.gamma"), p(base + ".norm1.beta"), eps);
      h = ops.relu(h);
      h = ops.conv2d(h, p(base + ".conv2.weight"), p(base + ".conv2.bias"), {1, 1, pm});
      h = ops.instance_norm(h, p(base + ".norm2.gamma"), p(base + ".norm2.beta"), eps);
      v = ops.add(v, h);
      ensure_finite(ops, v, base);
    }
    for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
      const std::string base = "dec" + std::to_string(i);
      if (config_.upsample_mode == UpsampleMode::NearestConv) {
        v = ops.upsample_nearest(v, 2);
        v = ops.conv2d(v, p(base + ".conv.weight"), p(base + ".conv.bias"), {1, inner / 2, pm});
      } else {
        v = ops.conv_transpose2d(v, p(base + ".conv.weight"), p(base + ".conv.bias"), {2, 1, 1});
      }
      v = ops.instance_norm(v, p(base + ".norm.gamma"), p(base + ".norm.beta"), eps);
      v = ops.relu(v);
      ensure_finite(ops, v, base);
    }
    v = ops.conv2d(v, p("out.conv.weight"), p("out.conv.bias"), {1, outer / 2, pm});
    v = ops.affine(ops.tanh(v), Scalar(0.5), Scalar(0.5));
    ensure_finite(ops, v, "out");
    return v;
  }

  void save(const std::filesystem::path& path) const {
    Archive a("depthstyle.transform_net");
    a.meta()["config"] = config_.to_json();
    a.put_params("", params_, sizeof(Scalar) == sizeof(float) ? Dtype::F32 : Dtype::F64);
    a.save(path);
  }

  static TransformNet load(const std::filesystem::path& path) {
    const Archive a = Archive::load(path);
    if (a.kind() != "depthstyle.transform_net")
      throw FormatError(path.string() + " holds a '" + a.kind() + "' archive, not a transform net");
    if (!a.meta().contains("config")) throw FormatError("archive has no transform-net config");
    return from_archive(a, "", a.meta().at("config"));
  }

  /// Reads a net whose tensors are stored under `prefix` (checkpoints nest it under "model.").
  static TransformNet from_archive(const Archive& a, const std::string& prefix, const nlohmann::json& config) {
    TransformNetConfig cfg = TransformNetConfig::from_json(config);
    ParamSet<Scalar> params = layout(cfg);
    a.get_params(prefix, params);
    return TransformNet(std::move(cfg), std::move(params));
  }

 private:
  template <class Ops>
  static void ensure_finite(Ops& ops, const typename Ops::Value& v, const std::string& layer) {
    kernels::check_finite_or_throw(ops.value(v).all_finite(), "transform-net layer '" + layer + "'");
  }

  void check_params() const {
    const ParamSet<Scalar> expected = layout(config_);
    if (expected.size() != params_.size()) throw ConfigError("parameter set does not match config");
    for (const auto& e : expected)
      if (!params_.contains(e.name) || !params_.at(e.name).same_shape(e.value))
        throw ConfigError("parameter '" + e.name + "' missing or wrongly shaped");
  }

  TransformNetConfig config_;
  ParamSet<Scalar> params_;
};

/// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for conv weights and biases;
/// IN gamma = 1, beta = 0. Deterministic in (config, seed).
template <typename Scalar>
TransformNet<Scalar> init_transform_net(const TransformNetConfig& config, std::uint64_t seed) {
  ParamSet<Scalar> params = TransformNet<Scalar>::layout(config);
  Rng rng(seed);
  const bool transposed = config.upsample_mode == UpsampleMode::TransposedConv;
  double bound = 0;
  for (auto& e : params) {
    const bool is_weight = e.name.ends_with(".weight");
    const bool is_bias = e.name.ends_with(".bias");
    if (is_weight) {
      const auto& s = e.value.shape();
      const bool tconv = transposed && e.name.starts_with("dec");
      const Index fan_in = (tconv ? s[0] : s[1]) * s[2] * s[3];
      bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    }
    if (is_weight || is_bias)
      for (Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  }
  return TransformNet<Scalar>(config, std::move(params));
}

/// Applies the net to an image of any size >= 16 px per side. Inputs whose sides are not
/// multiples of the downsampling factor are reflection-padded at the bottom/right and the
/// result is cropped back. Grayscale inputs are replicated to three channels. The output
/// has the input's batch size, spatial dims and value range.
template <typename Scalar>
ImageTensor<Scalar> forward(const TransformNet<Scalar>& net, const ImageTensor<Scalar>& x) {
  x.validate(16);
  Tensor<Scalar> unit = x.unit();
  if (unit.channels() == 1) {
    Tensor<Scalar> rgb(unit.batch(), 3, unit.height(), unit.width());
    for (Index n = 0; n < unit.batch(); ++n)
      for (Index c = 0; c < 3; ++c) rgb.plane(n, c) = unit.plane(n, 0);
    unit = std::move(rgb);
  }
  const Index f = net.config().downsample_factor();
  const Index h = unit.height(), w = unit.width();
  const Index ph = (f - h % f) % f, pw = (f - w % f) % f;
  if (ph || pw) unit = kernels::pad_reflect_bottom_right(unit, ph, pw);
  Eager<Scalar> ops;
  Tensor<Scalar> y = net.run(ops, std::move(unit));
  if (ph || pw) y = kernels::crop(y, h, w);
  return ImageTensor<Scalar>::from_unit(std::move(y), x.range);
}

}  // namespace depthstyle
