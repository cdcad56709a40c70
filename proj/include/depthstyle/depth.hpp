#pragma once

// Frozen monocular depth backends and the depth reconstruction loss
//
//   depth(y_hat, x) = mean over (H, W) of (phi(y_hat) - phi(x))^2, batch-averaged,
//
// where phi returns a single-channel relative inverse-depth map at the input's
// spatial size. Raw responses are compared unless per-image min-max
// normalisation is requested.

#include <filesystem>
#include <memory>
#include <string>

#include "depthstyle/archive.hpp"
#include "depthstyle/params.hpp"
#include "depthstyle/rng.hpp"

namespace depthstyle {

template <typename Scalar>
class DepthEstimator {
 public:
  virtual ~DepthEstimator() = default;

  virtual std::string name() const = 0;
  /// (N,3,H,W) unit-range images -> (N,1,H,W) maps.
  virtual Tensor<Scalar> estimate(Eager<Scalar>& ops, const Tensor<Scalar>& images) const = 0;
  virtual typename Tape<Scalar>::Var estimate(Tape<Scalar>& ops, typename Tape<Scalar>::Var images) const = 0;
  virtual std::uint64_t checksum() const = 0;
};

template <typename Scalar>
Tensor<Scalar> estimate_depth(const DepthEstimator<Scalar>& est, const Tensor<Scalar>& images) {
  Eager<Scalar> ops;
  return est.estimate(ops, images);
}

/// Returns channel 0 of its input. A parameter-free stand-in for tests.
template <typename Scalar>
class ChannelDepth final : public DepthEstimator<Scalar> {
 public:
  std::string name() const override { return "channel"; }
  Tensor<Scalar> estimate(Eager<Scalar>& ops, const Tensor<Scalar>& images) const override {
    return ops.select_channel(images, 0);
  }
  typename Tape<Scalar>::Var estimate(Tape<Scalar>& ops, typename Tape<Scalar>::Var images) const override {
    return ops.select_channel(images, 0);
  }
  std::uint64_t checksum() const override { return 0; }
};

struct DepthNetConfig {
  Index native_size = 128;
  std::vector<Index> widths{16, 32, 64};
  double output_scale = 1.0;

  nlohmann::json to_json() const {
    return {{"native_size", native_size}, {"widths", widths}, {"output_scale", output_scale}};
  }
  static DepthNetConfig from_json(const nlohmann::json& j) {
    DepthNetConfig c;
    c.native_size = j.at("native_size").get<Index>();
    c.widths = j.at("widths").get<std::vector<Index>>();
    c.output_scale = j.at("output_scale").get<double>();
    c.validate();
    return c;
  }
  void validate() const {
    if (widths.empty()) throw ConfigError("depth net needs at least one width");
    const Index f = Index{1} << widths.size();
    if (native_size < f || native_size % f != 0)
      throw ConfigError("depth net native_size must be a positive multiple of " + std::to_string(f));
  }
};

/// Compact encoder/decoder emitting non-negative inverse depth:
///
///   resize to native_size^2, ImageNet normalisation
///   enc_i: 3x3 conv stride 2 + ReLU                  (3 -> w0 -> ... -> w_{L-1})
///   mid:   3x3 conv + ReLU                           (w_{L-1})
///   dec_i: x2 nearest upsample, 3x3 conv + ReLU      (w_{L-1-i} -> w_{L-2-i}, last keeps w0)
///   head:  3x3 conv -> 1 channel, ReLU, * output_scale
///   resize back to the input size
///
/// Keys "enc<i>|mid|dec<i>|head.weight|bias". Weights come from an archive of kind
/// "depthstyle.depth_net" or from a seeded stand-in.
template <typename Scalar>
class ConvDepthNet final : public DepthEstimator<Scalar> {
 public:
  ConvDepthNet(DepthNetConfig config, ParamSet<Scalar> params) : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
  }

  static ParamSet<Scalar> layout(const DepthNetConfig& c) {
    c.validate();
    ParamSet<Scalar> p;
    auto conv = [&p](const std::string& name, Index out, Index in) {
      p.add(name + ".weight", Tensor<Scalar>(out, in, 3, 3));
      p.add(name + ".bias", Tensor<Scalar>(1, out, 1, 1));
    };
    const auto& w = c.widths;
    Index in = 3;
    for (std::size_t i = 0; i < w.size(); ++i) {
      conv("enc" + std::to_string(i), w[i], in);
      in = w[i];
    }
    conv("mid", in, in);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const Index out = i + 1 < w.size() ? w[w.size() - 2 - i] : w[0];
      conv("dec" + std::to_string(i), out, in);
      in = out;
    }
    conv("head", 1, in);
    return p;
  }

  /// He-normal weights; the head bias is positive so the ReLU output starts alive.
  static std::unique_ptr<ConvDepthNet> stub(const DepthNetConfig& c, std::uint64_t seed) {
    ParamSet<Scalar> p = layout(c);
    Rng rng(seed);
    for (auto& e : p) {
      if (!e.name.ends_with(".weight")) continue;
      const auto& s = e.value.shape();
      const double std = std::sqrt(2.0 / static_cast<double>(s[1] * s[2] * s[3]));
      for (Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = static_cast<Scalar>(std * rng.normal());
    }
    p.at("head.bias").flat().setConstant(Scalar(1));
    return std::make_unique<ConvDepthNet>(c, std::move(p));
  }

  static std::unique_ptr<ConvDepthNet> load(const std::filesystem::path& path) {
    const Archive a = Archive::load(path);
    if (a.kind() != "depthstyle.depth_net")
      throw FormatError(path.string() + " is a '" + a.kind() + "' archive, expected a depth net");
    DepthNetConfig c = DepthNetConfig::from_json(a.meta().at("config"));
    ParamSet<Scalar> p = layout(c);
    a.get_params("", p);
    return std::make_unique<ConvDepthNet>(std::move(c), std::move(p));
  }

  void save(const std::filesystem::path& path) const {
    Archive a("depthstyle.depth_net");
    a.meta()["config"] = config_.to_json();
    a.put_params("", params_, Dtype::F32);
    a.save(path);
  }

  std::string name() const override { return "convnet"; }
  const DepthNetConfig& config() const { return config_; }
  const ParamSet<Scalar>& params() const { return params_; }
  std::uint64_t checksum() const override { return params_.checksum(); }

  Tensor<Scalar> estimate(Eager<Scalar>& ops, const Tensor<Scalar>& images) const override {
    return run(ops, images);
  }
  typename Tape<Scalar>::Var estimate(Tape<Scalar>& ops, typename Tape<Scalar>::Var images) const override {
    return run(ops, images);
  }

 private:
  template <class Ops>
  typename Ops::Value run(Ops& ops, typename Ops::Value images) const {
    const Tensor<Scalar>& in = ops.value(images);
    if (in.channels() != 3) throw ArgumentError("depth estimator needs 3-channel input");
    const Index h = in.height(), w = in.width();
    const ParamBinder<Scalar> p(params_);
    auto conv = [&](typename Ops::Value v, const std::string& name, Index stride) {
      return ops.conv2d(v, p(name + ".weight"), p(name + ".bias"), {stride, 1, kernels::PadMode::Zero});
    };
    std::vector<Scalar> scale(3), shift(3);
    const double mean[3] = {0.485, 0.456, 0.406}, stdv[3] = {0.229, 0.224, 0.225};
    for (int c = 0; c < 3; ++c) {
      scale[c] = static_cast<Scalar>(1.0 / stdv[c]);
      shift[c] = static_cast<Scalar>(-mean[c] / stdv[c]);
    }
    auto v = ops.resize_bilinear(images, config_.native_size, config_.native_size);
    v = ops.channel_affine(v, scale, shift);
    const std::size_t levels = config_.widths.size();
    for (std::size_t i = 0; i < levels; ++i) v = ops.relu(conv(v, "enc" + std::to_string(i), 2));
    v = ops.relu(conv(v, "mid", 1));
    for (std::size_t i = 0; i < levels; ++i) {
      v = ops.upsample_nearest(v, 2);
      v = ops.relu(conv(v, "dec" + std::to_string(i), 1));
    }
    v = ops.relu(conv(v, "head", 1));
    v = ops.affine(v, static_cast<Scalar>(config_.output_scale), Scalar(0));
    v = ops.resize_bilinear(v, h, w);
    kernels::check_finite_or_throw(ops.value(v).all_finite(), "depth estimator output");
    return v;
  }

  DepthNetConfig config_;
  ParamSet<Scalar> params_;
};

/// Where a depth backend comes from.
struct DepthSpec {
  std::string backend = "stub-convnet";  // "stub-convnet", "convnet" or "channel"
  std::filesystem::path weights;
  std::string sha256;
  std::string url;
  DepthNetConfig stub_config{};
  std::uint64_t stub_seed = 21;
};

template <typename Scalar>
std::unique_ptr<DepthEstimator<Scalar>> make_depth_estimator(const DepthSpec& spec) {
  if (spec.backend == "channel") return std::make_unique<ChannelDepth<Scalar>>();
  if (spec.backend == "stub-convnet") return ConvDepthNet<Scalar>::stub(spec.stub_config, spec.stub_seed);
  if (spec.backend == "convnet") {
    verify_asset(spec.weights, spec.sha256,
                 "Provide a depth network exported to the depthstyle archive format" +
                     (spec.url.empty() ? std::string(".") : " (source: " + spec.url + ").") +
                     " See docs/assets.md.");
    return ConvDepthNet<Scalar>::load(spec.weights);
  }
  throw ConfigError("unknown depth backend '" + spec.backend + "' (expected stub-convnet|convnet|channel)");
}

template <class Ops>
typename Ops::Value depth_loss_from_maps(Ops& ops, typename Ops::Value d_yhat, typename Ops::Value d_x,
                                         bool minmax_normalize) {
  using Scalar = typename Ops::scalar_type;
  if (minmax_normalize) {
    d_yhat = ops.minmax_normalize(d_yhat, Scalar(1e-8));
    d_x = ops.minmax_normalize(d_x, Scalar(1e-8));
  }
  return ops.mean_squared_distance(d_yhat, d_x);
}

template <class Ops, typename Scalar = typename Ops::scalar_type>
typename Ops::Value depth_loss(Ops& ops, const DepthEstimator<Scalar>& est, const typename Ops::Value& y_hat,
                               const typename Ops::Value& x, bool minmax_normalize = false) {
  if (!ops.value(y_hat).same_shape(ops.value(x)))
    throw ArgumentError("depth_loss: y_hat " + shape_string(ops.value(y_hat)) + " vs x " +
                        shape_string(ops.value(x)));
  return depth_loss_from_maps(ops, est.estimate(ops, y_hat), est.estimate(ops, x), minmax_normalize);
}

}  // namespace depthstyle
