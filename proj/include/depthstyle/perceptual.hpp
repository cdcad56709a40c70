#pragma once

// Frozen classification backbone and the perceptual losses built on it:
//
//   content(y_hat, x)   = mean over (C_j, H_j, W_j) of (phi_j(y_hat) - phi_j(x))^2
//   G_j(x)[c, c']       = sum_{h,w} phi_j(x)[c,h,w] phi_j(x)[c',h,w] / (C_j H_j W_j)
//   style_j(y_hat, y)   = || G_j(y_hat) - G_j(y) ||_F^2
//   style(y_hat, y)     = sum_{j in J} style_j
//
// Every loss is averaged over the batch dimension.

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "depthstyle/archive.hpp"
#include "depthstyle/params.hpp"
#include "depthstyle/rng.hpp"

namespace depthstyle {

template <class Ops>
using FeatureTaps = std::map<std::string, typename Ops::Value>;

/// Immutable feature backbone. Inputs are unit-range RGB batches; any
/// normalisation the backbone needs happens inside extract().
template <typename Scalar>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual const std::vector<std::string>& tap_names() const = 0;
  virtual FeatureTaps<Eager<Scalar>> extract(Eager<Scalar>& ops, const Tensor<Scalar>& images,
                                             const std::vector<std::string>& taps) const = 0;
  virtual FeatureTaps<Tape<Scalar>> extract(Tape<Scalar>& ops, typename Tape<Scalar>::Var images,
                                            const std::vector<std::string>& taps) const = 0;
  /// Hash of all backbone parameters.
  virtual std::uint64_t checksum() const = 0;

  /// Throws ConfigError unless every name in `taps` is a tap of this backbone.
  void check_taps(const std::vector<std::string>& taps) const {
    const auto& known = tap_names();
    for (const auto& t : taps)
      if (std::find(known.begin(), known.end(), t) == known.end()) throw ConfigError("unknown feature tap '" + t + "'");
  }
};

/// Convenience: eager extraction without naming the policy.
template <typename Scalar>
std::map<std::string, Tensor<Scalar>> extract_features(const FeatureExtractor<Scalar>& ex, const Tensor<Scalar>& images,
                                                       const std::vector<std::string>& taps) {
  Eager<Scalar> ops;
  return ex.extract(ops, images, taps);
}

/// VGG-16 convolutional trunk up to relu4_3 (zero padding, 2x2 max pooling).
/// Parameter keys follow torchvision's "features.<index>.weight|bias" with
/// weights (out,in,3,3) and biases (1,out,1,1). A width divisor > 1 shrinks every
/// layer for seeded stand-in backbones used when real weights are unavailable.
template <typename Scalar>
class Vgg16Features final : public FeatureExtractor<Scalar> {
 public:
  struct Layer {
    enum Kind { Conv, Relu, Pool } kind;
    std::string name;
    Index index;  // position in torchvision's features Sequential
    Index in = 0, out = 0;
  };

  static std::vector<Layer> topology(Index width_divisor) {
    if (width_divisor < 1 || 64 % width_divisor != 0) throw ConfigError("VGG width divisor must divide 64");
    const Index d = width_divisor;
    std::vector<Layer> l;
    Index idx = 0, in = 3;
    const std::vector<std::vector<Index>> blocks{{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}};
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (b > 0) l.push_back({Layer::Pool, "pool" + std::to_string(b), idx++});
      for (std::size_t i = 0; i < blocks[b].size(); ++i) {
        const std::string suffix = std::to_string(b + 1) + "_" + std::to_string(i + 1);
        const Index out = blocks[b][i] / d;
        l.push_back({Layer::Conv, "conv" + suffix, idx++, in, out});
        l.push_back({Layer::Relu, "relu" + suffix, idx++});
        in = out;
      }
    }
    return l;
  }

  static ParamSet<Scalar> layout(Index width_divisor) {
    ParamSet<Scalar> p;
    for (const auto& layer : topology(width_divisor))
      if (layer.kind == Layer::Conv) {
        p.add(key(layer, "weight"), Tensor<Scalar>(layer.out, layer.in, 3, 3));
        p.add(key(layer, "bias"), Tensor<Scalar>(1, layer.out, 1, 1));
      }
    return p;
  }

  Vgg16Features(Index width_divisor, ParamSet<Scalar> params)
      : width_divisor_(width_divisor), layers_(topology(width_divisor)), params_(std::move(params)) {
    for (const auto& layer : layers_)
      if (layer.kind == Layer::Relu) taps_.push_back(layer.name);
  }

  /// Seeded He-normal stand-in with the real tap interface. Biases are zero, so `gain`
  /// (applied to the first layer) scales every tap linearly.
  static std::unique_ptr<Vgg16Features> stub(Index width_divisor, std::uint64_t seed, double gain = 1.0) {
    ParamSet<Scalar> p = layout(width_divisor);
    Rng rng(seed);
    for (auto& e : p) {
      if (!e.name.ends_with(".weight")) continue;
      const auto& s = e.value.shape();
      const double std = (e.name == "features.0.weight" ? gain : 1.0) *
                         std::sqrt(2.0 / static_cast<double>(s[1] * s[2] * s[3]));
      for (Index i = 0; i < e.value.size(); ++i) e.value.data()[i] = static_cast<Scalar>(std * rng.normal());
    }
    return std::make_unique<Vgg16Features>(width_divisor, std::move(p));
  }

  /// Loads converted weights (archive kind "depthstyle.vgg16_features").
  static std::unique_ptr<Vgg16Features> load(const std::filesystem::path& path) {
    const Archive a = Archive::load(path);
    if (a.kind() != "depthstyle.vgg16_features")
      throw FormatError(path.string() + " is a '" + a.kind() + "' archive, expected VGG-16 features");
    const Index d = a.meta().value("width_divisor", Index{1});
    ParamSet<Scalar> p = layout(d);
    a.get_params("", p);
    return std::make_unique<Vgg16Features>(d, std::move(p));
  }

  void save(const std::filesystem::path& path) const {
    Archive a("depthstyle.vgg16_features");
    a.meta()["width_divisor"] = width_divisor_;
    a.put_params("", params_, Dtype::F32);
    a.save(path);
  }

  const std::vector<std::string>& tap_names() const override { return taps_; }
  std::uint64_t checksum() const override { return params_.checksum(); }
  const ParamSet<Scalar>& params() const { return params_; }
  Index width_divisor() const { return width_divisor_; }

  FeatureTaps<Eager<Scalar>> extract(Eager<Scalar>& ops, const Tensor<Scalar>& images,
                                     const std::vector<std::string>& taps) const override {
    return run(ops, images, taps);
  }
  FeatureTaps<Tape<Scalar>> extract(Tape<Scalar>& ops, typename Tape<Scalar>::Var images,
                                    const std::vector<std::string>& taps) const override {
    return run(ops, images, taps);
  }

  /// ImageNet channel statistics applied to unit-range input.
  static constexpr double kMean[3] = {0.485, 0.456, 0.406};
  static constexpr double kStd[3] = {0.229, 0.224, 0.225};

 private:
  static std::string key(const Layer& l, const char* what) {
    return "features." + std::to_string(l.index) + "." + what;
  }

  template <class Ops>
  FeatureTaps<Ops> run(Ops& ops, typename Ops::Value images, const std::vector<std::string>& taps) const {
    this->check_taps(taps);
    FeatureTaps<Ops> out;
    if (taps.empty()) return out;
    if (ops.value(images).channels() != 3) throw ArgumentError("VGG features need 3-channel input");
    std::vector<Scalar> scale(3), shift(3);
    for (int c = 0; c < 3; ++c) {
      scale[c] = static_cast<Scalar>(1.0 / kStd[c]);
      shift[c] = static_cast<Scalar>(-kMean[c] / kStd[c]);
    }
    auto v = ops.channel_affine(images, scale, shift);
    const ParamBinder<Scalar> p(params_);
    std::size_t remaining = taps.size();
    for (const auto& layer : layers_) {
      switch (layer.kind) {
        case Layer::Conv:
          v = ops.conv2d(v, p(key(layer, "weight")), p(key(layer, "bias")), {1, 1, kernels::PadMode::Zero});
          break;
        case Layer::Relu:
          v = ops.relu(v);
          break;
        case Layer::Pool:
          v = ops.max_pool2(v);
          break;
      }
      if (layer.kind == Layer::Relu && std::find(taps.begin(), taps.end(), layer.name) != taps.end()) {
        kernels::check_finite_or_throw(ops.value(v).all_finite(), "feature tap '" + layer.name + "'");
        out.emplace(layer.name, v);
        if (--remaining == 0) break;
      }
    }
    return out;
  }

  Index width_divisor_;
  std::vector<Layer> layers_;
  ParamSet<Scalar> params_;
  std::vector<std::string> taps_;
};

/// Where a backbone's weights come from.
struct BackboneSpec {
  std::string kind = "stub";  // "stub" or "vgg16"
  std::filesystem::path weights;
  std::string sha256;
  std::string url = "https://download.pytorch.org/models/vgg16-397923af.pth";
  Index stub_width_divisor = 8;
  std::uint64_t stub_seed = 16;
  double stub_gain = 1.0;
};

template <typename Scalar>
std::unique_ptr<FeatureExtractor<Scalar>> make_feature_extractor(const BackboneSpec& spec) {
  if (spec.kind == "stub") return Vgg16Features<Scalar>::stub(spec.stub_width_divisor, spec.stub_seed, spec.stub_gain);
  if (spec.kind == "vgg16") {
    verify_asset(spec.weights, spec.sha256,
                 "Download the torchvision VGG-16 checkpoint from " + spec.url +
                     " and convert it with tools/export_weights.py vgg16 <pth> <out.dsa>.");
    return Vgg16Features<Scalar>::load(spec.weights);
  }
  throw ConfigError("unknown backbone kind '" + spec.kind + "' (expected stub|vgg16)");
}

/// Per-image Gram matrices of a (N,C,H,W) activation, returned as (N,1,C,C).
template <typename Scalar>
Tensor<Scalar> gram_matrix(const Tensor<Scalar>& features) {
  return kernels::gram(features);
}

/// Precomputed Gram matrices of the style image, one per style layer, each (1,1,C,C).
template <typename Scalar>
struct StyleTarget {
  std::map<std::string, Tensor<Scalar>> grams;

  static StyleTarget from_image(const FeatureExtractor<Scalar>& ex, const Tensor<Scalar>& style_unit,
                                const std::vector<std::string>& layers) {
    if (style_unit.batch() != 1) throw ArgumentError("style target needs exactly one style image");
    StyleTarget t;
    for (auto& [name, f] : extract_features(ex, style_unit, layers)) t.grams.emplace(name, kernels::gram(f));
    return t;
  }
};

template <class Ops>
typename Ops::Value content_loss_from_features(Ops& ops, const typename Ops::Value& f_yhat,
                                               const typename Ops::Value& f_x) {
  return ops.mean_squared_distance(f_yhat, f_x);
}

/// Squared Frobenius distance between Gram matrices, batch-averaged (target may broadcast).
template <class Ops>
typename Ops::Value style_loss_layer(Ops& ops, const typename Ops::Value& gram_yhat, const typename Ops::Value& gram_y) {
  return ops.batch_mean_squared_frobenius(gram_yhat, gram_y);
}

template <class Ops, typename Scalar = typename Ops::scalar_type>
typename Ops::Value content_loss(Ops& ops, const FeatureExtractor<Scalar>& ex, const typename Ops::Value& y_hat,
                                 const typename Ops::Value& x, const std::string& layer) {
  if (!ops.value(y_hat).same_shape(ops.value(x)))
    throw ArgumentError("content_loss: y_hat " + shape_string(ops.value(y_hat)) + " vs x " +
                        shape_string(ops.value(x)));
  auto fy = ex.extract(ops, y_hat, {layer});
  auto fx = ex.extract(ops, x, {layer});
  return content_loss_from_features(ops, fy.at(layer), fx.at(layer));
}

/// Sum of per-layer style losses over `layers`, given features of y_hat already extracted.
template <class Ops, typename Scalar = typename Ops::scalar_type>
typename Ops::Value style_loss_from_features(Ops& ops, const FeatureTaps<Ops>& f_yhat, const StyleTarget<Scalar>& target,
                                             const std::vector<std::string>& layers) {
  std::vector<typename Ops::Value> terms;
  for (const auto& layer : layers) {
    auto it = target.grams.find(layer);
    if (it == target.grams.end()) throw ConfigError("style target has no Gram matrix for layer '" + layer + "'");
    auto g = ops.gram(f_yhat.at(layer));
    terms.push_back(style_loss_layer(ops, g, ops.constant(it->second)));
  }
  return ops.weighted_sum(terms, std::vector<Scalar>(terms.size(), Scalar(1)));
}

template <class Ops, typename Scalar = typename Ops::scalar_type>
typename Ops::Value style_loss_total(Ops& ops, const FeatureExtractor<Scalar>& ex, const typename Ops::Value& y_hat,
                                     const StyleTarget<Scalar>& target, const std::vector<std::string>& layers) {
  for (const auto& layer : layers)
    if (!target.grams.count(layer)) throw ConfigError("style target has no Gram matrix for layer '" + layer + "'");
  auto f = ex.extract(ops, y_hat, layers);
  return style_loss_from_features(ops, f, target, layers);
}

}  // namespace depthstyle
