#include "depthstyle/transform_net.hpp"

namespace depthstyle {

void TransformNetConfig::validate() const {
  if (downsample_channels.empty()) throw ConfigError("downsample_channels must not be empty");
  for (std::size_t i = 0; i < downsample_channels.size(); ++i) {
    if (downsample_channels[i] < 1) throw ConfigError("downsample_channels entries must be positive");
    if (i > 0 && downsample_channels[i] <= downsample_channels[i - 1])
      throw ConfigError("downsample_channels must be strictly increasing");
  }
  if (num_residual_blocks < 1) throw ConfigError("num_residual_blocks must be at least 1");
  if (!(in_epsilon > 0)) throw ConfigError("in_epsilon must be positive");
}

std::string to_string(kernels::PadMode m) { return m == kernels::PadMode::Reflect ? "reflect" : "zero"; }

std::string to_string(UpsampleMode m) {
  return m == UpsampleMode::NearestConv ? "nearest-conv" : "transposed-conv";
}

kernels::PadMode parse_pad_mode(const std::string& s) {
  if (s == "reflect") return kernels::PadMode::Reflect;
  if (s == "zero") return kernels::PadMode::Zero;
  throw ConfigError("unknown padding_mode '" + s + "' (expected reflect|zero)");
}

UpsampleMode parse_upsample_mode(const std::string& s) {
  if (s == "nearest-conv") return UpsampleMode::NearestConv;
  if (s == "transposed-conv") return UpsampleMode::TransposedConv;
  throw ConfigError("unknown upsample_mode '" + s + "' (expected nearest-conv|transposed-conv)");
}

nlohmann::json TransformNetConfig::to_json() const {
  return {{"downsample_channels", downsample_channels},
          {"num_residual_blocks", num_residual_blocks},
          {"padding_mode", to_string(padding_mode)},
          {"upsample_mode", to_string(upsample_mode)},
          {"in_epsilon", in_epsilon}};
}

TransformNetConfig TransformNetConfig::from_json(const nlohmann::json& j) {
  TransformNetConfig c;
  try {
    c.downsample_channels = j.at("downsample_channels").get<std::vector<Index>>();
    c.num_residual_blocks = j.at("num_residual_blocks").get<Index>();
    c.padding_mode = parse_pad_mode(j.at("padding_mode").get<std::string>());
    c.upsample_mode = parse_upsample_mode(j.at("upsample_mode").get<std::string>());
    c.in_epsilon = j.at("in_epsilon").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad transform-net config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace depthstyle
