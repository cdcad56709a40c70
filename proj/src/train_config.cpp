#include "depthstyle/train_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace depthstyle {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true|false, got '" + v + "'");
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
  return s.str();
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const TrainConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <class M>
Field string_field(M member) {
  return {[member](TrainConfig& c, const std::string&, const std::string& v) { std::invoke(member, c) = v; },
          [member](const TrainConfig& c) { return std::string(std::invoke(member, c)); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  using C = TrainConfig;
  auto dbl = [](double C::*m) {
    return Field{[m](C& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
                 [m](const C& c) { return num(c.*m); }};
  };
  auto idx = [](Index C::*m) {
    return Field{[m](C& c, const std::string& k, const std::string& v) { c.*m = to_int<Index>(k, v); },
                 [m](const C& c) { return std::to_string(c.*m); }};
  };
  static const std::vector<std::pair<std::string, Field>> f{
      {"style_image_path", string_field(&C::style_image_path)},
      {"dataset_root", string_field(&C::dataset_root)},
      {"output_dir", string_field(&C::output_dir)},
      {"image_size", idx(&C::image_size)},
      {"batch_size", idx(&C::batch_size)},
      {"learning_rate", dbl(&C::learning_rate)},
      {"adam_beta1", dbl(&C::adam_beta1)},
      {"adam_beta2", dbl(&C::adam_beta2)},
      {"adam_epsilon", dbl(&C::adam_epsilon)},
      {"content_weight", dbl(&C::content_weight)},
      {"style_weight", dbl(&C::style_weight)},
      {"depth_weight", dbl(&C::depth_weight)},
      {"epochs", idx(&C::epochs)},
      {"iterations", idx(&C::iterations)},
      {"seed",
       {[](C& c, const std::string& k, const std::string& v) { c.seed = to_int<std::uint64_t>(k, v); },
        [](const C& c) { return std::to_string(c.seed); }}},
      {"checkpoint_interval", idx(&C::checkpoint_interval)},
      {"content_layer", string_field(&C::content_layer)},
      {"style_layers",
       {[](C& c, const std::string&, const std::string& v) { c.style_layers = split_list(v); },
        [](const C& c) { return join(c.style_layers); }}},
      {"net_channels",
       {[](C& c, const std::string& k, const std::string& v) {
          c.net.downsample_channels.clear();
          for (const auto& s : split_list(v)) c.net.downsample_channels.push_back(to_int<Index>(k, s));
        },
        [](const C& c) { return join(c.net.downsample_channels); }}},
      {"net_residual_blocks",
       {[](C& c, const std::string& k, const std::string& v) { c.net.num_residual_blocks = to_int<Index>(k, v); },
        [](const C& c) { return std::to_string(c.net.num_residual_blocks); }}},
      {"net_padding",
       {[](C& c, const std::string&, const std::string& v) { c.net.padding_mode = parse_pad_mode(v); },
        [](const C& c) { return to_string(c.net.padding_mode); }}},
      {"net_upsample",
       {[](C& c, const std::string&, const std::string& v) { c.net.upsample_mode = parse_upsample_mode(v); },
        [](const C& c) { return to_string(c.net.upsample_mode); }}},
      {"in_epsilon",
       {[](C& c, const std::string& k, const std::string& v) { c.net.in_epsilon = to_double(k, v); },
        [](const C& c) { return num(c.net.in_epsilon); }}},
      {"backbone", {[](C& c, const std::string&, const std::string& v) { c.backbone.kind = v; },
                    [](const C& c) { return c.backbone.kind; }}},
      {"backbone_weights",
       {[](C& c, const std::string&, const std::string& v) { c.backbone.weights = v; },
        [](const C& c) { return c.backbone.weights.string(); }}},
      {"backbone_sha256", {[](C& c, const std::string&, const std::string& v) { c.backbone.sha256 = v; },
                           [](const C& c) { return c.backbone.sha256; }}},
      {"backbone_stub_width_divisor",
       {[](C& c, const std::string& k, const std::string& v) { c.backbone.stub_width_divisor = to_int<Index>(k, v); },
        [](const C& c) { return std::to_string(c.backbone.stub_width_divisor); }}},
      {"backbone_stub_gain",
       {[](C& c, const std::string& k, const std::string& v) { c.backbone.stub_gain = to_double(k, v); },
        [](const C& c) { return num(c.backbone.stub_gain); }}},
      {"backbone_stub_seed",
       {[](C& c, const std::string& k, const std::string& v) { c.backbone.stub_seed = to_int<std::uint64_t>(k, v); },
        [](const C& c) { return std::to_string(c.backbone.stub_seed); }}},
      {"depth_backend", {[](C& c, const std::string&, const std::string& v) { c.depth.backend = v; },
                         [](const C& c) { return c.depth.backend; }}},
      {"depth_weights",
       {[](C& c, const std::string&, const std::string& v) { c.depth.weights = v; },
        [](const C& c) { return c.depth.weights.string(); }}},
      {"depth_sha256", {[](C& c, const std::string&, const std::string& v) { c.depth.sha256 = v; },
                        [](const C& c) { return c.depth.sha256; }}},
      {"depth_stub_native_size",
       {[](C& c, const std::string& k, const std::string& v) { c.depth.stub_config.native_size = to_int<Index>(k, v); },
        [](const C& c) { return std::to_string(c.depth.stub_config.native_size); }}},
      {"depth_stub_widths",
       {[](C& c, const std::string& k, const std::string& v) {
          c.depth.stub_config.widths.clear();
          for (const auto& s : split_list(v)) c.depth.stub_config.widths.push_back(to_int<Index>(k, s));
        },
        [](const C& c) { return join(c.depth.stub_config.widths); }}},
      {"depth_stub_output_scale",
       {[](C& c, const std::string& k, const std::string& v) { c.depth.stub_config.output_scale = to_double(k, v); },
        [](const C& c) { return num(c.depth.stub_config.output_scale); }}},
      {"depth_stub_seed",
       {[](C& c, const std::string& k, const std::string& v) { c.depth.stub_seed = to_int<std::uint64_t>(k, v); },
        [](const C& c) { return std::to_string(c.depth.stub_seed); }}},
      {"depth_minmax",
       {[](C& c, const std::string& k, const std::string& v) { c.depth_minmax = to_bool(k, v); },
        [](const C& c) { return std::string(c.depth_minmax ? "true" : "false"); }}},
  };
  return f;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields())
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  throw ConfigError("unknown configuration key '" + key + "'");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(content_weight >= 0 && style_weight >= 0 && depth_weight >= 0, "loss weights must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(image_size >= 64, "image_size must be >= 64");
  require(image_size % net.downsample_factor() == 0,
          "image_size must be a multiple of the net's downsampling factor " + std::to_string(net.downsample_factor()));
  require(learning_rate > 0, "learning_rate must be > 0");
  require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1, "Adam betas must lie in [0, 1)");
  require(adam_epsilon > 0, "adam_epsilon must be > 0");
  require(iterations > 0 || epochs > 0, "either iterations or epochs must be positive");
  require(iterations >= 0 && epochs >= 0, "iterations and epochs must be >= 0");
  require(checkpoint_interval >= 0, "checkpoint_interval must be >= 0");
  require(!content_layer.empty(), "content_layer must be set");
  require(!style_layers.empty(), "style_layers must be nonempty");
  require(backbone.stub_gain > 0, "backbone_stub_gain must be > 0");
  require(depth.stub_config.output_scale > 0, "depth_stub_output_scale must be > 0");
  net.validate();
  depth.stub_config.validate();
}

Index TrainConfig::total_iterations(Index images) const {
  if (iterations > 0) return iterations;
  return epochs * std::max<Index>(1, images / batch_size);
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [name, field] : fields()) out << name << " = " << field.get(*this) << '\n';
  return out.str();
}

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace depthstyle
