#include "depthstyle/inference.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <map>

#include "depthstyle/image_io.hpp"
#include "depthstyle/resample.hpp"

namespace depthstyle {

std::size_t estimate_forward_bytes(const TransformNetConfig& config, Index h, Index w) {
  const Index f = config.downsample_factor();
  h = (h + f - 1) / f * f;
  w = (w + f - 1) / f * f;
  const Index outer = TransformNetConfig::kOuterKernel, inner = TransformNetConfig::kInnerKernel;
  const auto& ch = config.downsample_channels;
  Index peak = 0;
  auto layer = [&](Index in_c, Index out_c, Index k, Index in_px, Index out_px) {
    peak = std::max(peak, in_c * in_px + out_c * out_px + in_c * k * k * out_px);
  };
  const Index full = h * w;
  layer(3, ch[0], outer, full, full);
  Index px = full;
  for (std::size_t i = 1; i < ch.size(); ++i) {
    layer(ch[i - 1], ch[i], inner, px, px / 4);
    px /= 4;
  }
  layer(ch.back(), ch.back(), inner, px, px);
  for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
    layer(ch[ch.size() - 1 - i], ch[ch.size() - 2 - i], inner, px * 4, px * 4);
    px *= 4;
  }
  layer(ch[0], 3, outer, full, full);
  return static_cast<std::size_t>(peak + 2 * 3 * full) * sizeof(float);
}

std::size_t default_memory_budget() {
  if (const char* mb = std::getenv("DEPTHSTYLE_MEMORY_BUDGET_MB")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(mb, &end, 10);
    if (end != mb && *end == '\0' && v > 0) return static_cast<std::size_t>(v) << 20;
  }
  const long pages = sysconf(_SC_PHYS_PAGES), page = sysconf(_SC_PAGE_SIZE);
  if (pages > 0 && page > 0) return static_cast<std::size_t>(pages) * static_cast<std::size_t>(page) / 4 * 3;
  return std::size_t{4} << 30;
}

ImageTensor<float> stylize(const TransformNet<float>& net, const ImageTensor<float>& image, std::size_t budget_bytes) {
  image.validate(16);
  const std::size_t need = estimate_forward_bytes(net.config(), image.height(), image.width()) *
                           static_cast<std::size_t>(std::max<Index>(1, image.batch()));
  if (need > budget_bytes) {
    const Index h = image.height(), w = image.width(), longest = std::max(h, w);
    auto bytes_at = [&](Index max_dim) {
      const double s = static_cast<double>(max_dim) / static_cast<double>(longest);
      const Index nh = std::max<Index>(1, std::lround(static_cast<double>(h) * s));
      const Index nw = std::max<Index>(1, std::lround(static_cast<double>(w) * s));
      return estimate_forward_bytes(net.config(), nh, nw) * static_cast<std::size_t>(std::max<Index>(1, image.batch()));
    };
    // Bytes scale with pixel count; start from sqrt(budget / need) and step down past padding effects.
    Index fit = static_cast<Index>(std::floor(static_cast<double>(longest) *
                                              std::sqrt(static_cast<double>(budget_bytes) / static_cast<double>(need))));
    fit = std::clamp<Index>(fit, 16, longest);
    while (fit > 16 && bytes_at(fit) > budget_bytes) --fit;
    throw ResourceError("a " + std::to_string(h) + "x" + std::to_string(w) + " image needs about " +
                        std::to_string(need >> 20) + " MiB, over the " + std::to_string(budget_bytes >> 20) +
                        " MiB budget; rerun with --max-dim " + std::to_string(fit));
  }
  return forward(net, image);
}

Tensor<float> limit_max_dim(const Tensor<float>& unit, Index max_dim) {
  const Index h = unit.height(), w = unit.width();
  if (max_dim <= 0 || std::max(h, w) <= max_dim) return unit;
  const double s = static_cast<double>(max_dim) / static_cast<double>(std::max(h, w));
  const Index nh = std::max<Index>(1, std::lround(static_cast<double>(h) * s));
  const Index nw = std::max<Index>(1, std::lround(static_cast<double>(w) * s));
  Tensor<float> out(unit.batch(), unit.channels(), nh, nw);
  for (Index n = 0; n < unit.batch(); ++n)
    for (Index c = 0; c < unit.channels(); ++c)
      out.plane(n, c) = resize_area(unit.plane(n, c).cast<double>(), nh, nw).cast<float>();
  return out;
}

nlohmann::json StylizeReport::to_json() const {
  nlohmann::json ok = nlohmann::json::array(), bad = nlohmann::json::array();
  for (const auto& s : successes) ok.push_back({{"input", s.input.string()}, {"output", s.output.string()}});
  for (const auto& f : failures) bad.push_back({{"input", f.input.string()}, {"error", f.error}});
  return {{"attempted", attempted}, {"succeeded", successes.size()}, {"failed", failures.size()},
          {"outputs", ok}, {"failures", bad}};
}

StylizeReport stylize_batch(const StylizeRequest& request, const std::function<void(const std::string&)>& warn) {
  if (!std::filesystem::exists(request.input)) throw ArgumentError("input does not exist: " + request.input.string());
  const auto net = TransformNet<float>::load(request.model);
  const std::string ext = "." + request.format;
  if (!has_image_extension("x" + ext)) throw ArgumentError("unsupported output format '" + request.format + "'");

  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> jobs;
  if (std::filesystem::is_directory(request.input)) {
    const auto files = list_images(request.input);
    std::map<std::string, int> stems;
    for (const auto& f : files) ++stems[f.stem().string()];
    // Inputs sharing a stem keep their original extension in the name so outputs never collide.
    for (const auto& f : files) {
      std::string name = f.stem().string();
      if (stems[name] > 1) name += "_" + f.extension().string().substr(1);
      jobs.emplace_back(f, request.output / (name + ext));
    }
  } else {
    const bool to_file = has_image_extension(request.output);
    jobs.emplace_back(request.input, to_file ? request.output : request.output / (request.input.stem().string() + ext));
  }
  if (jobs.empty() && warn) warn("no image files found in " + request.input.string());

  StylizeReport report;
  for (const auto& [in, out] : jobs) {
    ++report.attempted;
    try {
      const Tensor<float> img = limit_max_dim(read_image(in), request.max_dim);
      const auto y = stylize(net, {img, ValueRange::Unit}, request.budget_bytes);
      write_image(out, y.data);
      report.successes.push_back({in, out});
    } catch (const std::exception& e) {
      report.failures.push_back({in, e.what()});
      if (warn) warn("failed on " + in.string() + ": " + e.what());
    }
  }
  return report;
}

}  // namespace depthstyle
