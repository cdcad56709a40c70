#pragma once

// Pairwise metric rows, per-method aggregation and the versioned report formats.
//
// metric_report (schema_version 1):
//   { "schema": "depthstyle.metric_report", "schema_version": 1, "method": str,
//     "backends": {"decolorize": str, "saliency": str, "depth": str|null},
//     "metrics": [metric keys], "rows": [row], "means": {key: num|null}, "counts": {key: int} }
//   row = { "content": str, "stylized": str, "values": {key: num|null}, "errors": [str] }
//
// method_table (schema_version 1):
//   { "schema": "depthstyle.method_table", "schema_version": 1, "metrics": [keys],
//     "methods": [{ "method": str, "pairs": int, "means": {key: num|null}, "counts": {key: int},
//                   "rank": {key: "best"|"second"|null}, "missing_files": [str] }],
//     "rows": [row + "method": str] }

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthstyle/depth.hpp"
#include "depthstyle/metrics.hpp"

namespace depthstyle {

enum class Metric { Ssim, Hist, AHash, DHash, DepthSsim, SaliencySsim };
inline constexpr std::size_t kMetricCount = 6;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics{Metric::Ssim,  Metric::Hist,      Metric::AHash,
                                                               Metric::DHash, Metric::DepthSsim, Metric::SaliencySsim};

/// "ssim", "hist", "ahash_sim", "dhash_sim", "depth_ssim", "saliency_ssim".
std::string metric_key(Metric m);

using MetricValues = std::array<std::optional<double>, kMetricCount>;

struct PairRow {
  std::string method;
  std::string content;
  std::string stylized;
  MetricValues values{};
  std::vector<std::string> errors;

  std::optional<double>& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
  const std::optional<double>& operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

struct EvalBackends {
  /// When null, depth_ssim is reported missing.
  const DepthEstimator<float>* depth = nullptr;
  std::string saliency = "spectral-residual";
};

/// All six metrics for unit-range images (batch element 0). The stylized image is
/// resized to the content image's dims first. A failing metric is left empty and its
/// message appended to `errors`.
PairRow evaluate_images(const Tensor<double>& content, const Tensor<double>& stylized, const EvalBackends& backends);

/// Decodes both files and evaluates them. Decode failures yield a row with every
/// metric missing.
PairRow evaluate_pair(const std::filesystem::path& content, const std::filesystem::path& stylized,
                      const EvalBackends& backends, const std::string& method = "");

struct Aggregate {
  MetricValues means{};
  std::array<int, kMetricCount> counts{};
};

/// Per-metric mean over rows where the value is present.
Aggregate aggregate(const std::vector<PairRow>& rows);

nlohmann::json metric_report_json(const std::string& method, const std::vector<PairRow>& rows,
                                  const EvalBackends& backends);
/// Throws FormatError naming the first offending field.
void validate_metric_report(const nlohmann::json& j);

struct ManifestEntry {
  std::string method;
  std::filesystem::path content;
  std::filesystem::path stylized;
};

/// CSV with header method,content_path,stylized_path. Relative paths resolve against
/// the manifest's directory. Double-quoted fields may contain commas.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

enum class Rank { None, Best, Second };

struct MethodSummary {
  std::string method;
  int pairs = 0;
  Aggregate stats;
  std::array<Rank, kMetricCount> rank{};
  std::vector<std::string> missing_files;
};

struct MethodTable {
  std::vector<MethodSummary> methods;
  std::vector<PairRow> rows;
};

/// Groups rows by method in first-appearance order and ranks the means (higher is
/// better). Tied values share a rank; second-best is the next distinct value.
MethodTable summarize(std::vector<PairRow> rows);
MethodTable compare_methods(const std::vector<ManifestEntry>& manifest, const EvalBackends& backends);

nlohmann::json method_table_json(const MethodTable& table);
void validate_method_table(const nlohmann::json& j);
/// One line per method: method,pairs,<metric>...,<metric>_rank... Missing values are empty.
std::string method_table_csv(const MethodTable& table);

}  // namespace depthstyle
