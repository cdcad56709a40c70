#pragma once

// Optimisation of a transform net under
//
//   total = alpha * content + beta * style + gamma * depth.
//
// Logged component losses are unweighted; `total` is the weighted sum. With gamma = 0
// the depth term is still evaluated (without gradient) so runs remain comparable.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthstyle/adam.hpp"
#include "depthstyle/dataset.hpp"
#include "depthstyle/evaluation.hpp"
#include "depthstyle/train_config.hpp"

namespace depthstyle {

/// alpha * content + beta * style + gamma * depth. Negative weights are a ConfigError.
double total_loss(double alpha, double beta, double gamma, double content, double style, double depth);

struct LossRecord {
  Index iteration = 0;
  std::int64_t epoch = 0;
  double content = 0;
  double style = 0;
  double depth = 0;
  double total = 0;
  double seconds = 0;
  std::size_t skipped_files = 0;

  nlohmann::json to_json() const;
  static LossRecord from_json(const nlohmann::json& j);
};

/// Exponential moving averages of the logged losses.
struct LossStats {
  double content = 0, style = 0, depth = 0, total = 0;
  Index count = 0;
  void update(const LossRecord& r, double decay = 0.98);
  nlohmann::json to_json() const;
  static LossStats from_json(const nlohmann::json& j);
};

class Trainer {
 public:
  using Warn = std::function<void(const std::string&)>;

  explicit Trainer(TrainConfig config, Warn warn = {});

  /// Restores model, optimiser, data position, bad-file set and statistics. The stored
  /// config is used; `output_dir` may be redirected and the run length extended.
  static std::unique_ptr<Trainer> resume(const std::filesystem::path& checkpoint, Warn warn = {},
                                         const std::optional<std::string>& output_dir = std::nullopt,
                                         std::optional<Index> iterations = std::nullopt);

  /// One optimisation step. Throws NumericalError, leaving parameters untouched, when
  /// the loss or any gradient is non-finite.
  LossRecord step();

  Index iteration() const { return iteration_; }
  Index total_iterations() const { return total_iterations_; }
  const TrainConfig& config() const { return config_; }
  const TransformNet<float>& net() const { return net_; }
  const LossStats& stats() const { return stats_; }
  const Dataset& dataset() const { return *dataset_; }
  std::uint64_t backbone_checksum() const { return extractor_->checksum(); }
  std::uint64_t depth_checksum() const { return depth_->checksum(); }
  const DepthEstimator<float>& depth_estimator() const { return *depth_; }

  void save_checkpoint(const std::filesystem::path& path) const;

 private:
  Trainer(TrainConfig config, Warn warn, bool fresh);

  TrainConfig config_;
  Warn warn_;
  std::unique_ptr<FeatureExtractor<float>> extractor_;
  std::unique_ptr<DepthEstimator<float>> depth_;
  StyleTarget<float> style_target_;
  std::vector<std::string> taps_;
  TransformNet<float> net_;
  AdamState<float> adam_;
  std::unique_ptr<Dataset> dataset_;
  LossStats stats_;
  Index iteration_ = 0;
  Index total_iterations_ = 0;
  std::uint64_t backbone_checksum_at_start_ = 0;
  std::uint64_t depth_checksum_at_start_ = 0;
};

struct TrainOptions {
  /// Resume from this checkpoint instead of starting fresh.
  std::optional<std::filesystem::path> resume;
  /// New total length for a resumed run.
  std::optional<Index> resume_iterations;
  /// Stop after this many total iterations (0 = run to the configured length).
  Index stop_at = 0;
  std::function<void(const LossRecord&)> on_step;
  Trainer::Warn warn;
};

struct TrainResult {
  TransformNet<float> net;
  std::vector<LossRecord> log;
  std::filesystem::path model_path;
  std::filesystem::path log_path;
  std::filesystem::path checkpoint_path;
  std::uint64_t backbone_checksum = 0;
  std::uint64_t depth_checksum = 0;
};

/// Runs to completion, writing <output_dir>/train_log.jsonl (appended on resume),
/// <output_dir>/checkpoint.dsa every checkpoint_interval steps and at the end, and
/// <output_dir>/model.dsa. On a NumericalError the last checkpoint is left intact and
/// the error is rethrown with its location.
TrainResult train(const TrainConfig& config, const TrainOptions& options = {});

std::vector<LossRecord> read_training_log(const std::filesystem::path& path);

struct SweepEntry {
  double gamma = 0;
  std::filesystem::path model_path;
  Aggregate held_out;          ///< metrics of stylised held-out images against their content
  double final_style = 0;      ///< mean unweighted style loss over the last 10% of steps
  double final_content = 0;
  double final_depth = 0;
};

/// Trains one model per gamma (sorted ascending, duplicates removed) into
/// <output_dir>/gamma_<value>, then evaluates each on `held_out` content images.
std::vector<SweepEntry> sweep_depth_weight(const TrainConfig& config, std::vector<double> gammas,
                                           const std::vector<std::filesystem::path>& held_out,
                                           const EvalBackends& backends, const TrainOptions& options = {});

nlohmann::json sweep_json(const std::vector<SweepEntry>& entries);

}  // namespace depthstyle
