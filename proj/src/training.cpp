#include "depthstyle/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>

#include "depthstyle/image_io.hpp"
#include "depthstyle/inference.hpp"

namespace depthstyle {

namespace {

constexpr const char* kCheckpointKind = "depthstyle.checkpoint";

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> unique_taps(const std::string& content, const std::vector<std::string>& style) {
  std::vector<std::string> t = style;
  if (std::find(t.begin(), t.end(), content) == t.end()) t.push_back(content);
  return t;
}

double tail_mean(const std::vector<LossRecord>& log, double LossRecord::*field) {
  if (log.empty()) return 0;
  const std::size_t n = std::max<std::size_t>(1, log.size() / 10);
  double s = 0;
  for (std::size_t i = log.size() - n; i < log.size(); ++i) s += log[i].*field;
  return s / static_cast<double>(n);
}

}  // namespace

double total_loss(double alpha, double beta, double gamma, double content, double style, double depth) {
  if (alpha < 0 || beta < 0 || gamma < 0) throw ConfigError("loss weights must be >= 0");
  return alpha * content + beta * style + gamma * depth;
}

nlohmann::json LossRecord::to_json() const {
  return {{"iteration", iteration}, {"epoch", epoch},     {"content", content},
          {"style", style},         {"depth", depth},     {"total", total},
          {"seconds", seconds},     {"skipped_files", skipped_files}};
}

LossRecord LossRecord::from_json(const nlohmann::json& j) {
  LossRecord r;
  r.iteration = j.at("iteration").get<Index>();
  r.epoch = j.at("epoch").get<std::int64_t>();
  r.content = j.at("content").get<double>();
  r.style = j.at("style").get<double>();
  r.depth = j.at("depth").get<double>();
  r.total = j.at("total").get<double>();
  r.seconds = j.at("seconds").get<double>();
  r.skipped_files = j.at("skipped_files").get<std::size_t>();
  return r;
}

void LossStats::update(const LossRecord& r, double decay) {
  const double a = count == 0 ? 1.0 : 1.0 - decay;
  content += a * (r.content - content);
  style += a * (r.style - style);
  depth += a * (r.depth - depth);
  total += a * (r.total - total);
  ++count;
}

nlohmann::json LossStats::to_json() const {
  return {{"content", content}, {"style", style}, {"depth", depth}, {"total", total}, {"count", count}};
}

LossStats LossStats::from_json(const nlohmann::json& j) {
  LossStats s;
  s.content = j.at("content").get<double>();
  s.style = j.at("style").get<double>();
  s.depth = j.at("depth").get<double>();
  s.total = j.at("total").get<double>();
  s.count = j.at("count").get<Index>();
  return s;
}

Trainer::Trainer(TrainConfig config, Warn warn) : Trainer(std::move(config), std::move(warn), true) {}

Trainer::Trainer(TrainConfig config, Warn warn, bool)
    : config_(std::move(config)),
      warn_(std::move(warn)),
      net_((config_.validate(), init_transform_net<float>(config_.net, derive_seed(config_.seed, 0x6e6574)))) {
  if (config_.style_image_path.empty()) throw ConfigError("style_image_path is not set");
  if (config_.dataset_root.empty()) throw ConfigError("dataset_root is not set");
  extractor_ = make_feature_extractor<float>(config_.backbone);
  extractor_->check_taps(unique_taps(config_.content_layer, config_.style_layers));
  depth_ = make_depth_estimator<float>(config_.depth);

  Tensor<float> style;
  try {
    style = read_image(config_.style_image_path);
  } catch (const FormatError& e) {
    throw SetupError(std::string("style image: ") + e.what());
  }
  style_target_ = StyleTarget<float>::from_image(*extractor_, resize_short_side(style, config_.image_size),
                                                 config_.style_layers);
  taps_ = unique_taps(config_.content_layer, config_.style_layers);

  try {
    dataset_ = std::make_unique<Dataset>(config_.dataset_root, config_.image_size, config_.seed, warn_);
  } catch (const ArgumentError& e) {
    throw SetupError(std::string("dataset: ") + e.what());
  }
  adam_ = AdamState<float>::like(net_.params());
  total_iterations_ = config_.total_iterations(static_cast<Index>(dataset_->size()));
  backbone_checksum_at_start_ = extractor_->checksum();
  depth_checksum_at_start_ = depth_->checksum();
}

LossRecord Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const Tensor<float> x = dataset_->next_batch(config_.batch_size);
  const std::string& cl = config_.content_layer;

  Eager<float> eager;
  const auto fx = extractor_->extract(eager, x, {cl});
  const Tensor<float> dx = depth_->estimate(eager, x);

  ParamSet<float> grads = net_.params().zeros_like();
  Tape<float> tape;
  auto y = net_.run(tape, tape.constant(x), &grads);
  const auto fy = extractor_->extract(tape, y, taps_);
  auto lc = content_loss_from_features(tape, fy.at(cl), tape.constant(fx.at(cl)));
  auto ls = style_loss_from_features(tape, fy, style_target_, config_.style_layers);
  std::vector<Tape<float>::Var> terms{lc, ls};
  std::vector<float> weights{static_cast<float>(config_.content_weight), static_cast<float>(config_.style_weight)};
  double depth_value = 0;
  if (config_.depth_weight > 0) {
    auto ld = depth_loss_from_maps(tape, depth_->estimate(tape, y), tape.constant(dx), config_.depth_minmax);
    depth_value = tape.value(ld).item();
    terms.push_back(ld);
    weights.push_back(static_cast<float>(config_.depth_weight));
  } else {
    Eager<float> e;
    depth_value = depth_loss_from_maps(e, depth_->estimate(e, tape.value(y)), dx, config_.depth_minmax).item();
  }
  auto total = tape.weighted_sum(terms, weights);

  LossRecord r;
  r.iteration = iteration_ + 1;
  r.epoch = dataset_->cursor().epoch;
  r.content = tape.value(lc).item();
  r.style = tape.value(ls).item();
  r.depth = depth_value;
  r.total = total_loss(config_.content_weight, config_.style_weight, config_.depth_weight, r.content, r.style,
                       r.depth);
  r.skipped_files = dataset_->skipped();
  auto describe = [&] {
    return "iteration " + std::to_string(r.iteration) + " (content " + shortest(r.content) + ", style " +
           shortest(r.style) + ", depth " + shortest(r.depth) + ", total " + shortest(r.total) + ")";
  };
  if (!std::isfinite(r.total) || !std::isfinite(tape.value(total).item()))
    throw NumericalError("non-finite loss at " + describe());

  tape.backward(total);
  if (!grads.all_finite()) throw NumericalError("non-finite gradient at " + describe());

  adam_step(net_.params(), grads, adam_,
            {config_.learning_rate, config_.adam_beta1, config_.adam_beta2, config_.adam_epsilon});
  ++iteration_;
  stats_.update(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  Archive a(kCheckpointKind);
  auto& m = a.meta();
  m["config"] = config_.to_text();
  m["net_config"] = net_.config().to_json();
  m["iteration"] = iteration_;
  m["adam_t"] = adam_.t;
  m["cursor"] = {{"epoch", dataset_->cursor().epoch}, {"position", dataset_->cursor().position}};
  m["bad_files"] = dataset_->bad_files();
  m["stats"] = stats_.to_json();
  m["checksums"] = {{"backbone", extractor_->checksum()}, {"depth", depth_->checksum()}};
  a.put_params("model.", net_.params(), Dtype::F32);
  a.put_params("adam.m.", adam_.m, Dtype::F32);
  a.put_params("adam.v.", adam_.v, Dtype::F32);
  a.save(path);
}

std::unique_ptr<Trainer> Trainer::resume(const std::filesystem::path& checkpoint, Warn warn,
                                         const std::optional<std::string>& output_dir,
                                         std::optional<Index> iterations) {
  const Archive a = Archive::load(checkpoint);
  if (a.kind() != kCheckpointKind)
    throw FormatError(checkpoint.string() + " is a '" + a.kind() + "' archive, not a training checkpoint");
  const auto& m = a.meta();
  TrainConfig cfg = TrainConfig::parse(m.at("config").get<std::string>());
  if (output_dir) cfg.output_dir = *output_dir;
  if (iterations) cfg.iterations = *iterations;
  std::unique_ptr<Trainer> t(new Trainer(std::move(cfg), std::move(warn), false));
  if (m.at("checksums").at("backbone").get<std::uint64_t>() != t->extractor_->checksum())
    throw SetupError("feature backbone differs from the one the checkpoint was trained with");
  if (m.at("checksums").at("depth").get<std::uint64_t>() != t->depth_->checksum())
    throw SetupError("depth backbone differs from the one the checkpoint was trained with");
  a.get_params("model.", t->net_.params());
  a.get_params("adam.m.", t->adam_.m);
  a.get_params("adam.v.", t->adam_.v);
  t->adam_.t = m.at("adam_t").get<std::int64_t>();
  t->iteration_ = m.at("iteration").get<Index>();
  t->stats_ = LossStats::from_json(m.at("stats"));
  t->dataset_->restore({m.at("cursor").at("epoch").get<std::int64_t>(), m.at("cursor").at("position").get<std::int64_t>()},
                       m.at("bad_files").get<std::set<std::string>>());
  return t;
}

TrainResult train(const TrainConfig& config, const TrainOptions& options) {
  std::unique_ptr<Trainer> trainer = options.resume
                                         ? Trainer::resume(*options.resume, options.warn, config.output_dir,
                                                           options.resume_iterations)
                                         : std::make_unique<Trainer>(config, options.warn);
  const std::filesystem::path out = trainer->config().output_dir;
  std::filesystem::create_directories(out);
  TrainResult result{trainer->net(), {}, out / "model.dsa", out / "train_log.jsonl", out / "checkpoint.dsa"};
  std::ofstream log(result.log_path, options.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw SetupError("cannot write " + result.log_path.string());

  const std::uint64_t backbone_before = trainer->backbone_checksum(), depth_before = trainer->depth_checksum();
  Index end = trainer->total_iterations();
  if (options.stop_at > 0) end = std::min(end, options.stop_at);
  Index last_checkpoint = options.resume ? trainer->iteration() : -1;
  const Index interval = trainer->config().checkpoint_interval;
  while (trainer->iteration() < end) {
    LossRecord r;
    try {
      r = trainer->step();
    } catch (const NumericalError& e) {
      const std::string where = last_checkpoint >= 0 ? "last good checkpoint " + result.checkpoint_path.string() +
                                                           " (iteration " + std::to_string(last_checkpoint) + ")"
                                                     : "no checkpoint was written";
      throw NumericalError(std::string(e.what()) + "; training aborted, " + where);
    }
    log << r.to_json().dump() << '\n' << std::flush;
    result.log.push_back(r);
    if (options.on_step) options.on_step(r);
    if (interval > 0 && trainer->iteration() % interval == 0) {
      trainer->save_checkpoint(result.checkpoint_path);
      last_checkpoint = trainer->iteration();
    }
  }
  if (last_checkpoint != trainer->iteration()) trainer->save_checkpoint(result.checkpoint_path);
  trainer->net().save(result.model_path);
  result.net = trainer->net();
  result.backbone_checksum = trainer->backbone_checksum();
  result.depth_checksum = trainer->depth_checksum();
  if (result.backbone_checksum != backbone_before || result.depth_checksum != depth_before)
    throw NumericalError("a frozen backbone changed during training");
  return result;
}

std::vector<LossRecord> read_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read training log " + path.string());
  std::vector<LossRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(LossRecord::from_json(nlohmann::json::parse(line)));
  return out;
}

std::vector<SweepEntry> sweep_depth_weight(const TrainConfig& config, std::vector<double> gammas,
                                           const std::vector<std::filesystem::path>& held_out,
                                           const EvalBackends& backends, const TrainOptions& options) {
  if (gammas.empty()) throw ConfigError("sweep needs at least one depth weight");
  for (double g : gammas)
    if (!(g >= 0)) throw ConfigError("depth weights must be >= 0");
  std::sort(gammas.begin(), gammas.end());
  gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());

  std::vector<Tensor<double>> contents;
  for (const auto& p : held_out) contents.push_back(resize_and_center_crop(read_image(p), config.image_size).cast<double>());

  std::vector<SweepEntry> out;
  for (double g : gammas) {
    TrainConfig c = config;
    c.depth_weight = g;
    c.output_dir = (std::filesystem::path(config.output_dir) / ("gamma_" + shortest(g))).string();
    TrainOptions o = options;
    o.resume.reset();
    const TrainResult r = train(c, o);
    std::vector<PairRow> rows;
    for (std::size_t i = 0; i < contents.size(); ++i) {
      const auto y = stylize(r.net, {contents[i].cast<float>(), ValueRange::Unit});
      PairRow row = evaluate_images(contents[i], y.data.cast<double>(), backends);
      row.method = "gamma=" + shortest(g);
      row.content = held_out[i].string();
      rows.push_back(std::move(row));
    }
    SweepEntry e;
    e.gamma = g;
    e.model_path = r.model_path;
    e.held_out = aggregate(rows);
    e.final_style = tail_mean(r.log, &LossRecord::style);
    e.final_content = tail_mean(r.log, &LossRecord::content);
    e.final_depth = tail_mean(r.log, &LossRecord::depth);
    out.push_back(std::move(e));
  }
  return out;
}

nlohmann::json sweep_json(const std::vector<SweepEntry>& entries) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json means = nlohmann::json::object();
    for (auto m : kAllMetrics) {
      const auto& v = e.held_out.means[static_cast<std::size_t>(m)];
      means[metric_key(m)] = v ? nlohmann::json(*v) : nlohmann::json();
    }
    arr.push_back({{"gamma", e.gamma},
                   {"model", e.model_path.string()},
                   {"held_out_means", means},
                   {"final_style", e.final_style},
                   {"final_content", e.final_content},
                   {"final_depth", e.final_depth}});
  }
  return {{"schema", "depthstyle.sweep"}, {"schema_version", 1}, {"entries", arr}};
}

}  // namespace depthstyle
