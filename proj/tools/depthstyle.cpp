// Command-line front end: train, stylize, eval, eval-table, sweep and depth utilities.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "depthstyle/image_io.hpp"
#include "depthstyle/inference.hpp"
#include "depthstyle/synthetic.hpp"
#include "depthstyle/training.hpp"

using namespace depthstyle;

namespace {

enum Exit { kOk = 0, kFailures = 1, kUsage = 2, kSetup = 3, kFormat = 4, kNumerical = 5, kResource = 6 };

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out << text;
}

struct DepthFlags {
  std::string config;
  std::string backend;
  std::string weights;
  std::string sha256;
  std::string saliency = "spectral-residual";

  void add(CLI::App* app) {
    app->add_option("--train-config", config, "Take the depth backend from this training config");
    app->add_option("--depth-backend", backend, "stub-convnet | convnet | channel | none");
    app->add_option("--depth-weights", weights, "Depth network archive (backend convnet)");
    app->add_option("--depth-sha256", sha256, "Expected SHA-256 of --depth-weights");
    app->add_option("--saliency", saliency, "Saliency backend");
  }

  std::unique_ptr<DepthEstimator<float>> make() const {
    DepthSpec spec = config.empty() ? DepthSpec{} : TrainConfig::load(config).depth;
    if (!backend.empty()) spec.backend = backend;
    if (spec.backend == "none") return nullptr;
    if (!weights.empty()) spec.weights = weights;
    if (!sha256.empty()) spec.sha256 = sha256;
    return make_depth_estimator<float>(spec);
  }
};

void print_row(const PairRow& row) {
  for (auto m : kAllMetrics) {
    const auto& v = row.values[static_cast<std::size_t>(m)];
    std::printf("%-15s %s\n", metric_key(m).c_str(), v ? std::to_string(*v).c_str() : "n/a");
  }
  for (const auto& e : row.errors) warn(e);
}

std::vector<double> parse_gammas(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad depth weight '" + item + "' in --gammas");
    }
  }
  return out;
}

struct TrainFlags {
  std::string config;
  std::string style, data, out, resume;
  std::optional<double> depth_weight;
  std::optional<Index> iterations;
  std::vector<std::string> sets;
  Index log_every = 10;

  void add(CLI::App* app, bool need_config) {
    auto* c = app->add_option("--config", config, "Training config (key = value)");
    if (need_config) c->required();
    app->add_option("--style", style, "Style image (overrides style_image_path)");
    app->add_option("--data", data, "Training image directory (overrides dataset_root)");
    app->add_option("--depth-weight", depth_weight, "Depth loss weight gamma");
    app->add_option("--out", out, "Output directory");
    app->add_option("--iterations", iterations, "Number of optimisation steps");
    app->add_option("--set", sets, "Extra key=value override, repeatable");
    app->add_option("--log-every", log_every, "Print every N iterations")->check(CLI::PositiveNumber);
  }

  TrainConfig build() const {
    TrainConfig c = config.empty() ? TrainConfig{} : TrainConfig::load(config);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!style.empty()) c.style_image_path = style;
    if (!data.empty()) c.dataset_root = data;
    if (!out.empty()) c.output_dir = out;
    if (depth_weight) c.depth_weight = *depth_weight;
    if (iterations) c.iterations = *iterations;
    c.validate();
    return c;
  }

  TrainOptions options() const {
    TrainOptions o;
    o.warn = warn;
    const Index every = log_every;
    o.on_step = [every](const LossRecord& r) {
      if (r.iteration % every == 0 || r.iteration == 1)
        std::fprintf(stderr, "iter %lld epoch %lld  content %.4g  style %.4g  depth %.4g  total %.4g  (%.2fs)\n",
                     static_cast<long long>(r.iteration), static_cast<long long>(r.epoch), r.content, r.style, r.depth,
                     r.total, r.seconds);
    };
    if (!resume.empty()) {
      o.resume = resume;
      o.resume_iterations = iterations;
    }
    return o;
  }
};

int run_train(const TrainFlags& f) {
  TrainConfig c = f.build();
  if (!f.resume.empty() && f.out.empty()) {
    // Resumed runs keep writing next to their checkpoint unless redirected.
    c.output_dir = std::filesystem::path(f.resume).parent_path().string();
  }
  if (f.resume.empty()) {
    std::filesystem::create_directories(c.output_dir);
    write_text(std::filesystem::path(c.output_dir) / "config.txt", c.to_text());
  }
  const TrainResult r = train(c, f.options());
  std::cout << "model: " << r.model_path.string() << "\nlog: " << r.log_path.string()
            << "\ncheckpoint: " << r.checkpoint_path.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depth-aware fast neural style transfer"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a transformation network for one style");
  train_flags.add(train_cmd, false);
  train_cmd->add_option("--resume", train_flags.resume, "Continue from a checkpoint.dsa");

  StylizeRequest req;
  std::string report_path;
  auto* stylize_cmd = app.add_subcommand("stylize", "Stylize an image or a directory of images");
  stylize_cmd->add_option("--model", req.model, "Trained model archive")->required();
  stylize_cmd->add_option("--input", req.input, "Image file or directory")->required();
  stylize_cmd->add_option("--output", req.output, "Output file or directory")->required();
  stylize_cmd->add_option("--max-dim", req.max_dim, "Downscale inputs so the longer side is at most N");
  stylize_cmd->add_option("--format", req.format, "Output format for directory outputs (default png)");
  stylize_cmd->add_option("--report", report_path, "Write a JSON summary here");

  std::string content, stylized, eval_report, eval_method;
  DepthFlags eval_depth;
  auto* eval_cmd = app.add_subcommand("eval", "Score one stylized image against its content image");
  eval_cmd->add_option("--content", content, "Content image")->required();
  eval_cmd->add_option("--stylized", stylized, "Stylized image")->required();
  eval_cmd->add_option("--report", eval_report, "Write a metric report JSON here");
  eval_cmd->add_option("--method", eval_method, "Method name recorded in the report");
  eval_depth.add(eval_cmd);

  std::string manifest, table_out;
  DepthFlags table_depth;
  auto* table_cmd = app.add_subcommand("eval-table", "Aggregate and rank methods from a manifest CSV");
  table_cmd->add_option("--manifest", manifest, "CSV with columns method,content_path,stylized_path")->required();
  table_cmd->add_option("--out", table_out, "Output table (.csv or .json)")->required();
  table_depth.add(table_cmd);

  TrainFlags sweep_flags;
  std::string gammas = "0,1000,10000", held_out, sweep_report;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train one model per depth weight and evaluate each");
  sweep_flags.add(sweep_cmd, false);
  sweep_cmd->add_option("--gammas", gammas, "Comma-separated depth weights");
  sweep_cmd->add_option("--held-out", held_out, "Directory of held-out content images")->required();
  sweep_cmd->add_option("--report", sweep_report, "Sweep summary JSON (default <out>/sweep.json)");

  auto* depth_cmd = app.add_subcommand("depth", "Depth map utilities");
  depth_cmd->require_subcommand(1);
  std::string depth_in, depth_out, depth_a, depth_b;
  DepthFlags export_depth, compare_depth;
  auto* export_cmd = depth_cmd->add_subcommand("export", "Write a 16-bit PNG depth map");
  export_cmd->add_option("--input", depth_in, "Image")->required();
  export_cmd->add_option("--output", depth_out, "16-bit PNG")->required();
  export_depth.add(export_cmd);
  auto* compare_cmd = depth_cmd->add_subcommand("compare", "SSIM between the depth maps of two images");
  compare_cmd->add_option("--a", depth_a, "First image")->required();
  compare_cmd->add_option("--b", depth_b, "Second image")->required();
  compare_depth.add(compare_cmd);

  std::string fixture_dir, fixture_style;
  int fixture_count = 32;
  Index fixture_min = 256, fixture_max = 320;
  std::uint64_t fixture_seed = 1;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Write procedural scenes and a style pattern for trials");
  fixtures_cmd->add_option("--out", fixture_dir, "Directory for scene_*.png")->required();
  fixtures_cmd->add_option("--count", fixture_count, "Number of scenes")->check(CLI::PositiveNumber);
  fixtures_cmd->add_option("--min-side", fixture_min, "Smallest side length");
  fixtures_cmd->add_option("--max-side", fixture_max, "Largest side length");
  fixtures_cmd->add_option("--seed", fixture_seed, "Seed");
  fixtures_cmd->add_option("--style", fixture_style, "Also write a style pattern to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train_flags);

    if (*fixtures_cmd) {
      if (fixture_min < 16 || fixture_max < fixture_min) throw ArgumentError("need 16 <= --min-side <= --max-side");
      const auto files = synth::write_scene_set(fixture_dir, fixture_count, fixture_min, fixture_max, fixture_seed);
      if (!fixture_style.empty())
        write_image(fixture_style, synth::style_pattern(fixture_max, fixture_max, derive_seed(fixture_seed, 1)));
      std::cout << files.size() << " scenes in " << fixture_dir << '\n';
      return kOk;
    }

    if (*stylize_cmd) {
      const auto report = stylize_batch(req, warn);
      for (const auto& s : report.successes) std::cout << s.input.string() << " -> " << s.output.string() << '\n';
      std::cout << report.successes.size() << "/" << report.attempted << " stylized\n";
      if (!report_path.empty()) write_text(report_path, report.to_json().dump(2) + "\n");
      return report.failures.empty() ? kOk : kFailures;
    }

    if (*eval_cmd) {
      const auto depth = eval_depth.make();
      EvalBackends backends;
      backends.depth = depth.get();
      backends.saliency = eval_depth.saliency;
      const PairRow row = evaluate_pair(content, stylized, backends, eval_method);
      print_row(row);
      if (!eval_report.empty()) write_text(eval_report, metric_report_json(eval_method, {row}, backends).dump(2) + "\n");
      return row.errors.empty() ? kOk : kFailures;
    }

    if (*table_cmd) {
      const auto depth = table_depth.make();
      EvalBackends backends;
      backends.depth = depth.get();
      backends.saliency = table_depth.saliency;
      const MethodTable table = compare_methods(read_manifest(manifest), backends);
      const std::filesystem::path out(table_out);
      if (out.extension() == ".json") {
        write_text(out, method_table_json(table).dump(2) + "\n");
      } else if (out.extension() == ".csv") {
        write_text(out, method_table_csv(table));
      } else {
        throw ArgumentError("--out must end in .csv or .json");
      }
      std::cout << method_table_csv(table);
      for (const auto& m : table.methods)
        for (const auto& f : m.missing_files) warn(m.method + ": missing " + f);
      return kOk;
    }

    if (*sweep_cmd) {
      const TrainConfig c = sweep_flags.build();
      const auto held = list_images(held_out);
      if (held.empty()) throw ArgumentError("no images in " + held_out);
      const auto depth = make_depth_estimator<float>(c.depth);
      EvalBackends backends;
      backends.depth = depth.get();
      const auto entries = sweep_depth_weight(c, parse_gammas(gammas), held, backends, sweep_flags.options());
      const auto j = sweep_json(entries);
      const std::filesystem::path out =
          sweep_report.empty() ? std::filesystem::path(c.output_dir) / "sweep.json" : std::filesystem::path(sweep_report);
      write_text(out, j.dump(2) + "\n");
      for (const auto& e : entries) {
        const auto& d = e.held_out.means[static_cast<std::size_t>(Metric::DepthSsim)];
        std::printf("gamma %-10g depth_ssim %-10s final_style %.4g\n", e.gamma,
                    d ? std::to_string(*d).c_str() : "n/a", e.final_style);
      }
      return kOk;
    }

    if (*export_cmd) {
      const auto depth = export_depth.make();
      if (!depth) throw ArgumentError("depth export needs a depth backend");
      const auto d = estimate_depth(*depth, read_image(depth_in));
      write_gray16(depth_out, d.plane(0, 0).cast<double>());
      std::cout << depth_out << '\n';
      return kOk;
    }

    if (*compare_cmd) {
      const auto depth = compare_depth.make();
      if (!depth) throw ArgumentError("depth compare needs a depth backend");
      EvalBackends backends;
      backends.depth = depth.get();
      const auto a = read_image(depth_a).cast<double>(), b = read_image(depth_b).cast<double>();
      const PairRow row = evaluate_images(a, b, backends);
      const auto& v = row.values[static_cast<std::size_t>(Metric::DepthSsim)];
      if (!v) throw SetupError(row.errors.empty() ? "depth SSIM unavailable" : row.errors.front());
      std::printf("depth_ssim %.6f\n", *v);
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const SetupError& e) {
    std::cerr << "setup error: " << e.what() << '\n';
    return kSetup;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kResource;
  }
  return kOk;
}
