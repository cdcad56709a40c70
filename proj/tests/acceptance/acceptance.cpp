// Acceptance gate: prints one PASS/FAIL line per criterion and exits non-zero on any failure.

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "depthstyle/evaluation.hpp"
#include "depthstyle/image_io.hpp"
#include "depthstyle/inference.hpp"
#include "depthstyle/metrics.hpp"
#include "depthstyle/synthetic.hpp"
#include "depthstyle/training.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/stubs.hpp"
#include "support/tempdir.hpp"

using namespace depthstyle;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects named checks; the first failures are reported in the detail string.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failed_.push_back(what);
  }
  Outcome outcome(const std::string& summary) const {
    Outcome o;
    o.pass = failed_.empty();
    o.detail = summary + " (" + std::to_string(total_ - failed_.size()) + "/" + std::to_string(total_) + " checks)";
    for (std::size_t i = 0; i < failed_.size() && i < 5; ++i) o.detail += "; failed: " + failed_[i];
    return o;
  }

 private:
  int total_ = 0;
  std::vector<std::string> failed_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const std::vector<std::string> kStyleLayers{"relu1_2", "relu2_2", "relu3_3", "relu4_3"};

// 1. Property suite on stub backbones.
Outcome criterion1() {
  Checks ck;
  Eager<double> ops;
  const auto vgg = Vgg16Features<double>::stub(8, 16);

  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng r(seed);
    const Index c = 1 + static_cast<Index>(r.below(16)), h = 1 + static_cast<Index>(r.below(12)),
                w = 1 + static_cast<Index>(r.below(12));
    const auto f = testing::random_tensor<double>(2, c, h, w, 100 + seed, -2.0, 3.0);
    const auto g = gram_matrix(f);
    for (Index n = 0; n < 2; ++n) {
      const RowMatrix<double> m = g.plane(n, 0);
      ck.expect((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff()),
                "Gram symmetry seed " + std::to_string(seed));
      Eigen::SelfAdjointEigenSolver<RowMatrix<double>> es(m);
      ck.expect(es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()),
                "Gram PSD seed " + std::to_string(seed));
    }
  }

  const auto x = synth::scene(48, 48, 3).cast<double>();
  const auto style = synth::style_pattern(48, 48, 4).cast<double>();
  const auto target = StyleTarget<double>::from_image(*vgg, style, kStyleLayers);
  ck.expect(content_loss(ops, *vgg, x, x, "relu2_2").item() == 0.0, "content(x, x) = 0");
  const auto f = extract_features(*vgg, x, {"relu3_3"});
  const auto gx = gram_matrix(f.at("relu3_3"));
  ck.expect(style_loss_layer(ops, gx, gx).item() == 0.0, "per-layer style(G, G) = 0");
  ck.expect(style_loss_total(ops, *vgg, style, target, kStyleLayers).item() == 0.0, "total style(style) = 0");
  const auto depth = ConvDepthNet<double>::stub({}, 21);
  ck.expect(depth_loss(ops, *depth, x, x).item() == 0.0, "depth(x, x) = 0");
  ck.expect(depth_loss(ops, *depth, x, x, true).item() == 0.0, "min-max depth(x, x) = 0");

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = testing::random_tensor<float>(2, 4, 9 + static_cast<Index>(seed), 11, 200 + seed, -5.0, 8.0);
    const auto y = kernels::instance_norm(in, Tensor<float>::constant(1, 4, 1, 1, 1.0f), Tensor<float>(1, 4, 1, 1),
                                          1e-5f);
    for (Index n = 0; n < 2; ++n)
      for (Index c = 0; c < 4; ++c) {
        const Eigen::ArrayXd v = y.plane(n, c).cast<double>().reshaped().array();
        const double mean = v.mean(), var = (v - mean).square().mean();
        ck.expect(std::abs(mean) < 1e-5, "IN mean " + fmt("%.3g", mean));
        ck.expect(std::abs(var - 1.0) < 1e-3, "IN variance " + fmt("%.6g", var));
      }
  }

  for (Index c : {1, 2, 5, 16}) {
    const auto g = gram_matrix(Tensor<double>::constant(1, c, 3, 4, 1.0));
    ck.expect((g.flat().array() - 1.0 / static_cast<double>(c)).abs().maxCoeff() < 1e-15,
              "Gram of ones = 1/C for C=" + std::to_string(c));
  }
  Tensor<double> eye(1, 1, 2, 2), zero(1, 1, 2, 2);
  eye.plane(0, 0).setIdentity();
  ck.expect(style_loss_layer(ops, eye, zero).item() == 2.0, "Frobenius example = 2.0");
  const ChannelDepth<double> channel;
  const auto d0 = testing::random_tensor<double>(1, 1, 2, 2, 5);
  Tensor<double> d1 = d0;
  d1.flat().array() += 1.0;
  ck.expect(std::abs(depth_loss(ops, channel, d1, d0).item() - 1.0) < 1e-12, "depth stub example = 1.0");
  const testing::IdentityFeatures<double> id({"id"});
  ck.expect(content_loss(ops, id, Tensor<double>::scalar(2.0), Tensor<double>::scalar(0.0), "id").item() == 4.0,
            "content stub example = 4.0");
  return ck.outcome("Gram symmetry/PSD, zero-loss identities, IN statistics, hand examples");
}

// 2. Finite-difference gradient checks of the three losses on 3x32x32.
Outcome criterion2() {
  Checks ck;
  constexpr int kCoords = 20;
  constexpr double kStep = 1e-6, kTol = 1e-2;
  const auto vgg = Vgg16Features<double>::stub(8, 16);
  const auto depth = ConvDepthNet<double>::stub({}, 21);
  const ChannelDepth<double> channel;
  const auto x = synth::scene(32, 32, 7).cast<double>();
  const auto y_hat = testing::random_tensor<double>(1, 3, 32, 32, 8, 0.0, 1.0);
  const auto target = StyleTarget<double>::from_image(*vgg, synth::style_pattern(32, 32, 3).cast<double>(), kStyleLayers);

  std::string summary;
  auto run = [&](const std::string& name, auto loss, std::uint64_t seed) {
    const auto r = testing::check_input_gradient<double>(loss, y_hat, kCoords, kStep, seed);
    ck.expect(r.coords >= kCoords && r.max_rel_error < kTol, name + " rel " + fmt("%.3g", r.max_rel_error));
    summary += (summary.empty() ? "" : ", ") + name + " " + fmt("%.2g", r.max_rel_error);
  };
  run("content", [&](auto& o, auto v) { return content_loss(o, *vgg, v, o.constant(x), "relu2_2"); }, 1);
  run("style", [&](auto& o, auto v) { return style_loss_total(o, *vgg, v, target, kStyleLayers); }, 2);
  run("depth", [&](auto& o, auto v) { return depth_loss(o, *depth, v, o.constant(x)); }, 3);
  run("depth-minmax", [&](auto& o, auto v) { return depth_loss(o, *depth, v, o.constant(x), true); }, 4);
  run("depth-channel", [&](auto& o, auto v) { return depth_loss(o, channel, v, o.constant(x)); }, 5);
  return ck.outcome("max rel error " + summary + " over " + std::to_string(kCoords) + " coords, tol 1e-2");
}

GrayImage random_gray(Index h, Index w, std::uint64_t seed, bool quantize) {
  Rng rng(seed);
  GrayImage g(h, w);
  for (Index i = 0; i < g.size(); ++i) {
    const double v = rng.uniform(0, 1);
    g.data()[i] = quantize ? std::round(v * 255) / 255 : v;
  }
  return g;
}

// 3. Metric oracle equivalence.
Outcome criterion3(const fs::path& work) {
  Checks ck;
  Rng rng(2024);
  int exact = 0;
  for (int k = 0; k < 100; ++k) {
    const Index h = 9 + static_cast<Index>(rng.below(120)), w = 9 + static_cast<Index>(rng.below(120));
    const GrayImage img = random_gray(h, w, 5000 + static_cast<std::uint64_t>(k), k % 2 == 0);
    const bool a = ahash(img).bits == testing::brute_ahash(img);
    const bool d = dhash(img).bits == testing::brute_dhash(img);
    ck.expect(a, "aHash image " + std::to_string(k));
    ck.expect(d, "dHash image " + std::to_string(k));
    exact += a && d;
  }
  for (std::uint64_t s = 0; s < 5; ++s) {
    const GrayImage g = decolorize(synth::scene(40 + static_cast<Index>(s) * 9, 64, s).cast<double>());
    ck.expect(std::abs(ssim(g, g) - 1.0) <= 1e-6, "ssim(x, x) = 1");
    ck.expect(hash_similarity(ahash(g), ahash(g)) == 1.0, "aHash self-similarity");
    ck.expect(hash_similarity(dhash(g), dhash(g)) == 1.0, "dHash self-similarity");
  }
  const fs::path img = work / "identity.png";
  write_image(img, synth::scene(96, 128, 12));
  const auto depth = ConvDepthNet<float>::stub({}, 21);
  EvalBackends backends;
  backends.depth = depth.get();
  const PairRow row = evaluate_pair(img, img, backends, "identity");
  for (auto m : kAllMetrics) {
    const auto& v = row.values[static_cast<std::size_t>(m)];
    ck.expect(v.has_value() && std::abs(*v - 1.0) <= 1e-12, "identity row " + metric_key(m));
  }
  return ck.outcome(std::to_string(exact) + "/100 random images bit-exact for both hashes; identity row all 1.0");
}

// 6. Method table on identity vs noise-degraded copies.
Outcome criterion6(const fs::path& work) {
  Checks ck;
  const fs::path dir = work / "table";
  fs::create_directories(dir);
  std::vector<ManifestEntry> manifest;
  Rng noise(99);
  for (int i = 0; i < 4; ++i) {
    const auto content = synth::scene(96, 112, 300 + static_cast<std::uint64_t>(i));
    Tensor<float> noisy = content;
    for (Index k = 0; k < noisy.size(); ++k)
      noisy.data()[k] = std::clamp(noisy.data()[k] + static_cast<float>(0.2 * noise.normal()), 0.0f, 1.0f);
    const auto c = dir / ("content_" + std::to_string(i) + ".png");
    const auto copy = dir / ("identity_" + std::to_string(i) + ".png");
    const auto degraded = dir / ("noisy_" + std::to_string(i) + ".png");
    write_image(c, content);
    fs::copy_file(c, copy, fs::copy_options::overwrite_existing);
    write_image(degraded, noisy);
    manifest.push_back({"identity", c.filename(), copy.filename()});
    manifest.push_back({"noisy", c.filename(), degraded.filename()});
  }
  const fs::path csv = dir / "manifest.csv";
  write_manifest(csv, manifest);

  const auto depth = ConvDepthNet<float>::stub({}, 21);
  EvalBackends backends;
  backends.depth = depth.get();
  const MethodTable table = compare_methods(read_manifest(csv), backends);
  ck.expect(table.methods.size() == 2, "two methods");
  const auto& id = table.methods.at(0);
  ck.expect(id.method == "identity", "identity listed first");
  for (auto m : kAllMetrics)
    ck.expect(id.rank[static_cast<std::size_t>(m)] == Rank::Best, "identity best on " + metric_key(m));

  bool schema_ok = true;
  try {
    validate_method_table(nlohmann::json::parse(method_table_json(table).dump()));
    validate_metric_report(nlohmann::json::parse(metric_report_json("all", table.rows, backends).dump()));
  } catch (const std::exception& e) {
    schema_ok = false;
    ck.expect(false, std::string("schema: ") + e.what());
  }
  ck.expect(schema_ok, "schemas validate");

  // Recompute every cell from the decoded files with the metric primitives.
  const auto sal = make_saliency_backend("spectral-residual");
  double worst = 0;
  for (const auto& summary : table.methods) {
    std::array<double, kMetricCount> sum{};
    int n = 0;
    for (const auto& e : manifest) {
      if (e.method != summary.method) continue;
      const auto c = read_image(dir / e.content).cast<double>(), s = read_image(dir / e.stylized).cast<double>();
      const GrayImage gc = decolorize(c), gs = decolorize(s);
      const auto dc = estimate_depth(*depth, c.cast<float>()).cast<double>();
      const auto ds = estimate_depth(*depth, s.cast<float>()).cast<double>();
      const double v[kMetricCount] = {ssim(gc, gs),
                                      hist_similarity(gc, gs),
                                      hash_similarity(ahash(gc), ahash(gs)),
                                      hash_similarity(dhash(gc), dhash(gs)),
                                      ssim(minmax_normalize(dc.plane(0, 0)), minmax_normalize(ds.plane(0, 0))),
                                      ssim(sal->compute(c), sal->compute(s))};
      for (std::size_t m = 0; m < kMetricCount; ++m) sum[m] += v[m];
      ++n;
    }
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      const auto& got = summary.stats.means[m];
      const double want = sum[m] / n;
      ck.expect(got.has_value(), summary.method + " " + metric_key(kAllMetrics[m]) + " present");
      if (got) {
        worst = std::max(worst, std::abs(*got - want));
        ck.expect(std::abs(*got - want) <= 1e-9, summary.method + " " + metric_key(kAllMetrics[m]) + " mean");
      }
    }
  }
  return ck.outcome("identity best on all six metrics; schemas valid; max |mean - recomputed| " + fmt("%.2g", worst));
}

// 7. Resume equivalence at tiny scale.
Outcome criterion7(const fs::path& work) {
  Checks ck;
  const fs::path dir = work / "resume";
  TrainConfig c = testing::tiny_config(dir, 12, 5);
  constexpr Index k = 5;
  c.iterations = k + 3;
  c.checkpoint_interval = k;
  c.output_dir = (dir / "uninterrupted").string();
  const auto full = train(c);

  TrainConfig part = c;
  part.output_dir = (dir / "interrupted").string();
  TrainOptions stop;
  stop.stop_at = k;
  const auto head = train(part, stop);
  TrainOptions resume;
  resume.resume = head.checkpoint_path;
  const auto tail = train(part, resume);

  double worst = 0;
  ck.expect(tail.log.size() == 3, "three steps after resume");
  for (std::size_t i = 0; i < tail.log.size() && i < 3; ++i) {
    const auto& a = tail.log[i];
    const auto& b = full.log[k + i];
    ck.expect(a.iteration == b.iteration, "iteration numbering");
    const double rel = std::abs(a.total - b.total) / std::max(std::abs(b.total), 1e-30);
    worst = std::max(worst, rel);
    ck.expect(rel <= 1e-4, "iteration " + std::to_string(b.iteration) + " rel " + fmt("%.3g", rel));
  }
  return ck.outcome("loss after resume at iteration " + std::to_string(k + 1) + ".." + std::to_string(k + 3) +
                    " max rel diff " + fmt("%.3g", worst));
}

struct DeskOptions {
  int images = 1000;
  Index iterations = 300;
  int held_out = 12;
  std::vector<double> gammas{0, 1e3, 1e4};
};

struct DeskRun {
  std::vector<SweepEntry> entries;
  std::map<double, std::vector<LossRecord>> logs;
  double seconds = 0;
};

DeskRun run_desk(const fs::path& work, const DeskOptions& opt) {
  const auto t0 = Clock::now();
  const fs::path data = work / "desk_data", held = work / "desk_held";
  synth::write_scene_set(data, opt.images, 256, 320, 1);
  const auto held_files = synth::write_scene_set(held, opt.held_out, 256, 320, 777);
  write_image(work / "desk_style.png", synth::style_pattern(256, 256, 5));

  TrainConfig c;
  c.style_image_path = (work / "desk_style.png").string();
  c.dataset_root = data.string();
  c.output_dir = (work / "desk_runs").string();
  c.iterations = opt.iterations;
  c.checkpoint_interval = 100;
  c.net.downsample_channels = {16, 32, 64};
  c.net.num_residual_blocks = 3;
  c.validate();

  const auto depth = make_depth_estimator<float>(c.depth);
  EvalBackends backends;
  backends.depth = depth.get();
  TrainOptions to;
  to.on_step = [](const LossRecord& r) {
    if (r.iteration % 50 == 0)
      std::fprintf(stderr, "  iter %lld total %.4g (content %.3g style %.3g depth %.3g)\n",
                   static_cast<long long>(r.iteration), r.total, r.content, r.style, r.depth);
  };
  to.warn = [](const std::string& w) { std::fprintf(stderr, "  warning: %s\n", w.c_str()); };
  DeskRun run;
  run.entries = sweep_depth_weight(c, opt.gammas, held_files, backends, to);
  for (const auto& e : run.entries) run.logs[e.gamma] = read_training_log(e.model_path.parent_path() / "train_log.jsonl");
  run.seconds = seconds_since(t0);
  return run;
}

double window_mean(const std::vector<LossRecord>& log, std::size_t begin, std::size_t n) {
  double s = 0;
  for (std::size_t i = begin; i < begin + n; ++i) s += log[i].total;
  return s / static_cast<double>(n);
}

// 4. Desk-scale smoke on the gamma = 1e3 run.
Outcome criterion4(const DeskRun& run, const fs::path& work, const DeskOptions& opt) {
  Checks ck;
  const auto it = run.logs.find(1e3);
  if (it == run.logs.end()) return {false, "no gamma = 1e3 run in the sweep"};
  const auto& log = it->second;
  ck.expect(static_cast<Index>(log.size()) == opt.iterations, "one record per iteration");
  ck.expect(opt.iterations >= 300 && opt.iterations <= 1000, "300-1000 iterations");
  ck.expect(opt.images >= 900, "about 1k images");
  std::ifstream raw(work / "desk_runs" / "gamma_1000" / "train_log.jsonl");
  std::string line;
  int with_components = 0, lines = 0;
  while (std::getline(raw, line)) {
    const auto j = nlohmann::json::parse(line);
    ++lines;
    if (j.contains("content") && j.contains("style") && j.contains("depth") && j.contains("total") &&
        std::isfinite(j["content"].get<double>()) && std::isfinite(j["style"].get<double>()) &&
        std::isfinite(j["depth"].get<double>()))
      ++with_components;
  }
  ck.expect(lines > 0 && with_components == lines, "content, style and depth logged on every line");
  const std::size_t w = std::max<std::size_t>(1, log.size() / 10);
  double start = 0, end = 0;
  if (log.size() >= 2 * w) {
    start = window_mean(log, 0, w);
    end = window_mean(log, log.size() - w, w);
    ck.expect(end < start, "smoothed total decreases");
  } else {
    ck.expect(false, "log too short");
  }
  return ck.outcome(std::to_string(log.size()) + " iterations, batch 4, 256x256, " + std::to_string(opt.images) +
                    " images; smoothed total (" + std::to_string(w) + "-step window) " + fmt("%.4g", start) + " -> " +
                    fmt("%.4g", end) + "; wall " + fmt("%.0f", run.seconds) + " s for the sweep");
}

// 5. Depth preservation ordering and the sweep trend.
Outcome criterion5(const DeskRun& run, const DeskOptions& opt) {
  Checks ck;
  std::map<double, double> dssim, style;
  for (const auto& e : run.entries) {
    const auto& m = e.held_out.means[static_cast<std::size_t>(Metric::DepthSsim)];
    ck.expect(m.has_value(), "depth SSIM present for gamma " + fmt("%g", e.gamma));
    ck.expect(e.held_out.counts[static_cast<std::size_t>(Metric::DepthSsim)] == opt.held_out, "all held-out scored");
    dssim[e.gamma] = m.value_or(-2);
    style[e.gamma] = e.final_style;
  }
  ck.expect(opt.held_out >= 10, ">= 10 held-out images");
  ck.expect(dssim.count(0) && dssim.count(1e3), "gamma 0 and 1e3 trained");
  ck.expect(dssim[1e3] > dssim[0], "depth SSIM(1e3) > depth SSIM(0)");
  std::string trend;
  double prev_d = -3, prev_s = -1;
  for (const auto& [g, d] : dssim) {
    ck.expect(d >= prev_d, "depth SSIM non-decreasing at gamma " + fmt("%g", g));
    ck.expect(style[g] >= prev_s, "style loss non-increasing in 1/gamma at gamma " + fmt("%g", g));
    prev_d = d;
    prev_s = style[g];
    trend += (trend.empty() ? "" : ", ") + fmt("gamma %g", g) + fmt(": depth_ssim %.4f", d) + fmt(" style %.3g", style[g]);
  }
  return ck.outcome(trend + " over " + std::to_string(opt.held_out) + " held-out images");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance gate"};
  std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7};
  std::string work_dir, report;
  DeskOptions desk;
  app.add_option("--criteria", criteria, "Criteria to run (default all)")->delimiter(',');
  app.add_option("--work-dir", work_dir, "Keep artefacts here instead of a temporary directory");
  app.add_option("--images", desk.images, "Desk-scale training images");
  app.add_option("--iterations", desk.iterations, "Desk-scale iterations per model");
  app.add_option("--held-out", desk.held_out, "Held-out images for the depth comparison");
  app.add_option("--report", report, "Write results as JSON");
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<testing::TempDir> tmp;
  fs::path work;
  if (work_dir.empty()) {
    tmp = std::make_unique<testing::TempDir>("acceptance");
    work = tmp->path();
  } else {
    work = work_dir;
    fs::create_directories(work);
  }

  const std::set<int> wanted(criteria.begin(), criteria.end());
  std::optional<DeskRun> desk_run;
  std::optional<std::string> desk_error;
  auto desk_once = [&]() -> const DeskRun* {
    if (!desk_run && !desk_error) {
      try {
        desk_run = run_desk(work, desk);
      } catch (const std::exception& e) {
        desk_error = e.what();
      }
    }
    return desk_run ? &*desk_run : nullptr;
  };

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> table{
      {1, {"property suite", criterion1}},
      {2, {"gradient checks", criterion2}},
      {3, {"metric oracle equivalence", [&] { return criterion3(work); }}},
      {4, {"desk-scale training smoke",
           [&] {
             const auto* r = desk_once();
             return r ? criterion4(*r, work, desk) : Outcome{false, "desk run failed: " + *desk_error};
           }}},
      {5, {"depth preservation ordering",
           [&] {
             const auto* r = desk_once();
             return r ? criterion5(*r, desk) : Outcome{false, "desk run failed: " + *desk_error};
           }}},
      {6, {"method table fidelity", [&] { return criterion6(work); }}},
      {7, {"checkpoint resume equivalence", [&] { return criterion7(work); }}},
  };
  const std::map<int, double> limits{{1, 120}, {2, 300}, {3, 120}};

  nlohmann::json results = nlohmann::json::array();
  bool all = true;
  for (const auto& [id, entry] : table) {
    if (!wanted.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (limits.count(id) && secs > limits.at(id)) {
      o.pass = false;
      o.detail += "; runtime " + fmt("%.1f", secs) + " s over the " + fmt("%.0f", limits.at(id)) + " s limit";
    }
    all = all && o.pass;
    std::printf("criterion %d [%s] %s: %s (%.1f s)\n", id, o.pass ? "PASS" : "FAIL", entry.first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    results.push_back({{"criterion", id}, {"name", entry.first}, {"pass", o.pass}, {"detail", o.detail},
                       {"seconds", secs}});
  }
  if (!report.empty()) std::ofstream(report) << results.dump(2) << '\n';
  return all ? 0 : 1;
}
