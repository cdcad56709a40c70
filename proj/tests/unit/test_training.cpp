#include <doctest.h>

#include <fstream>
#include <numeric>

#include "depthstyle/training.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

using namespace depthstyle;
using depthstyle::testing::TempDir;
using depthstyle::testing::tiny_config;

namespace {

void truncate_file(const std::filesystem::path& p, std::size_t keep) {
  std::ifstream in(p, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(keep));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {(std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()};
}

double window_mean(const std::vector<LossRecord>& log, std::size_t begin, std::size_t count) {
  double s = 0;
  for (std::size_t i = begin; i < begin + count; ++i) s += log[i].total;
  return s / static_cast<double>(count);
}

}  // namespace

TEST_CASE("total loss examples") {
  CHECK(total_loss(1, 1, 1, 1, 2, 3) == 6.0);
  CHECK(total_loss(1e5, 1e10, 0, 2e-5, 3e-10, 99) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(total_loss(1e5, 1e10, 1e3, 1e-5, 1e-10, 1e-3) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS_AS(total_loss(-1, 1, 1, 1, 1, 1), ConfigError);
  CHECK_THROWS_AS(total_loss(1, 1, -1e-9, 1, 1, 1), ConfigError);
}

TEST_CASE("total loss is linear in each weight and component") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    double w[3], l[3];
    for (int i = 0; i < 3; ++i) w[i] = rng.uniform(0, 10), l[i] = rng.uniform(0, 10);
    const double base = total_loss(w[0], w[1], w[2], l[0], l[1], l[2]);
    const double k = rng.uniform(0, 3);
    CHECK(total_loss(k * w[0], w[1], w[2], l[0], l[1], l[2]) - base ==
          doctest::Approx((k - 1) * w[0] * l[0]).epsilon(1e-9));
    CHECK(total_loss(w[0], w[1], w[2], l[0], l[1], k * l[2]) - base ==
          doctest::Approx((k - 1) * w[2] * l[2]).epsilon(1e-9));
  }
}

TEST_CASE("train config defaults, text round trip and errors") {
  const TrainConfig d;
  CHECK(d.content_weight == 1e5);
  CHECK(d.style_weight == 1e10);
  CHECK(d.depth_weight == 1e3);
  CHECK(d.learning_rate == 1e-3);
  CHECK(d.batch_size == 4);
  CHECK(d.image_size == 256);
  CHECK(d.epochs == 2);
  CHECK(d.total_iterations(80000) == 40000);
  d.validate();

  TrainConfig c = d;
  c.style_image_path = "style one.png";
  c.depth_weight = 0;
  c.style_layers = {"relu1_1", "relu3_2"};
  c.net.downsample_channels = {8, 16};
  c.net.upsample_mode = UpsampleMode::TransposedConv;
  c.seed = 12345678901ull;
  c.depth_minmax = true;
  const TrainConfig back = TrainConfig::parse(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.style_image_path == "style one.png");
  CHECK(back.style_layers == c.style_layers);
  CHECK(back.net == c.net);
  CHECK(back.seed == c.seed);
  CHECK(back.depth_minmax);

  const TrainConfig p = TrainConfig::parse("# comment\n depth_weight = 1e4  # trailing\n\nbatch_size=2\n");
  CHECK(p.depth_weight == 1e4);
  CHECK(p.batch_size == 2);
  CHECK_THROWS_AS(TrainConfig::parse("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::parse("batch_size = two\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::parse("batch_size\n"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::parse("depth_weight = -1\n").validate(), ConfigError);
  CHECK_THROWS_AS(TrainConfig::parse("image_size = 32\n").validate(), ConfigError);
  CHECK_THROWS_AS(TrainConfig::parse("batch_size = 0\n").validate(), ConfigError);
  CHECK_THROWS_AS(TrainConfig::load("/nonexistent/config.txt"), ConfigError);
}

TEST_CASE("dataset batches, shapes and deterministic order") {
  TempDir dir("ds");
  synth::write_scene_set(dir.path(), 10, 64, 96, 3);
  Dataset a(dir.path(), 64, 11), b(dir.path(), 64, 11), other(dir.path(), 64, 12);
  CHECK(a.size() == 10);
  for (int i = 0; i < 4; ++i) {
    const auto x = a.next_batch(4);
    CHECK(x.shape() == Tensor<float>::Shape{4, 3, 64, 64});
    CHECK(x.flat().minCoeff() >= 0.0f);
    CHECK(x.flat().maxCoeff() <= 1.0f);
    CHECK(x == b.next_batch(4));
  }
  CHECK(a.cursor().epoch == 1);
  CHECK(a.cursor() == b.cursor());

  Dataset fresh(dir.path(), 64, 11);
  CHECK_FALSE(fresh.next_batch(10) == other.next_batch(10));
}

TEST_CASE("dataset visits each file once per epoch") {
  TempDir dir("ds");
  synth::write_scene_set(dir.path(), 6, 64, 64, 3);
  Dataset ds(dir.path(), 64, 1);
  std::vector<Tensor<float>> singles;
  for (const auto& f : ds.files()) singles.push_back(resize_and_center_crop(read_image(f), 64));
  const auto epoch0 = ds.next_batch(6);
  std::vector<int> hits(6, 0);
  for (Index n = 0; n < 6; ++n) {
    Tensor<float> one(1, 3, 64, 64);
    one.instance(0) = epoch0.instance(n);
    for (std::size_t i = 0; i < singles.size(); ++i)
      if (one == singles[i]) ++hits[i];
  }
  CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 6);
  CHECK(*std::min_element(hits.begin(), hits.end()) == 1);
}

TEST_CASE("dataset skips a corrupt file and warns once") {
  TempDir dir("ds");
  const auto files = synth::write_scene_set(dir.path(), 10, 64, 96, 3);
  truncate_file(files[4], 40);
  std::vector<std::string> warnings;
  Dataset ds(dir.path(), 64, 5, [&](const std::string& w) { warnings.push_back(w); });
  for (int i = 0; i < 6; ++i) CHECK(ds.next_batch(4).batch() == 4);
  CHECK(ds.skipped() == 1);
  CHECK(ds.usable() == 9);
  CHECK(warnings.size() == 1);
  CHECK(warnings[0].find(files[4].filename().string()) != std::string::npos);
  CHECK(ds.bad_files().count(files[4].filename().string()) == 1);
}

TEST_CASE("dataset errors") {
  TempDir dir("ds");
  CHECK_THROWS_AS(Dataset(dir.path(), 64, 1), ArgumentError);
  CHECK_THROWS_AS(Dataset(dir / "missing", 64, 1), ArgumentError);
  std::ofstream(dir / "a.png") << "not an image";
  Dataset bad(dir.path(), 64, 1);
  CHECK_THROWS_AS(bad.next_batch(1), ArgumentError);
}

TEST_CASE("resize policy keeps aspect ratio and center crops") {
  Tensor<float> img(1, 3, 40, 80);
  for (Index y = 0; y < 40; ++y)
    for (Index x = 0; x < 80; ++x)
      for (Index c = 0; c < 3; ++c) img(0, c, y, x) = x < 20 || x >= 60 ? 1.0f : 0.25f;
  const auto s = resize_short_side(img, 20);
  CHECK(s.shape() == Tensor<float>::Shape{1, 3, 20, 40});
  const auto crop = resize_and_center_crop(img, 20);
  CHECK(crop.shape() == Tensor<float>::Shape{1, 3, 20, 20});
  CHECK(crop.flat().maxCoeff() == doctest::Approx(0.25f));
  CHECK(resize_and_center_crop(img, 64).shape() == Tensor<float>::Shape{1, 3, 64, 64});
}

TEST_CASE("adam matches a scalar reference") {
  ParamSet<float> p;
  p.add("w", Tensor<float>::constant(1, 1, 1, 2, 0.5f));
  auto state = AdamState<float>::like(p);
  const AdamOptions opt{0.01, 0.9, 0.999, 1e-8};
  double ref[2] = {0.5, 0.5}, m[2] = {0, 0}, v[2] = {0, 0};
  const double g_seq[3][2] = {{1.0, -2.0}, {0.5, 0.0}, {-3.0, 1.0}};
  for (int t = 1; t <= 3; ++t) {
    ParamSet<float> g = p.zeros_like();
    for (int i = 0; i < 2; ++i) {
      g.at("w").data()[i] = static_cast<float>(g_seq[t - 1][i]);
      m[i] = 0.9 * m[i] + 0.1 * g_seq[t - 1][i];
      v[i] = 0.999 * v[i] + 0.001 * g_seq[t - 1][i] * g_seq[t - 1][i];
      ref[i] -= 0.01 * (m[i] / (1 - std::pow(0.9, t))) / (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
    }
    adam_step(p, g, state, opt);
    for (int i = 0; i < 2; ++i) CHECK(p.at("w").data()[i] == doctest::Approx(ref[i]).epsilon(1e-6));
  }
  CHECK(state.t == 3);
}

TEST_CASE("loss record and log round trip") {
  LossRecord r;
  r.iteration = 3;
  r.epoch = 1;
  r.content = 0.1;
  r.style = 1e-12;
  r.depth = 2.5;
  r.total = 7;
  r.seconds = 0.25;
  r.skipped_files = 2;
  const auto back = LossRecord::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(back.to_json() == r.to_json());
  CHECK_THROWS_AS(read_training_log("/nonexistent/log.jsonl"), ArgumentError);
}

TEST_CASE("training smoke run lowers the smoothed loss and logs every component") {
  TempDir dir("train");
  TrainConfig c = tiny_config(dir.path(), 32);
  c.iterations = 50;
  c.batch_size = 4;
  c.learning_rate = 1e-2;
  c.checkpoint_interval = 20;
  Index seen = 0;
  TrainOptions opt;
  opt.on_step = [&](const LossRecord&) { ++seen; };
  const auto before = make_feature_extractor<float>(c.backbone)->checksum();
  const auto depth_before = make_depth_estimator<float>(c.depth)->checksum();
  const TrainResult r = train(c, opt);
  CHECK(seen == 50);
  REQUIRE(r.log.size() == 50);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto& e = r.log[i];
    CHECK(e.iteration == static_cast<Index>(i + 1));
    CHECK(std::isfinite(e.total));
    CHECK(e.content > 0);
    CHECK(e.style > 0);
    CHECK(e.depth > 0);
    CHECK(e.total == doctest::Approx(total_loss(c.content_weight, c.style_weight, c.depth_weight, e.content, e.style,
                                                e.depth)));
  }
  CHECK(window_mean(r.log, 40, 10) < window_mean(r.log, 0, 10));
  CHECK(r.backbone_checksum == before);
  CHECK(r.depth_checksum == depth_before);

  const auto disk = read_training_log(r.log_path);
  REQUIRE(disk.size() == 50);
  CHECK(disk.back().to_json() == r.log.back().to_json());
  CHECK(std::filesystem::exists(r.checkpoint_path));
  const auto loaded = TransformNet<float>::load(r.model_path);
  CHECK(loaded.params().checksum() == r.net.params().checksum());
  CHECK(loaded.params().checksum() != init_transform_net<float>(c.net, 0).params().checksum());
}

TEST_CASE("identical runs log identical losses") {
  TempDir a("train"), b("train");
  TrainConfig ca = tiny_config(a.path()), cb = tiny_config(b.path());
  ca.iterations = cb.iterations = 4;
  const auto ra = train(ca), rb = train(cb);
  for (std::size_t i = 0; i < 4; ++i) CHECK(ra.log[i].total == rb.log[i].total);
}

TEST_CASE("gamma zero still records the unweighted depth term") {
  TempDir dir("train");
  TrainConfig c = tiny_config(dir.path());
  c.iterations = 3;
  c.depth_weight = 0;
  const auto r0 = train(c);
  c.depth_weight = 1e3;
  c.output_dir = (dir / "g1000").string();
  const auto r1 = train(c);
  CHECK(r0.log[0].depth > 0);
  // Same seed and data: the first step sees identical weights, only its total differs.
  CHECK(r0.log[0].depth == doctest::Approx(r1.log[0].depth).epsilon(1e-6));
  CHECK(r0.log[0].content == doctest::Approx(r1.log[0].content).epsilon(1e-6));
  CHECK(r0.log[0].total == doctest::Approx(c.content_weight * r0.log[0].content + c.style_weight * r0.log[0].style));
  CHECK(r1.log[0].total > r0.log[0].total);
  CHECK(r0.log[2].total != r1.log[2].total);
}

TEST_CASE("resume reproduces the uninterrupted trajectory") {
  TempDir dir("resume");
  TrainConfig c = tiny_config(dir.path());
  c.iterations = 7;
  c.checkpoint_interval = 4;
  c.output_dir = (dir / "full").string();
  const auto full = train(c);

  TrainConfig first = c;
  first.output_dir = (dir / "part").string();
  TrainOptions stop;
  stop.stop_at = 4;
  const auto head = train(first, stop);
  REQUIRE(head.log.size() == 4);

  TrainOptions opt;
  opt.resume = head.checkpoint_path;
  const auto tail = train(first, opt);
  REQUIRE(tail.log.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(tail.log[i].iteration == full.log[4 + i].iteration);
    CHECK(tail.log[i].total == doctest::Approx(full.log[4 + i].total).epsilon(1e-4));
  }
  CHECK(read_training_log(tail.log_path).size() == 7);
  CHECK(tail.net.params().checksum() == full.net.params().checksum());

  CHECK_THROWS_AS(Trainer::resume(full.model_path), FormatError);
}

TEST_CASE("non-finite loss aborts and leaves the last checkpoint intact") {
  TempDir dir("nan");
  TrainConfig c = tiny_config(dir.path());
  c.iterations = 3;
  c.checkpoint_interval = 1;
  TrainOptions two;
  two.stop_at = 2;
  const auto ok = train(c, two);
  const std::string saved = slurp(ok.checkpoint_path);

  TrainConfig bad = c;
  bad.content_weight = std::numeric_limits<double>::infinity();
  Trainer t(bad);
  const auto sum = t.net().params().checksum();
  CHECK_THROWS_AS(t.step(), NumericalError);
  CHECK(t.net().params().checksum() == sum);
  CHECK(t.iteration() == 0);

  try {
    train(bad);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
    CHECK(std::string(e.what()).find("no checkpoint") != std::string::npos);
  }
  CHECK(slurp(ok.checkpoint_path) == saved);

  TrainOptions opt;
  opt.resume = ok.checkpoint_path;
  // Resuming keeps the stored (finite) config, so the run completes.
  CHECK(train(bad, opt).log.size() == 1);
}

TEST_CASE("missing assets are setup errors") {
  TempDir dir("assets");
  TrainConfig c = tiny_config(dir.path());
  TrainConfig no_style = c;
  no_style.style_image_path = (dir / "missing.png").string();
  CHECK_THROWS_AS(Trainer{no_style}, SetupError);
  TrainConfig no_data = c;
  no_data.dataset_root = (dir / "nothing").string();
  CHECK_THROWS_AS(Trainer{no_data}, SetupError);
  TrainConfig vgg = c;
  vgg.backbone.kind = "vgg16";
  vgg.backbone.weights = dir / "vgg16.dsa";
  CHECK_THROWS_AS(Trainer{vgg}, SetupError);
}

TEST_CASE("depth weight sweep sorts gammas and evaluates held-out images") {
  TempDir dir("sweep");
  TrainConfig c = tiny_config(dir.path());
  c.iterations = 2;
  const auto held = synth::write_scene_set(dir / "held", 2, 64, 80, 99);
  const auto depth = make_depth_estimator<float>(c.depth);
  EvalBackends backends;
  backends.depth = depth.get();

  const auto single = sweep_depth_weight(c, {0}, held, backends);
  REQUIRE(single.size() == 1);
  CHECK(single[0].gamma == 0);
  CHECK(std::filesystem::exists(single[0].model_path));

  const auto entries = sweep_depth_weight(c, {1e3, 0, 10, 1e3}, held, backends);
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].gamma == 0);
  CHECK(entries[1].gamma == 10);
  CHECK(entries[2].gamma == 1e3);
  CHECK(entries[2].model_path.parent_path().filename() == "gamma_1000");
  for (const auto& e : entries) {
    CHECK(e.held_out.counts[static_cast<std::size_t>(Metric::DepthSsim)] == 2);
    CHECK(e.held_out.means[static_cast<std::size_t>(Metric::DepthSsim)].has_value());
    CHECK(e.final_style > 0);
  }
  const auto j = sweep_json(entries);
  CHECK(j.at("entries").size() == 3);
  CHECK(j.at("entries")[1].at("gamma") == 10.0);
  CHECK_THROWS_AS(sweep_depth_weight(c, {}, held, backends), ConfigError);
  CHECK_THROWS_AS(sweep_depth_weight(c, {-1}, held, backends), ConfigError);
}
