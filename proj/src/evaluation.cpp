#include "depthstyle/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "depthstyle/image_io.hpp"

namespace depthstyle {

namespace {

constexpr int kSchemaVersion = 1;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json values_json(const MetricValues& v) {
  nlohmann::json j = nlohmann::json::object();
  for (auto m : kAllMetrics) j[metric_key(m)] = optional_json(v[static_cast<std::size_t>(m)]);
  return j;
}

nlohmann::json row_json(const PairRow& r, bool with_method) {
  nlohmann::json j{{"content", r.content}, {"stylized", r.stylized}, {"values", values_json(r.values)},
                   {"errors", r.errors}};
  if (with_method) j["method"] = r.method;
  return j;
}

std::vector<std::string> metric_keys() {
  std::vector<std::string> k;
  for (auto m : kAllMetrics) k.push_back(metric_key(m));
  return k;
}

template <class F>
void record(PairRow& row, Metric m, F&& f) {
  try {
    row[m] = f();
  } catch (const std::exception& e) {
    row.errors.push_back(metric_key(m) + ": " + e.what());
  }
}

// --- schema validation ------------------------------------------------------

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw FormatError("report field '" + where + "': " + what);
}

const nlohmann::json& field(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) bad(where + "." + key, "missing");
  return *it;
}

void expect_string(const nlohmann::json& j, const std::string& where) {
  if (!j.is_string()) bad(where, "expected a string");
}

void expect_header(const nlohmann::json& j, const std::string& schema) {
  const auto& s = field(j, "schema", "$");
  if (s != schema) bad("$.schema", "expected '" + schema + "'");
  const auto& v = field(j, "schema_version", "$");
  if (!v.is_number_integer()) bad("$.schema_version", "expected an integer");
  if (v.get<int>() != kSchemaVersion)
    throw VersionError("unsupported " + schema + " schema_version " + std::to_string(v.get<int>()));
  const auto& metrics = field(j, "metrics", "$");
  if (metrics != nlohmann::json(metric_keys())) bad("$.metrics", "unexpected metric list");
}

void expect_values(const nlohmann::json& j, const std::string& where, bool unit_interval) {
  for (auto m : kAllMetrics) {
    const auto& v = field(j, metric_key(m), where);
    if (v.is_null()) continue;
    if (!v.is_number()) bad(where + "." + metric_key(m), "expected a number or null");
    const double x = v.get<double>();
    const bool ssim_like = m == Metric::Ssim || m == Metric::DepthSsim || m == Metric::SaliencySsim || m == Metric::Hist;
    const double lo = unit_interval && !ssim_like ? 0.0 : -1.0;
    if (!(x >= lo - 1e-12 && x <= 1.0 + 1e-12)) bad(where + "." + metric_key(m), "value out of range");
  }
}

void expect_counts(const nlohmann::json& j, const std::string& where) {
  for (auto m : kAllMetrics) {
    const auto& v = field(j, metric_key(m), where);
    if (!v.is_number_integer() || v.get<int>() < 0) bad(where + "." + metric_key(m), "expected a count");
  }
}

void expect_row(const nlohmann::json& r, const std::string& where, bool with_method) {
  expect_string(field(r, "content", where), where + ".content");
  expect_string(field(r, "stylized", where), where + ".stylized");
  if (with_method) expect_string(field(r, "method", where), where + ".method");
  expect_values(field(r, "values", where), where + ".values", true);
  const auto& errors = field(r, "errors", where);
  if (!errors.is_array()) bad(where + ".errors", "expected an array");
  for (const auto& e : errors) expect_string(e, where + ".errors[]");
}

void expect_means_consistent(const nlohmann::json& means, const nlohmann::json& counts, const std::string& where) {
  for (auto m : kAllMetrics) {
    const bool has = !means.at(metric_key(m)).is_null();
    if (has != (counts.at(metric_key(m)).get<int>() > 0)) bad(where + "." + metric_key(m), "mean/count mismatch");
  }
}

// --- CSV --------------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw FormatError("unterminated quote in CSV line: " + line);
  out.push_back(cur);
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string rank_name(Rank r) { return r == Rank::Best ? "best" : r == Rank::Second ? "second" : ""; }

}  // namespace

std::string metric_key(Metric m) {
  switch (m) {
    case Metric::Ssim: return "ssim";
    case Metric::Hist: return "hist";
    case Metric::AHash: return "ahash_sim";
    case Metric::DHash: return "dhash_sim";
    case Metric::DepthSsim: return "depth_ssim";
    case Metric::SaliencySsim: return "saliency_ssim";
  }
  return "?";
}

PairRow evaluate_images(const Tensor<double>& content, const Tensor<double>& stylized, const EvalBackends& backends) {
  PairRow row;
  const Index h = content.height(), w = content.width();
  Tensor<double> sty;
  try {
    sty = resize_image_for_comparison(stylized, h, w);
  } catch (const std::exception& e) {
    row.errors.push_back(std::string("resize: ") + e.what());
    return row;
  }
  const GrayImage gc = decolorize(content), gs = decolorize(sty);
  record(row, Metric::Ssim, [&] { return ssim(gc, gs); });
  record(row, Metric::Hist, [&] { return hist_similarity(gc, gs); });
  record(row, Metric::AHash, [&] { return hash_similarity(ahash(gc), ahash(gs)); });
  record(row, Metric::DHash, [&] { return hash_similarity(dhash(gc), dhash(gs)); });
  record(row, Metric::DepthSsim, [&]() -> double {
    if (!backends.depth) throw SetupError("no depth backend configured");
    auto rgb = [](const Tensor<double>& t) {
      if (t.channels() == 3) return t.cast<float>();
      Tensor<float> out(1, 3, t.height(), t.width());
      for (Index c = 0; c < 3; ++c) out.plane(0, c) = t.plane(0, 0).cast<float>();
      return out;
    };
    const auto dc = estimate_depth(*backends.depth, rgb(content)).cast<double>();
    const auto ds = estimate_depth(*backends.depth, rgb(sty)).cast<double>();
    return ssim(minmax_normalize(dc.plane(0, 0)), minmax_normalize(ds.plane(0, 0)));
  });
  record(row, Metric::SaliencySsim, [&] {
    const auto backend = make_saliency_backend(backends.saliency);
    return ssim(backend->compute(content), backend->compute(sty));
  });
  return row;
}

PairRow evaluate_pair(const std::filesystem::path& content, const std::filesystem::path& stylized,
                      const EvalBackends& backends, const std::string& method) {
  PairRow row;
  try {
    const auto c = read_image(content).cast<double>();
    const auto s = read_image(stylized).cast<double>();
    row = evaluate_images(c, s, backends);
  } catch (const std::exception& e) {
    row.errors.push_back(std::string("decode: ") + e.what());
  }
  row.method = method;
  row.content = content.string();
  row.stylized = stylized.string();
  return row;
}

Aggregate aggregate(const std::vector<PairRow>& rows) {
  Aggregate a;
  std::array<double, kMetricCount> sums{};
  for (const auto& r : rows)
    for (std::size_t k = 0; k < kMetricCount; ++k)
      if (r.values[k]) {
        sums[k] += *r.values[k];
        ++a.counts[k];
      }
  for (std::size_t k = 0; k < kMetricCount; ++k)
    if (a.counts[k] > 0) a.means[k] = sums[k] / a.counts[k];
  return a;
}

nlohmann::json metric_report_json(const std::string& method, const std::vector<PairRow>& rows,
                                  const EvalBackends& backends) {
  const Aggregate a = aggregate(rows);
  nlohmann::json counts = nlohmann::json::object();
  for (auto m : kAllMetrics) counts[metric_key(m)] = a.counts[static_cast<std::size_t>(m)];
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rows) jrows.push_back(row_json(r, false));
  return {{"schema", "depthstyle.metric_report"},
          {"schema_version", kSchemaVersion},
          {"method", method},
          {"backends",
           {{"decolorize", "luma-bt601"},
            {"saliency", backends.saliency},
            {"depth", backends.depth ? nlohmann::json(backends.depth->name()) : nlohmann::json()}}},
          {"metrics", metric_keys()},
          {"rows", jrows},
          {"means", values_json(a.means)},
          {"counts", counts}};
}

void validate_metric_report(const nlohmann::json& j) {
  expect_header(j, "depthstyle.metric_report");
  expect_string(field(j, "method", "$"), "$.method");
  const auto& b = field(j, "backends", "$");
  expect_string(field(b, "decolorize", "$.backends"), "$.backends.decolorize");
  expect_string(field(b, "saliency", "$.backends"), "$.backends.saliency");
  const auto& d = field(b, "depth", "$.backends");
  if (!d.is_null() && !d.is_string()) bad("$.backends.depth", "expected a string or null");
  const auto& rows = field(j, "rows", "$");
  if (!rows.is_array()) bad("$.rows", "expected an array");
  for (std::size_t i = 0; i < rows.size(); ++i) expect_row(rows[i], "$.rows[" + std::to_string(i) + "]", false);
  expect_values(field(j, "means", "$"), "$.means", true);
  expect_counts(field(j, "counts", "$"), "$.counts");
  expect_means_consistent(j.at("means"), j.at("counts"), "$.means");
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open manifest " + path.string());
  std::string line;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line))
    if (!trim(line).empty()) header = split_csv_line(trim(line));
  for (auto& h : header) h = trim(h);
  const std::vector<std::string> want{"method", "content_path", "stylized_path"};
  std::array<std::size_t, 3> col{};
  for (std::size_t k = 0; k < 3; ++k) {
    auto it = std::find(header.begin(), header.end(), want[k]);
    if (it == header.end()) throw FormatError("manifest " + path.string() + " lacks column '" + want[k] + "'");
    col[k] = static_cast<std::size_t>(it - header.begin());
  }
  const auto base = path.parent_path();
  std::vector<ManifestEntry> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(trim(line));
    if (f.size() != header.size())
      throw FormatError("manifest line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                        " fields");
    auto resolve = [&](const std::string& p) {
      std::filesystem::path q = trim(p);
      return q.is_relative() ? base / q : q;
    };
    out.push_back({trim(f[col[0]]), resolve(f[col[1]]), resolve(f[col[2]])});
  }
  if (out.empty()) throw ArgumentError("manifest " + path.string() + " has no entries");
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write manifest " + path.string());
  out << "method,content_path,stylized_path\n";
  for (const auto& e : entries)
    out << csv_field(e.method) << ',' << csv_field(e.content.string()) << ',' << csv_field(e.stylized.string()) << '\n';
}

MethodTable summarize(std::vector<PairRow> rows) {
  MethodTable t;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<PairRow>> groups;
  for (const auto& r : rows) {
    auto [it, fresh] = index.emplace(r.method, groups.size());
    if (fresh) {
      groups.emplace_back();
      MethodSummary fresh_summary;
      fresh_summary.method = r.method;
      t.methods.push_back(std::move(fresh_summary));
    }
    groups[it->second].push_back(r);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& s = t.methods[g];
    s.pairs = static_cast<int>(groups[g].size());
    s.stats = aggregate(groups[g]);
    std::set<std::string> missing;
    for (const auto& r : groups[g])
      for (const auto& e : r.errors)
        if (e.starts_with("decode: ")) {
          for (const auto& p : {r.content, r.stylized})
            if (!std::filesystem::is_regular_file(p)) missing.insert(p);
          if (missing.empty()) missing.insert(r.stylized);
        }
    s.missing_files.assign(missing.begin(), missing.end());
  }
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    std::vector<double> distinct;
    for (const auto& s : t.methods)
      if (s.stats.means[k]) distinct.push_back(*s.stats.means[k]);
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto& s : t.methods) {
      if (!s.stats.means[k]) continue;
      if (*s.stats.means[k] == distinct[0]) s.rank[k] = Rank::Best;
      else if (distinct.size() > 1 && *s.stats.means[k] == distinct[1]) s.rank[k] = Rank::Second;
    }
  }
  t.rows = std::move(rows);
  return t;
}

MethodTable compare_methods(const std::vector<ManifestEntry>& manifest, const EvalBackends& backends) {
  if (manifest.empty()) throw ArgumentError("compare_methods needs a nonempty manifest");
  std::vector<PairRow> rows;
  rows.reserve(manifest.size());
  for (const auto& e : manifest) rows.push_back(evaluate_pair(e.content, e.stylized, backends, e.method));
  return summarize(std::move(rows));
}

nlohmann::json method_table_json(const MethodTable& table) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& s : table.methods) {
    nlohmann::json counts = nlohmann::json::object(), rank = nlohmann::json::object();
    for (auto m : kAllMetrics) {
      const auto k = static_cast<std::size_t>(m);
      counts[metric_key(m)] = s.stats.counts[k];
      rank[metric_key(m)] = s.rank[k] == Rank::None ? nlohmann::json() : nlohmann::json(rank_name(s.rank[k]));
    }
    methods.push_back({{"method", s.method},
                       {"pairs", s.pairs},
                       {"means", values_json(s.stats.means)},
                       {"counts", counts},
                       {"rank", rank},
                       {"missing_files", s.missing_files}});
  }
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) rows.push_back(row_json(r, true));
  return {{"schema", "depthstyle.method_table"},
          {"schema_version", kSchemaVersion},
          {"metrics", metric_keys()},
          {"methods", methods},
          {"rows", rows}};
}

void validate_method_table(const nlohmann::json& j) {
  expect_header(j, "depthstyle.method_table");
  const auto& methods = field(j, "methods", "$");
  if (!methods.is_array() || methods.empty()) bad("$.methods", "expected a nonempty array");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string w = "$.methods[" + std::to_string(i) + "]";
    const auto& m = methods[i];
    expect_string(field(m, "method", w), w + ".method");
    const auto& pairs = field(m, "pairs", w);
    if (!pairs.is_number_integer() || pairs.get<int>() < 1) bad(w + ".pairs", "expected a positive integer");
    expect_values(field(m, "means", w), w + ".means", true);
    expect_counts(field(m, "counts", w), w + ".counts");
    expect_means_consistent(m.at("means"), m.at("counts"), w + ".means");
    const auto& rank = field(m, "rank", w);
    for (auto metric : kAllMetrics) {
      const auto& r = field(rank, metric_key(metric), w + ".rank");
      if (!r.is_null() && r != "best" && r != "second") bad(w + ".rank." + metric_key(metric), "bad rank");
    }
    const auto& miss = field(m, "missing_files", w);
    if (!miss.is_array()) bad(w + ".missing_files", "expected an array");
  }
  const auto& rows = field(j, "rows", "$");
  if (!rows.is_array()) bad("$.rows", "expected an array");
  for (std::size_t i = 0; i < rows.size(); ++i) expect_row(rows[i], "$.rows[" + std::to_string(i) + "]", true);
}

std::string method_table_csv(const MethodTable& table) {
  std::ostringstream out;
  out << "method,pairs";
  for (auto m : kAllMetrics) out << ',' << metric_key(m);
  for (auto m : kAllMetrics) out << ',' << metric_key(m) << "_rank";
  out << '\n';
  for (const auto& s : table.methods) {
    out << csv_field(s.method) << ',' << s.pairs;
    for (std::size_t k = 0; k < kMetricCount; ++k) out << ',' << (s.stats.means[k] ? fmt(*s.stats.means[k]) : "");
    for (std::size_t k = 0; k < kMetricCount; ++k) out << ',' << rank_name(s.rank[k]);
    out << '\n';
  }
  return out.str();
}

}  // namespace depthstyle
