#include "lab/harness.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "lab/extension_field.hpp"
#include "lab/kakeya_tubes.hpp"
#include "lab/schema_text.hpp"
#include "lab/shell_multiplier.hpp"
#include "lab/sphere_caps.hpp"
#include "lab/two_scale_chain.hpp"

namespace lab {

namespace fs = std::filesystem;

namespace {

Fit least_squares(const std::vector<std::pair<double, double>>& pts) {
  const int m = static_cast<int>(pts.size());
  double sx = 0, sy = 0;
  for (auto& [x, y] : pts) sx += x, sy += y;
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (auto& [x, y] : pts) sxx += (x - mx) * (x - mx), sxy += (x - mx) * (y - my);
  if (!(sxx > 1e-300)) throw DomainError("fit needs at least two distinct x values");
  Fit f;
  f.points = m;
  f.p = sxy / sxx;
  double b = my - f.p * mx;
  f.C = std::exp(b);
  double ss = 0;
  for (auto& [x, y] : pts) ss += std::pow(y - (b + f.p * x), 2);
  f.rms = std::sqrt(ss / m);
  return f;
}

}  // namespace

Fit fit_log_exponent(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4) throw DomainError("fit needs at least 4 points");
  std::vector<std::pair<double, double>> t;
  for (auto& [x, y] : points) {
    if (!(x >= std::numbers::e)) throw DomainError("fit needs x >= e");
    if (!(y > 0)) throw DomainError("fit needs y > 0");
    t.emplace_back(std::log(std::log(x)), std::log(y));
  }
  return least_squares(t);
}

Fit fit_power(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4) throw DomainError("fit needs at least 4 points");
  std::vector<std::pair<double, double>> t;
  for (auto& [x, y] : points) {
    if (!(x > 0) || !(y > 0)) throw DomainError("fit needs positive x and y");
    t.emplace_back(std::log(x), std::log(y));
  }
  return least_squares(t);
}

// ---------------------------------------------------------------------------
// config schema

const json& config_schema() {
  static const json schema = json::parse(kConfigSchemaText);
  return schema;
}

namespace {

std::string join_path(const std::string& base, const std::string& key) { return base + "/" + key; }

void check_node(const json& v, const json& s, const std::string& path) {
  if (s.contains("type")) {
    const std::string t = s["type"];
    bool ok = t == "object"    ? v.is_object()
              : t == "array"   ? v.is_array()
              : t == "string"  ? v.is_string()
              : t == "boolean" ? v.is_boolean()
              : t == "integer" ? v.is_number_integer()
              : t == "number"  ? v.is_number()
                               : false;
    if (!ok) throw ConfigError(path.empty() ? "/" : path, "expected " + t);
  }
  if (s.contains("enum")) {
    bool hit = false;
    for (const auto& e : s["enum"]) hit = hit || e == v;
    if (!hit) throw ConfigError(path, "value not allowed: " + v.dump());
  }
  if (v.is_number()) {
    double x = v.get<double>();
    if (s.contains("minimum") && x < s["minimum"].get<double>())
      throw ConfigError(path, "below minimum " + s["minimum"].dump());
    if (s.contains("maximum") && x > s["maximum"].get<double>())
      throw ConfigError(path, "above maximum " + s["maximum"].dump());
    if (s.contains("exclusiveMinimum") && !(x > s["exclusiveMinimum"].get<double>()))
      throw ConfigError(path, "must exceed " + s["exclusiveMinimum"].dump());
    if (s.contains("exclusiveMaximum") && !(x < s["exclusiveMaximum"].get<double>()))
      throw ConfigError(path, "must be below " + s["exclusiveMaximum"].dump());
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
      throw ConfigError(path, "needs at least " + s["minItems"].dump() + " items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) check_node(v[i], s["items"], join_path(path, std::to_string(i)));
  }
  if (v.is_object()) {
    const json props = s.value("properties", json::object());
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (props.contains(it.key()))
        check_node(it.value(), props[it.key()], join_path(path, it.key()));
      else if (s.contains("additionalProperties") && s["additionalProperties"] == false)
        throw ConfigError(join_path(path, it.key()), "unknown key");
    }
    if (s.contains("required"))
      for (const auto& k : s["required"])
        if (!v.contains(k.get<std::string>())) throw ConfigError(join_path(path, k), "missing");
  }
}

void fill_defaults(json& v, const json& s) {
  if (!v.is_object() || !s.contains("properties")) return;
  for (auto it = s["properties"].begin(); it != s["properties"].end(); ++it) {
    if (!v.contains(it.key()) && it.value().contains("default")) v[it.key()] = it.value()["default"];
    if (v.contains(it.key())) fill_defaults(v[it.key()], it.value());
  }
}

json pow2_list(int from, int to) {
  json a = json::array();
  for (int k = from; k <= to; ++k) a.push_back(std::ldexp(1.0, k));
  return a;
}

// Sweep lists a kind needs when the config leaves them out.
void kind_defaults(const std::string& kind, json& c) {
  const int n = c["n"];
  auto put = [&](const char* key, json v) {
    if (!c.contains(key)) c[key] = std::move(v);
  };
  if (kind == "caps") put("s", json::array({0.25}));
  if (kind == "rlp") put("delta", pow2_list(-6, -4));
  if (kind == "decouple") {
    put("delta", pow2_list(-6, -4));
    put("q", json::array({2.0 * n / (n - 1)}));
  }
  if (kind == "extension") {
    put("R", json::array({16.0}));
    put("s", json::array({0.25}));
  }
  if (kind == "kakeya") {
    put("N", n == 2 ? pow2_list(3, 5) : pow2_list(2, 3));
    put("r", json::array({2.0}));
  }
  if (kind == "bush") {
    put("N", n == 2 ? pow2_list(3, 6) : pow2_list(2, 4));
    put("r", json::array({n / (n - 1.0)}));
  }
  if (kind == "twoscale") put("delta", json::array({0.125}));
  if (kind == "restrict" || kind == "remark") put("R", json::array({16.0, 64.0, 256.0}));
  if (kind == "fit" && !c.contains("input")) throw ConfigError("/input", "fit needs an input CSV");
}

}  // namespace

void validate_config(const json& config) {
  if (!config.is_object()) throw ConfigError("/", "config must be a JSON object");
  check_node(config, config_schema(), "");
}

json resolve_config(const std::string& kind, const json& config, std::optional<std::uint64_t> seed) {
  validate_config(config);
  const auto& kinds = config_schema()["properties"]["kind"]["enum"];
  if (std::find(kinds.begin(), kinds.end(), json(kind)) == kinds.end()) throw ConfigError("/kind", "unknown kind " + kind);
  if (config.contains("kind") && config["kind"] != kind)
    throw ConfigError("/kind", "config is for " + config["kind"].get<std::string>() + ", not " + kind);
  json c = config;
  c["kind"] = kind;
  if (seed) c["seed"] = *seed;
  fill_defaults(c, config_schema());
  c.erase("output_dir");
  kind_defaults(kind, c);
  // fixed key order so the hash does not depend on how the file was written
  json sorted = json::object();
  std::vector<std::string> keys;
  for (auto it = c.begin(); it != c.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) {
    json v = c[k];
    if (v.is_object()) {
      json inner = json::object();
      std::vector<std::string> ik;
      for (auto it = v.begin(); it != v.end(); ++it) ik.push_back(it.key());
      std::sort(ik.begin(), ik.end());
      for (const auto& i : ik) inner[i] = v[i];
      v = inner;
    }
    sorted[k] = v;
  }
  return sorted;
}

// ---------------------------------------------------------------------------
// CSV and SVG

std::vector<std::vector<std::string>> read_csv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open CSV");
  auto split = [](const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    return f;
  };
  std::string line;
  std::vector<std::vector<std::string>> rows;
  if (!std::getline(in, line)) return rows;
  if (header) *header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split(line));
  return rows;
}

std::string svg_plot(const std::vector<std::pair<double, double>>& pts, const Fit* fit, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel, bool log_model) {
  const double W = 640, H = 420, L = 70, Rm = 20, T = 40, B = 50;
  std::vector<std::pair<double, double>> u;
  for (auto& [x, y] : pts)
    if (x > 1 && y > 0 && std::isfinite(y)) u.emplace_back(std::log(x), std::log(y));
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << H / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << H / 2 << ")\">" << ylabel
    << "</text>\n";
  if (u.empty()) {
    o << "</svg>\n";
    return o.str();
  }
  double x0 = u[0].first, x1 = x0, y0 = u[0].second, y1 = y0;
  for (auto& [x, y] : u) x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  if (fit) {
    for (double x : {x0, x1}) {
      double yy = std::log(fit->C) + fit->p * (log_model ? std::log(x) : x);
      y0 = std::min(y0, yy), y1 = std::max(y1, yy);
    }
  }
  if (x1 - x0 < 1e-9) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-9) y0 -= 0.1, y1 += 0.1;
  double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;
  auto X = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - Rm); };
  auto Y = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - Rm << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"#444\"/>\n";
  char buf[64];
  for (int i = 0; i <= 4; ++i) {
    double x = x0 + (x1 - x0) * i / 4, y = y0 + (y1 - y0) * i / 4;
    std::snprintf(buf, sizeof buf, "%.3g", std::exp(x));
    o << "<text x=\"" << X(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << buf
      << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", std::exp(y));
    o << "<text x=\"" << L - 6 << "\" y=\"" << Y(y) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << buf
      << "</text>\n";
  }
  for (auto& [x, y] : u) o << "<circle cx=\"" << X(x) << "\" cy=\"" << Y(y) << "\" r=\"3\" fill=\"#1f5fa8\"/>\n";
  if (fit) {
    o << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"";
    for (int i = 0; i <= 64; ++i) {
      double x = x0 + (x1 - x0) * i / 64;
      double y = std::log(fit->C) + fit->p * (log_model ? std::log(x) : x);
      o << X(x) << "," << Y(y) << " ";
    }
    o << "\"/>\n";
    std::snprintf(buf, sizeof buf, "p = %.4f", fit->p);
    o << "<text x=\"" << W - Rm - 6 << "\" y=\"" << T + 16 << "\" text-anchor=\"end\" font-size=\"12\">" << buf
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// experiments

namespace {

struct Point {
  std::vector<RatioReport> rows;
  json detail = json::object();
};

struct Run {
  std::string kind;
  json cfg;
  int n = 2;
  std::uint64_t seed = 1;
  EvalOptions eval;
  std::string dir, id, hash;
  RunOptions opts;
  std::vector<Point> points;
  json summary = json::object();
  std::vector<std::pair<double, double>> plot_points;
  std::optional<Fit> plot_fit;
  std::string plot_x, plot_y;
  bool plot_log = true;
};

std::vector<double> list(const json& c, const char* key) {
  std::vector<double> v;
  if (c.contains(key))
    for (const auto& x : c[key]) v.push_back(x.get<double>());
  return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Evaluates `count` sweep points, in parallel when asked; rows land in point
// order whatever the schedule. Points after a failure are skipped, finished
// ones are kept, and the first failure is rethrown.
template <class F>
void sweep(Run& run, int count, F&& f) {
  run.points.assign(count, Point{});
  std::vector<char> done(count, 0);
  std::exception_ptr err;
  int failed_at = count;
  const bool par = run.opts.threads > 1;
#pragma omp parallel for schedule(dynamic, 1) if (par)
  for (int i = 0; i < count; ++i) {
    bool skip;
#pragma omp critical(lab_sweep)
    skip = i > failed_at;
    if (skip) continue;
    try {
      run.points[i] = f(i);
      done[i] = 1;
    } catch (...) {
#pragma omp critical(lab_sweep)
      if (i < failed_at) failed_at = i, err = std::current_exception();
    }
  }
  CsvSink sink((fs::path(run.dir) / "results.csv").string());
  for (int i = 0; i < count; ++i) {
    if (!done[i]) {
      if (i >= failed_at) break;
      continue;
    }
    for (const RatioReport& r : run.points[i].rows) sink.append(r, run.id, run.hash);
  }
  if (err) std::rethrow_exception(err);
}

json fit_json(const std::optional<Fit>& f) {
  if (!f) return nullptr;
  return json{{"C", f->C}, {"p", f->p}, {"rms", f->rms}, {"points", f->points}};
}

std::optional<Fit> try_fit(const std::vector<std::pair<double, double>>& pts, bool log_model, json& note) {
  try {
    return log_model ? fit_log_exponent(pts) : fit_power(pts);
  } catch (const DomainError& e) {
    note = e.what();
    return std::nullopt;
  }
}

void fit_rows(Run& run, const std::string& op, const std::string& xname, bool log_model, const char* key) {
  std::vector<std::pair<double, double>> pts;
  for (const Point& p : run.points)
    for (const RatioReport& r : p.rows) {
      if (r.op != op || r.degenerate) continue;
      double x = xname == "delta" ? 1 / r.delta : r.R;
      pts.emplace_back(x, r.ratio);
    }
  json note = nullptr;
  std::optional<Fit> f = try_fit(pts, log_model, note);
  run.summary["fits"][key] = fit_json(f);
  if (!f) run.summary["fits"][std::string(key) + "_error"] = note;
  if (run.plot_points.empty()) {
    run.plot_points = pts;
    run.plot_fit = f;
    run.plot_x = xname == "delta" ? "1/delta" : xname;
    run.plot_y = op + " ratio";
    run.plot_log = log_model;
  }
}

double max_ratio(const Run& run, const std::string& op) {
  double m = 0;
  for (const Point& p : run.points)
    for (const RatioReport& r : p.rows)
      if (r.op == op && !r.degenerate) m = std::max(m, r.ratio);
  return m;
}

// Cap-constant values uniform in [-1, 1]: c = v^2, sign of v.
CapCoefficients random_coefficients(int K, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  CapCoefficients c{Vec(K), Vec(K)};
  for (int a = 0; a < K; ++a) {
    double v = 2 * uniform01(g) - 1;
    c.c(a) = v * v;
    c.signs(a) = v < 0 ? -1 : 1;
  }
  return c;
}

double sphere_lq(const Density& g, double q) {
  const SphereQuadrature& Q = g.caps->quadrature();
  return std::pow((Q.weights.array() * g.node_values.cwiseAbs().array().pow(q)).sum(), 1 / q);
}

// --- caps
void run_caps(Run& run) {
  std::vector<double> ss = list(run.cfg, "s");
  sweep(run, static_cast<int>(ss.size()), [&](int i) {
    auto t0 = std::chrono::steady_clock::now();
    CapSystem sys = cap_decompose(run.n, ss[i]);
    CapAudit a = audit_caps(sys, 10000, derive_seed(run.seed, i));
    json j = to_json(sys);
    json audit{{"caps", a.caps},
               {"expected", a.expected},
               {"partition_error", a.partition_error},
               {"support_ratio", a.support_ratio},
               {"weight_error", a.weight_error},
               {"uncovered", a.uncovered},
               {"min_separation", a.min_separation},
               {"ok", a.ok()}};
    j["audit"] = audit;
    char name[64];
    std::snprintf(name, sizeof name, "caps_%02d.json", i);
    write_json((fs::path(run.dir) / name).string(), j);
    Point p;
    RatioReport r;
    r.module = "sphere_caps";
    r.op = "cap_decompose";
    r.n = run.n;
    r.delta = ss[i] * ss[i];
    r.seed = derive_seed(run.seed, i);
    r.lhs = a.caps;
    r.rhs = a.expected;
    r.finish();
    r.stderr = a.partition_error;
    r.runtime_s = seconds_since(t0);
    p.rows.push_back(r);
    audit["s"] = ss[i];
    audit["file"] = name;
    p.detail = audit;
    return p;
  });
  json audits = json::array();
  bool ok = true;
  for (const Point& p : run.points) {
    audits.push_back(p.detail);
    ok = ok && p.detail["ok"].get<bool>();
  }
  run.summary["audits"] = audits;
  run.summary["all_ok"] = ok;
  if (!ok) throw CertificationError("cap audit failed");
}

// --- rlp
void run_rlp(Run& run) {
  std::vector<double> ds = list(run.cfg, "delta");
  const int T = run.cfg["trials"];
  sweep(run, static_cast<int>(ds.size()), [&](int i) {
    const double delta = ds[i];
    CapSystem caps = cap_decompose(run.n, std::sqrt(delta));
    std::vector<CapCoefficients> d;
    for (int t = 0; t < T; ++t) d.push_back(random_coefficients(caps.size(), derive_seed(run.seed, i, t)));
    EvalOptions e = run.eval;
    e.sampling.seed = derive_seed(run.seed, i, 0x5a);
    Point p;
    p.rows = rlp_extension_ratios(caps, Mat(), d, delta, e);
    for (int t = 0; t < T; ++t) p.rows[t].seed = derive_seed(run.seed, i, t);
    return p;
  });
  fit_rows(run, "rlp_extension_ratio", "delta", true, "ratio_vs_log_inv_delta");
  run.summary["max_ratio"] = max_ratio(run, "rlp_extension_ratio");
}

// --- decouple
void run_decouple(Run& run) {
  std::vector<double> ds = list(run.cfg, "delta"), qs = list(run.cfg, "q"), rs = list(run.cfg, "r");
  if (rs.empty()) rs.push_back(0);
  const int T = run.cfg["trials"];
  const bool local = run.cfg["local"];
  struct P {
    double delta, q, r;
  };
  std::vector<P> grid;
  for (double q : qs)
    for (double r : rs)
      for (double d : ds) grid.push_back({d, q, r});
  sweep(run, static_cast<int>(grid.size()), [&](int i) {
    const P& g = grid[i];
    CapSystem caps = cap_decompose(run.n, std::sqrt(g.delta));
    TorusSpec torus = default_torus(run.n, g.delta);
    Point p;
    for (int t = 0; t < T; ++t) {
      std::uint64_t s = derive_seed(run.seed, i, t);
      PeriodicField f = random_shell_field(run.n, g.delta, torus, s);
      RatioReport r = decoupling_ratio(f, caps, g.delta, g.q, g.r, local);
      r.seed = s;
      p.rows.push_back(r);
    }
    return p;
  });
  for (double q : qs)
    for (double r : rs) {
      std::vector<std::pair<double, double>> pts;
      for (const Point& p : run.points)
        for (const RatioReport& row : p.rows)
          if (row.q == q && (r == 0 || row.r == r) && !row.degenerate) pts.emplace_back(1 / row.delta, row.ratio);
      char key[64];
      std::snprintf(key, sizeof key, "q=%g,r=%g", q, r);
      json note = nullptr;
      auto f = try_fit(pts, true, note);
      run.summary["fits"][key] = fit_json(f);
      if (run.plot_points.empty()) {
        run.plot_points = pts;
        run.plot_fit = f;
        run.plot_x = "1/delta";
        run.plot_y = "decoupling ratio";
      }
    }
  run.summary["max_ratio"] = max_ratio(run, "decoupling_ratio");
}

// --- extension
void run_extension(Run& run) {
  std::vector<double> Rs = list(run.cfg, "R");
  const double s = list(run.cfg, "s").front();
  const double h = run.cfg["sampling"]["h"];
  auto caps = std::make_shared<const CapSystem>(cap_decompose(run.n, s));
  const int K = caps->size();
  Density one = Density::make(caps, Vec::Ones(K), Vec::Ones(K));
  sweep(run, static_cast<int>(Rs.size()), [&](int i) {
    const double L = Rs[i];
    GridSpec grid;
    grid.n = run.n;
    grid.L = L;
    grid.h = h;
    grid.validate();
    check_budget(16.0 * grid.count(), "extension field");
    Point p;
    auto t0 = std::chrono::steady_clock::now();
    Field F = extend(one, grid, Method::Gridded);
    std::mt19937_64 g(derive_seed(run.seed, i));
    Mat pts(run.n, 100);
    std::vector<Eigen::Index> idx(100);
    for (int k = 0; k < 100; ++k) {
      idx[k] = static_cast<Eigen::Index>(uniform01(g) * grid.count());
      pts.col(k) = grid.point(idx[k]);
    }
    CVec direct = extend_at(*caps, one.node_values, pts);
    double diff = 0, scale = 0;
    for (int k = 0; k < 100; ++k) {
      diff = std::max(diff, std::abs(F.values(idx[k]) - direct(k)));
      scale = std::max(scale, std::abs(direct(k)));
    }
    RatioReport r;
    r.module = "extension_field";
    r.op = "gridded_vs_direct";
    r.n = run.n;
    r.R = L;
    r.seed = derive_seed(run.seed, i);
    r.lhs = diff;
    r.rhs = scale;
    r.finish();
    r.runtime_s = seconds_since(t0);
    r.method = "gridded";
    p.rows.push_back(r);
    if (run.n == 2) {
      // g = 1 extends to 2 pi J0(2 pi |x|)
      auto t1 = std::chrono::steady_clock::now();
      const double rmax = std::min(L, 64.0);
      Mat xs = Mat::Zero(2, 100);
      for (int k = 0; k < 100; ++k) xs(0, k) = rmax * (k + 1) / 100.0;
      CVec e = extend_at(*caps, one.node_values, xs);
      double err = 0;
      for (int k = 0; k < 100; ++k) err = std::max(err, std::abs(e(k) - kTwoPi * std::cyl_bessel_j(0.0, kTwoPi * xs(0, k))));
      RatioReport b;
      b.module = "extension_field";
      b.op = "bessel_direct";
      b.n = 2;
      b.R = rmax;
      b.seed = r.seed;
      b.lhs = err;
      b.rhs = kTwoPi;
      b.finish();
      b.runtime_s = seconds_since(t1);
      p.rows.push_back(b);
    }
    char name[64];
    std::snprintf(name, sizeof name, "field_%02d", i);
    write_field((fs::path(run.dir) / name).string(), F,
                json{{"density", "constant one"}, {"cap_scale", s}, {"experiment", run.id}});
    p.detail = json{{"R", L}, {"file", std::string(name) + ".bin"}, {"max_abs_diff", diff}, {"max_abs", scale}};
    return p;
  });
  json fields = json::array();
  for (const Point& p : run.points) fields.push_back(p.detail);
  run.summary["fields"] = fields;
  run.summary["max_relative_gridding_error"] = max_ratio(run, "gridded_vs_direct");
  if (run.n == 2) run.summary["max_bessel_error"] = max_ratio(run, "bessel_direct") * kTwoPi;
}

// --- kakeya
void run_kakeya(Run& run) {
  std::vector<double> Ns = list(run.cfg, "N"), rs = list(run.cfg, "r");
  const int T = run.cfg["trials"];
  const int nN = static_cast<int>(Ns.size());
  // points 0..nN-1: duality trials, then one bush point per (r, N)
  sweep(run, nN + nN * static_cast<int>(rs.size()), [&](int i) {
    Point p;
    if (i < nN) {
      const double N = Ns[i];
      DirectionNet net = direction_net(run.n, N);
      int violations = 0;
      double worst = 0;
      for (int t = 0; t < T; ++t) {
        auto t0 = std::chrono::steady_clock::now();
        std::uint64_t s = derive_seed(run.seed, i, t);
        TubeFamily fam = random_family(run.n, N, 1, N / 2, s, 0.5);
        RealField f;
        f.grid.n = run.n;
        f.grid.L = std::ceil(fam.bounding_radius()) + 1;
        f.grid.h = 0.25;
        check_budget(8.0 * f.grid.count(), "kakeya test function");
        f.values = Vec(f.grid.count());
        std::mt19937_64 g(derive_seed(s, 1));
        for (Eigen::Index k = 0; k < f.values.size(); ++k) f.values(k) = uniform01(g);
        DualityCheck d = maximal_duality_check(f, fam, 2);
        violations += !(d.holder_ok && d.maximal_ok);
        worst = std::max(worst, d.worst_maximal);
        RatioReport r;
        r.module = "kakeya_tubes";
        r.op = "maximal_duality_check";
        r.n = run.n;
        r.R = N;
        r.r = 2;
        r.seed = s;
        r.lhs = d.pairing;
        r.rhs = d.bound;
        r.finish();
        r.runtime_s = seconds_since(t0);
        p.rows.push_back(r);
      }
      p.detail = json{{"N", N}, {"violations", violations}, {"worst_maximal", worst}};
    } else {
      const int j = i - nN;
      const double r = rs[j / nN], N = Ns[j % nN];
      DualNormOptions o;
      o.seed = derive_seed(run.seed, i);
      RatioReport rep = cov_ratio(bush(run.n, N), r, o);
      p.rows.push_back(rep);
    }
    return p;
  });
  int violations = 0;
  for (int i = 0; i < nN; ++i) violations += run.points[i].detail["violations"].get<int>();
  run.summary["duality_trials"] = nN * T;
  run.summary["duality_violations"] = violations;
  for (double r : rs) {
    std::vector<std::pair<double, double>> pts;
    for (const Point& p : run.points)
      for (const RatioReport& row : p.rows)
        if (row.op == "cov_ratio" && row.r == r && !row.degenerate) pts.emplace_back(row.R, row.ratio);
    char key[64];
    std::snprintf(key, sizeof key, "bush_cov_ratio_r=%g", r);
    json note = nullptr;
    auto f = try_fit(pts, true, note);
    run.summary["fits"][key] = fit_json(f);
    if (run.plot_points.empty()) {
      run.plot_points = pts;
      run.plot_fit = f;
      run.plot_x = "N";
      run.plot_y = "bush cov ratio";
    }
  }
  if (violations) throw CertificationError("maximal duality pairing violated");
}

// --- bush
void run_bush(Run& run) {
  std::vector<double> Ns = list(run.cfg, "N"), rs = list(run.cfg, "r");
  const int nN = static_cast<int>(Ns.size());
  sweep(run, nN * static_cast<int>(rs.size()), [&](int i) {
    const double r = rs[i / nN], N = Ns[i % nN];
    DualNormOptions o;
    o.seed = derive_seed(run.seed, i);
    TubeFamily b = bush(run.n, N);
    Point p;
    p.rows.push_back(cov_ratio(b, r, o));
    if (std::abs(r - run.n / (run.n - 1.0)) < 1e-12) p.rows.push_back(bush_bound_check(b, o));
    return p;
  });
  for (double r : rs) {
    std::vector<std::pair<double, double>> pts;
    for (const Point& p : run.points)
      for (const RatioReport& row : p.rows)
        if (row.op == "cov_ratio" && row.r == r && !row.degenerate) pts.emplace_back(row.R, row.ratio);
    char key[64];
    std::snprintf(key, sizeof key, "cov_ratio_r=%g", r);
    json note = nullptr;
    auto f = try_fit(pts, true, note);
    run.summary["fits"][key] = fit_json(f);
    if (run.plot_points.empty()) {
      run.plot_points = pts;
      run.plot_fit = f;
      run.plot_x = "N";
      run.plot_y = "cov ratio";
    }
  }
  run.summary["expected_p"] = (run.n - 1.0) / run.n;
}

// --- twoscale
void run_twoscale(Run& run) {
  std::vector<double> ds = list(run.cfg, "delta");
  const int T = run.cfg["trials"];
  const int D = static_cast<int>(ds.size());
  ChainOptions base;
  base.draws = run.cfg["draws"];
  base.rbeta_checked = run.cfg["rbeta_checked"];
  base.eval = run.eval;
  sweep(run, D * T, [&](int i) {
    const double delta = ds[i / T];
    const int t = i % T;
    const std::uint64_t s = derive_seed(run.seed, i / T, t);
    const double N = std::pow(delta, -0.5);
    TubeFamily fam = random_family(run.n, N, N, 1 / delta, s);
    ChainOptions o = base;
    o.seed = s;
    o.eval.sampling.seed = derive_seed(s, 0x5a);
    TwoScaleTrace tr = run_chain(fam, delta, o);
    char name[64];
    std::snprintf(name, sizeof name, "trace_%02d_%02d.json", i / T, t);
    json j = to_json(tr);
    j["family"] = to_json(fam);
    write_json((fs::path(run.dir) / name).string(), j);
    Point p;
    const double q = 2.0 * run.n / (run.n - 1), rr = run.n / (run.n - 1.0);
    auto row = [&](const std::string& op, double lhs, double rhs) {
      RatioReport r;
      r.module = "two_scale_chain";
      r.op = op;
      r.n = run.n;
      r.delta = delta;
      r.q = q;
      r.r = rr;
      r.seed = s;
      r.lhs = lhs;
      r.rhs = rhs;
      r.finish();
      return r;
    };
    bool steps_ok = true;
    for (const StepRecord& st : tr.steps) {
      p.rows.push_back(row("step_" + st.name, st.lhs, st.constant * st.rhs));
      steps_ok = steps_ok && st.holds();
    }
    RatioReport c = row("chain", tr.direct_lhs, tr.assembled_bound);
    c.runtime_s = tr.runtime_s;
    p.rows.push_back(c);
    const double recompute = tr.recompute_bound();
    const bool rec_ok = std::abs(recompute - tr.assembled_bound) <= 1e-9 * tr.assembled_bound;
    p.detail = json{{"delta", delta},      {"trial", t},          {"seed", s},
                    {"file", name},        {"steps_hold", steps_ok}, {"bound_recomputes", rec_ok},
                    {"bound_holds", tr.bound_holds()}, {"direct_lhs", tr.direct_lhs}, {"assembled_bound", tr.assembled_bound}};
    return p;
  });
  json trials = json::array();
  bool ok = true;
  for (const Point& p : run.points) {
    trials.push_back(p.detail);
    ok = ok && p.detail["steps_hold"].get<bool>() && p.detail["bound_recomputes"].get<bool>() &&
         p.detail["bound_holds"].get<bool>();
  }
  run.summary["trials"] = trials;
  run.summary["all_hold"] = ok;
  std::vector<std::pair<double, double>> pts;
  for (const Point& p : run.points)
    for (const RatioReport& r : p.rows)
      if (r.op == "chain") pts.emplace_back(1 / r.delta, r.ratio);
  run.plot_points = pts;
  run.plot_x = "1/delta";
  run.plot_y = "direct / assembled bound";
  if (!ok) throw CertificationError("two-scale chain trace failed a recomputation");
}

std::vector<Density> random_densities(std::shared_ptr<const CapSystem> caps, int T, std::uint64_t seed, int point) {
  std::vector<Density> gs;
  for (int t = 0; t < T; ++t) {
    CapCoefficients c = random_coefficients(caps->size(), derive_seed(seed, point, t));
    gs.push_back(Density::make(caps, c.c, c.signs));
  }
  return gs;
}

// --- restrict
void run_restrict(Run& run) {
  std::vector<double> Rs = list(run.cfg, "R");
  const int T = run.cfg["trials"];
  sweep(run, static_cast<int>(Rs.size()), [&](int i) {
    auto caps = std::make_shared<const CapSystem>(cap_decompose(run.n, 1 / std::sqrt(Rs[i])));
    std::vector<Density> gs = random_densities(caps, T, run.seed, i);
    Point p;
    for (int t = 0; t < T; ++t) {
      EvalOptions e = run.eval;
      e.sampling.seed = derive_seed(run.seed, i, 0x5a);
      RatioReport r = restriction_ratio(gs[t], Rs[i], e);
      r.seed = derive_seed(run.seed, i, t);
      p.rows.push_back(r);
    }
    return p;
  });
  fit_rows(run, "restriction_ratio", "R", true, "ratio_vs_log_R");
  run.summary["max_ratio"] = max_ratio(run, "restriction_ratio");
}

// --- remark
void run_remark(Run& run) {
  std::vector<double> Rs = list(run.cfg, "R");
  const int T = run.cfg["trials"];
  const bool square = run.cfg["square"];
  const int n = run.n;
  const double q = 2.0 * n / (n - 1), e = (n - 1.0) / (2.0 * n);
  sweep(run, static_cast<int>(Rs.size()), [&](int i) {
    const double R = Rs[i];
    auto t0 = std::chrono::steady_clock::now();
    auto caps = std::make_shared<const CapSystem>(cap_decompose(n, 1 / std::sqrt(R)));
    std::vector<Density> gs = random_densities(caps, T, run.seed, i);
    std::vector<RemarkValue> rv = remark_rhs(gs, R);
    const double t_remark = seconds_since(t0) / T;
    std::vector<NormEstimate> sf;
    double t_square = 0;
    if (square) {
      auto t1 = std::chrono::steady_clock::now();
      std::vector<Vec> cs;
      for (const Density& g : gs) cs.push_back(g.c);
      EvalOptions o = run.eval;
      o.sampling.seed = derive_seed(run.seed, i, 0x5a);
      sf = square_function_norms(*caps, cs, R, q, o);
      t_square = seconds_since(t1) / T;
    }
    Point p;
    double worst_change = 0;
    for (int t = 0; t < T; ++t) {
      auto row = [&](const std::string& op, double rhs) {
        RatioReport r;
        r.module = "extension_field";
        r.op = op;
        r.n = n;
        r.R = R;
        r.q = q;
        r.seed = derive_seed(run.seed, i, t);
        r.lhs = rv[t].value;
        r.rhs = rhs;
        r.finish();
        r.runtime_s = t_remark;
        return r;
      };
      const double gq = sphere_lq(gs[t], q);
      if (square) {
        RatioReport r = row("remark_vs_square_function", sf[t].value);
        r.stderr = r.degenerate ? 0 : r.ratio * sf[t].stderr / sf[t].value;
        r.runtime_s += t_square;
        r.method = sf[t].sampled ? "sampled" : "full";
        p.rows.push_back(r);
      }
      p.rows.push_back(row("remark_vs_lq", gq));
      // triangle inequality in t: the dt/t integral contributes (log R / 2)^e
      p.rows.push_back(row("remark_vs_triangle_bound", std::pow(0.5 * std::log(R), e) * gq));
      worst_change = std::max(worst_change, rv[t].rel_change);
    }
    p.detail = json{{"R", R}, {"caps", caps->size()}, {"max_refinement_change", worst_change}};
    return p;
  });
  fit_rows(run, "remark_vs_lq", "R", true, "remark_over_lq_vs_log_R");
  run.summary["expected_p"] = e;
  if (square) {
    double lo = 1e300, hi = 0;
    for (const Point& p : run.points)
      for (const RatioReport& r : p.rows)
        if (r.op == "remark_vs_square_function" && !r.degenerate) lo = std::min(lo, r.ratio), hi = std::max(hi, r.ratio);
    run.summary["square_function_ratio"] = json{{"min", lo}, {"max", hi}};
  }
  run.summary["max_triangle_ratio"] = max_ratio(run, "remark_vs_triangle_bound");
  json pts = json::array();
  for (const Point& p : run.points) pts.push_back(p.detail);
  run.summary["points"] = pts;
}

// --- fit
void run_fit(Run& run) {
  std::vector<std::string> header;
  const std::string input = run.cfg["input"];
  auto rows = read_csv(input, &header);
  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("/x", "column " + name + " not in " + input);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::string xname = run.cfg["x"], yname = run.cfg["y"];
  const std::size_t xi = col(xname), yi = col(yname), oi = col("op");
  const std::string op = run.cfg.value("op", "");
  const bool log_model = run.cfg["model"] == "log";
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) {
    if (r.size() <= std::max({xi, yi, oi})) continue;
    if (!op.empty() && r[oi] != op) continue;
    if (r[xi].empty() || r[yi].empty() || r[yi] == "degenerate") continue;
    double x = std::stod(r[xi]), y = std::stod(r[yi]);
    if (xname == "delta") x = 1 / x;
    pts.emplace_back(x, y);
  }
  Fit f = log_model ? fit_log_exponent(pts) : fit_power(pts);
  run.summary["fits"]["fit"] = fit_json(f);
  run.summary["input"] = input;
  run.plot_points = pts;
  run.plot_fit = f;
  run.plot_x = xname == "delta" ? "1/delta" : xname;
  run.plot_y = yname;
  run.plot_log = log_model;
  CsvSink sink((fs::path(run.dir) / "results.csv").string());
}

}  // namespace

ExperimentResult run_experiment(const std::string& kind, const json& config, const RunOptions& opts) {
  Run run;
  run.kind = kind;
  run.opts = opts;
  run.cfg = resolve_config(kind, config, opts.seed);
  run.n = run.cfg["n"];
  run.seed = run.cfg["seed"];
  run.hash = config_hash(run.cfg);
  run.id = kind + "-" + run.hash.substr(0, 12);
  std::string out = opts.out;
  if (out.empty()) out = config.value("output_dir", std::string("lab_out"));
  run.dir = (fs::path(out) / run.id).string();
  fs::create_directories(run.dir);
  // a re-run of the same config starts its files afresh
  for (const char* f : {"results.csv", "summary.json", "plot.svg"}) fs::remove(fs::path(run.dir) / f);

  const json& sp = run.cfg["sampling"];
  const std::string mode = sp["mode"];
  run.eval.sampling.kind = mode == "full"         ? SamplingPolicy::Full
                           : mode == "stratified" ? SamplingPolicy::Stratified
                                                  : SamplingPolicy::Auto;
  run.eval.sampling.samples = sp["samples"];
  run.eval.sampling.full_limit = sp["full_limit"];
  run.eval.sampling.seed = run.seed;
  run.eval.max_samples = sp["max_samples"];
  run.eval.target_stderr = sp["target_stderr"];
  run.eval.h = sp["h"];

  const std::size_t old_budget = memory_budget();
  if (run.cfg.contains("memory_budget_bytes")) set_memory_budget(run.cfg["memory_budget_bytes"].get<std::size_t>());
  const int old_threads = omp_get_max_threads();
  if (opts.threads > 0) omp_set_num_threads(opts.threads);
  struct Restore {
    std::size_t budget;
    int threads;
    ~Restore() {
      set_memory_budget(budget);
      omp_set_num_threads(threads);
    }
  } restore{old_budget, old_threads};

  write_json((fs::path(run.dir) / "config.json").string(), run.cfg);
  run.summary["id"] = run.id;
  run.summary["config_hash"] = run.hash;
  run.summary["kind"] = kind;
  run.summary["fits"] = json::object();

  auto finish = [&](const char* status, const std::string& message) {
    run.summary["status"] = status;
    if (!message.empty()) run.summary["message"] = message;
    std::size_t rows = 0;
    for (const Point& p : run.points) rows += p.rows.size();
    run.summary["rows"] = rows;
    write_json((fs::path(run.dir) / "summary.json").string(), run.summary);
    if (opts.plots && !run.plot_points.empty()) {
      std::ofstream svg(fs::path(run.dir) / "plot.svg");
      svg << svg_plot(run.plot_points, run.plot_fit ? &*run.plot_fit : nullptr, run.id, run.plot_x, run.plot_y,
                      run.plot_log);
    }
  };

  try {
    if (kind == "caps") run_caps(run);
    else if (kind == "rlp") run_rlp(run);
    else if (kind == "decouple") run_decouple(run);
    else if (kind == "extension") run_extension(run);
    else if (kind == "kakeya") run_kakeya(run);
    else if (kind == "bush") run_bush(run);
    else if (kind == "twoscale") run_twoscale(run);
    else if (kind == "restrict") run_restrict(run);
    else if (kind == "remark") run_remark(run);
    else run_fit(run);
  } catch (const CertificationError& e) {
    finish("certification_failure", e.what());
    throw;
  } catch (const BudgetError& e) {
    finish("budget_abort", e.what());
    throw;
  } catch (const std::exception& e) {
    finish("error", e.what());
    throw;
  }
  finish("ok", "");

  ExperimentResult res;
  res.id = run.id;
  res.hash = run.hash;
  res.dir = run.dir;
  res.config = run.cfg;
  res.summary = run.summary;
  for (Point& p : run.points)
    for (RatioReport& r : p.rows) res.rows.push_back(std::move(r));
  return res;
}

int run_experiment_status(const std::string& kind, const json& config, const RunOptions& opts,
                          ExperimentResult* result) {
  try {
    ExperimentResult r = run_experiment(kind, config, opts);
    if (result) *result = std::move(r);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "lab: invalid config at " << e.what() << "\n";
    return 2;
  } catch (const CertificationError& e) {
    std::cerr << "lab: certification failed: " << e.what() << "\n";
    return 2;
  } catch (const BudgetError& e) {
    std::cerr << "lab: memory budget exceeded: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "lab: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lab
