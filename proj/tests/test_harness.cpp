#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "lab/harness.hpp"

using namespace lab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("lab_test_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// CSV text with the runtime column blanked
std::string numeric_part(const fs::path& csv) {
  std::vector<std::string> header;
  auto rows = read_csv(csv.string(), &header);
  auto it = std::find(header.begin(), header.end(), "runtime_s");
  std::size_t k = it - header.begin();
  std::string s;
  for (auto& r : rows) {
    if (k < r.size()) r[k].clear();
    for (auto& c : r) s += c + ",";
    s += "\n";
  }
  return s;
}

}  // namespace

TEST_CASE("log exponent fit") {
  std::vector<std::pair<double, double>> exact, flat, noisy;
  for (int k = 4; k <= 16; ++k) {
    double x = std::ldexp(1.0, k);
    exact.emplace_back(x, std::pow(std::log(x), 0.5));
    flat.emplace_back(x, 3.0);
  }
  Fit a = fit_log_exponent(exact);
  CHECK(a.p == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(a.C == doctest::Approx(1).epsilon(1e-9));
  CHECK(a.rms < 1e-12);
  Fit b = fit_log_exponent(flat);
  CHECK(std::abs(b.p) < 1e-9);
  CHECK(b.C == doctest::Approx(3).epsilon(1e-9));

  std::mt19937_64 g(12);
  for (int rep = 0; rep < 20; ++rep) {
    noisy.clear();
    for (int k = 4; k <= 16; ++k) {
      double x = std::ldexp(1.0, k);
      noisy.emplace_back(x, std::pow(std::log(x), 0.5) * (1 + 0.02 * (2 * uniform01(g) - 1)));
    }
    CHECK(fit_log_exponent(noisy).p == doctest::Approx(0.5).epsilon(0.1));
  }

  CHECK_THROWS_AS(fit_log_exponent({{16, 1}, {32, 1}, {64, 1}}), DomainError);
  CHECK_THROWS_AS(fit_log_exponent({{2, 1}, {16, 1}, {32, 1}, {64, 1}}), DomainError);
  CHECK_THROWS_AS(fit_log_exponent({{16, 1}, {16, 2}, {16, 3}, {16, 4}}), DomainError);
  CHECK_THROWS_AS(fit_log_exponent({{16, 1}, {32, 0}, {64, 1}, {128, 1}}), DomainError);

  std::vector<std::pair<double, double>> pw;
  for (int k = 1; k <= 6; ++k) pw.emplace_back(k, 2.5 * std::pow(k, -1.5));
  Fit c = fit_power(pw);
  CHECK(c.p == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(c.C == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(validate_config(json{{"n", 2}, {"delta", {0.0625, 0.03125}}}));
  auto path_of = [](const json& c) -> std::string {
    try {
      validate_config(c);
    } catch (const ConfigError& e) {
      return e.path;
    }
    return "";
  };
  CHECK(path_of(json{{"dleta", {0.1}}}) == "/dleta");
  CHECK(path_of(json{{"sampling", {{"mode", "auto"}, {"sample", 10}}}}) == "/sampling/sample");
  CHECK(path_of(json{{"sampling", {{"mode", "grid"}}}}) == "/sampling/mode");
  CHECK(path_of(json{{"delta", {0.1, 1.5}}}) == "/delta/1");
  CHECK(path_of(json{{"n", 4}}) == "/n");
  CHECK(path_of(json{{"n", 2.5}}) == "/n");
  CHECK(path_of(json{{"trials", 0}}) == "/trials");
  CHECK(path_of(json::array()) == "/");

  json r = resolve_config("rlp", json{{"delta", {0.0625}}}, 9);
  CHECK(r["seed"] == 9);
  CHECK(r["trials"] == 1);
  CHECK(r["sampling"]["samples"] == 16384);
  CHECK(r["kind"] == "rlp");
  // key order in the file does not change the hash
  json a = json::parse(R"({"n": 2, "delta": [0.0625], "trials": 3})");
  json b = json::parse(R"({"trials": 3, "delta": [0.0625], "n": 2})");
  CHECK(config_hash(resolve_config("rlp", a)) == config_hash(resolve_config("rlp", b)));
  CHECK(config_hash(resolve_config("rlp", a)) != config_hash(resolve_config("rlp", a, 2)));
  CHECK_THROWS_AS(resolve_config("rlp", json{{"kind", "bush"}}), ConfigError);
  CHECK_THROWS_AS(resolve_config("sideways", json::object()), ConfigError);
}

TEST_CASE("exit status") {
  fs::path out = scratch("status");
  RunOptions o;
  o.out = out.string();
  CHECK(run_experiment_status("caps", json{{"s", {0.25}}, {"colour", "red"}}, o) == 2);
  CHECK(run_experiment_status("fit", json::object(), o) == 2);

  // budget far below one extension field
  CHECK(run_experiment_status("extension", json{{"R", {8.0}}, {"memory_budget_bytes", 1000}}, o) == 3);
  CHECK(memory_budget() > 1000);  // restored after the run

  ExperimentResult res;
  CHECK(run_experiment_status("caps", json{{"n", 2}, {"s", {0.25}}}, o, &res) == 0);
  CHECK(res.rows.size() == 1);
  CHECK(res.rows[0].lhs == 26);
  CHECK(res.summary["all_ok"] == true);
  json caps = json::parse(slurp(fs::path(res.dir) / "caps_00.json"));
  CHECK(caps["centers"].size() == 26);
  CHECK(caps["audit"]["ok"] == true);
  CHECK(fs::exists(fs::path(res.dir) / "config.json"));
  fs::remove_all(out);
}

TEST_CASE("rlp run is reproducible and plots change nothing numeric") {
  fs::path out = scratch("rlp");
  json cfg{{"n", 2}, {"delta", {0.0625, 0.03125, 0.015625, 0.0078125}}, {"trials", 2}, {"seed", 5}};
  RunOptions o;
  o.out = (out / "a").string();
  ExperimentResult a = run_experiment("rlp", cfg, o);
  o.out = (out / "b").string();
  o.plots = false;
  o.threads = 2;
  ExperimentResult b = run_experiment("rlp", cfg, o);
  CHECK(a.id == b.id);
  CHECK(a.rows.size() == 8);
  CHECK(numeric_part(fs::path(a.dir) / "results.csv") == numeric_part(fs::path(b.dir) / "results.csv"));
  CHECK(slurp(fs::path(a.dir) / "summary.json") == slurp(fs::path(b.dir) / "summary.json"));
  CHECK(fs::exists(fs::path(a.dir) / "plot.svg"));
  CHECK_FALSE(fs::exists(fs::path(b.dir) / "plot.svg"));
  CHECK(a.summary["fits"]["ratio_vs_log_inv_delta"]["points"] == 8);

  std::vector<std::string> header;
  auto rows = read_csv((fs::path(a.dir) / "results.csv").string(), &header);
  CHECK(header.size() == 15);
  CHECK(header.front() == "module");
  CHECK(header.back() == "config_hash");
  CHECK(rows.size() == 8);
  for (auto& r : rows) CHECK(r.back() == a.hash);

  // re-running into the same directory replaces, not appends
  o.out = (out / "a").string();
  run_experiment("rlp", cfg, o);
  CHECK(read_csv((fs::path(a.dir) / "results.csv").string()).size() == 8);

  // fit kind over the rows just written
  json f{{"input", (fs::path(a.dir) / "results.csv").string()}, {"x", "delta"}, {"op", "rlp_extension_ratio"}};
  ExperimentResult fr = run_experiment("fit", f, o);
  CHECK(fr.summary["fits"]["fit"]["p"].get<double>() ==
        doctest::Approx(a.summary["fits"]["ratio_vs_log_inv_delta"]["p"].get<double>()).epsilon(1e-9));
  fs::remove_all(out);
}

TEST_CASE("bush run fits the log growth") {
  fs::path out = scratch("bush");
  RunOptions o;
  o.out = out.string();
  ExperimentResult r = run_experiment("bush", json{{"n", 2}, {"N", {8, 16, 32, 64, 128, 256}}}, o);
  double p = r.summary["fits"]["cov_ratio_r=2"]["p"];
  CHECK(std::abs(p - 0.5) <= 0.3);
  fs::remove_all(out);
}

TEST_CASE("kakeya run pairs every random function") {
  fs::path out = scratch("kakeya");
  RunOptions o;
  o.out = out.string();
  ExperimentResult r = run_experiment("kakeya", json{{"n", 2}, {"N", {8, 16}}, {"trials", 2}}, o);
  CHECK(r.summary["duality_trials"] == 4);
  CHECK(r.summary["duality_violations"] == 0);
  int pairs = 0;
  for (const auto& row : r.rows)
    if (row.op == "maximal_duality_check") {
      ++pairs;
      CHECK(row.lhs <= row.rhs * (1 + 1e-12));
    }
  CHECK(pairs == 4);
  fs::remove_all(out);
}

TEST_CASE("serialization") {
  CHECK(base64_encode({'f', 'o', 'o', 'b', 'a', 'r'}) == "Zm9vYmFy");
  CHECK(base64_encode({'f', 'o'}) == "Zm8=");
  std::vector<unsigned char> fo{'f', 'o'};
  CHECK(base64_decode("Zm8=") == fo);
  CHECK(base64_decode("") == std::vector<unsigned char>{});
  CHECK_THROWS_AS(base64_decode("abc"), DomainError);
  double xs[] = {0.1, -2.5e-300, 1.0 / 3, std::ldexp(1.0, 1000)};
  std::vector<double> back = decode_doubles(encode_doubles(xs, 4));
  REQUIRE(back.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(back[i] == xs[i]);
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");

  SUBCASE("cap systems") {
    for (int n : {2, 3}) {
      CapSystem sys = cap_decompose(n, n == 2 ? 0.25 : 0.5);
      json j = to_json(sys);
      CapSystem back = cap_system_from_json(json::parse(j.dump()));
      CHECK(back.size() == sys.size());
      for (int a = 0; a < sys.size(); ++a) CHECK((back.cap(a).center - sys.cap(a).center).norm() == 0);
      CHECK(to_json(back).dump() == j.dump());
    }
  }
  SUBCASE("tube families") {
    TubeFamily f = random_family(2, 8, 1, 10, 3);
    TubeFamily g = tube_family_from_json(json::parse(to_json(f).dump()));
    CHECK(g.size() == f.size());
    CHECK((g.c - f.c).norm() == 0);
    for (int a = 0; a < f.size(); ++a) CHECK((g.tubes[a].center - f.tubes[a].center).norm() == 0);
    CHECK(exact_dual_norm(g, 2) == exact_dual_norm(f, 2));
  }
  SUBCASE("field export") {
    fs::path dir = scratch("field");
    fs::create_directories(dir);
    Field F;
    F.grid.n = 2;
    F.grid.L = 1;
    F.grid.h = 0.5;
    F.values = CVec(F.grid.count());
    for (Eigen::Index i = 0; i < F.values.size(); ++i) F.values(i) = cplx(i, -0.5 * i);
    write_field((dir / "f").string(), F, json{{"note", "test"}});
    std::string bin = slurp(dir / "f.bin");
    REQUIRE(bin.size() == 8 * 25);
    float v[2];
    std::memcpy(v, bin.data() + 8 * 7, 8);
    CHECK(v[0] == 7.0f);
    CHECK(v[1] == -3.5f);
    json h = json::parse(slurp(dir / "f.json"));
    CHECK(h["provenance"]["note"] == "test");
    fs::remove_all(dir);
  }
}

TEST_CASE("svg") {
  std::vector<std::pair<double, double>> pts{{16, 1}, {64, 1.2}, {256, 1.3}};
  Fit f{1, 0.3, 0, 3};
  std::string s = svg_plot(pts, &f, "t", "x", "y", true);
  CHECK(s.find("<svg") == 0);
  CHECK(s.find("polyline") != std::string::npos);
  CHECK(svg_plot(pts, &f, "t", "x", "y", true) == s);
}
