#include "lab/serialization.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace lab {

namespace {

static_assert(std::endian::native == std::endian::little, "raw exports assume a little-endian host");

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(vec_json(m.col(j)));
  return a;
}

Vec json_vec(const json& a) {
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

Mat json_mat(const json& a, int rows) {
  Mat m(rows, a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    require(static_cast<int>(a[j].size()) == rows, "matrix column has the wrong length");
    m.col(j) = json_vec(a[j]);
  }
  return m;
}

// JSON has no NaN; report it as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                            static_cast<int>(bytes.size()));
  out.resize(len);
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  require(text.size() % 4 == 0, "base64 length must be a multiple of 4");
  std::vector<unsigned char> out(3 * text.size() / 4);
  int len = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                            static_cast<int>(text.size()));
  require(len >= 0, "invalid base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(len - pad);
  return out;
}

std::string encode_doubles(const double* data, std::size_t count) {
  std::vector<unsigned char> b(count * 8);
  std::memcpy(b.data(), data, b.size());
  return base64_encode(b);
}

std::vector<double> decode_doubles(const std::string& text) {
  std::vector<unsigned char> b = base64_decode(text);
  require(b.size() % 8 == 0, "payload is not a list of doubles");
  std::vector<double> v(b.size() / 8);
  std::memcpy(v.data(), b.data(), b.size());
  return v;
}

std::string sha1_hex(const std::string& text) {
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(text.data()), text.size(), md);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned char c : md) s += hex[c >> 4], s += hex[c & 15];
  return s;
}

std::string config_hash(const json& config) { return sha1_hex(config.dump()); }

json to_json(const CapSystem& caps) {
  json j;
  j["n"] = caps.dim();
  j["scale"] = caps.scale();
  j["equal_arcs"] = caps.equal_arcs();
  j["arc_offset"] = caps.arc_offset();
  Mat C(caps.dim(), caps.size());
  Vec r(caps.size());
  for (int a = 0; a < caps.size(); ++a) C.col(a) = caps.cap(a).center, r(a) = caps.cap(a).cell_radius;
  j["centers"] = mat_json(C);
  j["cell_radii"] = vec_json(r);
  if (caps.has_quadrature()) {
    const SphereQuadrature& q = caps.quadrature();
    Mat nodes = q.nodes;  // column-major copy: node after node
    j["quadrature"] = {{"bandwidth", q.bandwidth},
                       {"size", q.size()},
                       {"nodes", encode_doubles(nodes.data(), nodes.size())},
                       {"weights", encode_doubles(q.weights.data(), q.weights.size())}};
  }
  if (caps.has_parent()) j["parent_map"] = caps.parent_map();
  return j;
}

CapSystem cap_system_from_json(const json& j) {
  const int n = j.at("n").get<int>();
  const double s = j.at("scale").get<double>();
  Mat C = json_mat(j.at("centers"), n);
  Vec r = json_vec(j.at("cell_radii"));
  CapSystem sys = j.value("equal_arcs", false) ? caps_from_arcs(static_cast<int>(C.cols()), j.at("arc_offset"), s)
                                               : caps_from_cells(n, s, C, r);
  if (!j.contains("quadrature")) return sys;
  const json& q = j["quadrature"];
  sys = quadrature_for_bandwidth(sys, q.at("bandwidth").get<double>());
  std::vector<double> nodes = decode_doubles(q.at("nodes"));
  std::vector<double> w = decode_doubles(q.at("weights"));
  const SphereQuadrature& got = sys.quadrature();
  Mat gn = got.nodes;
  if (nodes.size() != static_cast<std::size_t>(gn.size()) || w.size() != static_cast<std::size_t>(got.size()))
    throw CertificationError("cached quadrature does not match the rebuilt one");
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i] != gn.data()[i]) throw CertificationError("cached quadrature nodes differ");
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] != got.weights(i)) throw CertificationError("cached quadrature weights differ");
  return sys;
}

json to_json(const TubeFamily& f) {
  Mat C(f.dim(), f.size());
  for (int a = 0; a < f.size(); ++a) C.col(a) = f.tubes[a].center;
  json j;
  j["n"] = f.dim();
  j["lambda"] = f.lambda;
  j["N"] = f.N;
  j["directions"] = mat_json(f.net.directions);
  j["centers"] = mat_json(C);
  j["c"] = vec_json(f.c);
  return j;
}

TubeFamily tube_family_from_json(const json& j) {
  DirectionNet net;
  net.n = j.at("n").get<int>();
  net.N = j.at("N").get<double>();
  net.directions = json_mat(j.at("directions"), net.n);
  return make_family(net, json_mat(j.at("centers"), net.n), json_vec(j.at("c")), j.at("lambda").get<double>(),
                     net.N);
}

json to_json(const TwoScaleTrace& t) {
  json j;
  j["n"] = t.n;
  j["delta"] = t.delta;
  j["seed"] = t.seed;
  j["tubes"] = t.tubes;
  j["caps"] = t.caps;
  j["fine_caps"] = t.fine_caps;
  j["draws"] = t.draws;
  j["C_FT"] = {{"value", num(t.c_ft)}, {"worst_cap", t.ft_worst_cap}};
  j["a_beta"] = {{"min", num(t.a_min)},
                 {"max", num(t.a_max)},
                 {"interior_min", num(t.a_interior_min)},
                 {"interior_max", num(t.a_interior_max)},
                 {"oscillation", num(t.a_oscillation)},
                 {"excluded", t.a_excluded}};
  j["C_main"] = {{"value", num(t.c_main)}, {"min", num(t.c_main_min)}, {"max", num(t.c_main_max)},
                 {"conjectural", true}};
  j["C_approx"] = num(t.c_approx);
  j["C_repl"] = {{"value", num(t.c_repl)}, {"c_lo", num(t.c_lo)}, {"leak", num(t.leak)},
                 {"checked", t.rbeta_checked}};
  j["C_khin"] = {{"mean", num(t.khin_mean)}, {"ci_lo", num(t.khin_lo)}, {"ci_hi", num(t.khin_hi)},
                 {"min", num(t.khin_min)}, {"max", num(t.khin_max)}};
  j["C_bush"] = num(t.c_bush);
  j["counting"] = {{"residual", num(t.counting_residual)}, {"kappa", num(t.counting_kappa)}};
  j["shrink"] = num(t.shrink);
  j["enlarge"] = num(t.enlarge);
  json steps = json::array();
  for (const StepRecord& s : t.steps)
    steps.push_back({{"name", s.name},
                     {"lhs", num(s.lhs)},
                     {"rhs", num(s.rhs)},
                     {"constant", num(s.constant)},
                     {"conjectural", s.conjectural},
                     {"holds", s.holds()}});
  j["steps"] = steps;
  j["log_factor"] = num(t.log_factor);
  j["delta_power"] = num(t.delta_power);
  j["coefficient_norm"] = num(t.coefficient_norm);
  j["direct_lhs"] = num(t.direct_lhs);
  j["assembled_bound"] = num(t.assembled_bound);
  j["bound_holds"] = t.bound_holds();
  j["certificates"] = t.certificates;
  json timing = json::object();
  for (auto& [k, v] : t.timing) timing[k] = v;
  j["timing"] = timing;
  j["runtime_s"] = t.runtime_s;
  return j;
}

json to_json(const RatioReport& r) {
  return {{"module", r.module}, {"op", r.op},     {"n", r.n},         {"delta", num(r.delta)},
          {"R", num(r.R)},       {"q", num(r.q)},   {"r", num(r.r)},    {"seed", r.seed},
          {"lhs", num(r.lhs)},   {"rhs", num(r.rhs)}, {"ratio", num(r.ratio)}, {"stderr", num(r.stderr)},
          {"runtime_s", r.runtime_s}, {"method", r.method}, {"degenerate", r.degenerate}};
}

void write_field(const std::string& stem, const Field& f, const json& provenance) {
  std::vector<float> buf(2 * f.values.size());
  for (Eigen::Index i = 0; i < f.values.size(); ++i) {
    buf[2 * i] = static_cast<float>(f.values(i).real());
    buf[2 * i + 1] = static_cast<float>(f.values(i).imag());
  }
  std::ofstream bin(stem + ".bin", std::ios::binary);
  bin.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  json h;
  h["format"] = "complex64-le";
  h["layout"] = "row-major, last axis fastest";
  h["grid"] = {{"n", f.grid.n}, {"L", f.grid.L}, {"h", f.grid.h}, {"side", f.grid.side()}};
  h["count"] = f.values.size();
  h["provenance"] = provenance;
  write_json(stem + ".json", h);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  require(bool(out), "cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace lab
