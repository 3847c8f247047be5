#include "lab/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>

namespace lab {

void RatioReport::finish() {
  if (!(rhs > 0)) {
    degenerate = true;
    ratio = kNaN;
    return;
  }
  degenerate = false;
  ratio = lhs / rhs;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_header() {
  return "module,op,n,delta,R,q,r,seed,lhs,rhs,ratio,stderr,runtime_s,experiment_id,config_hash";
}

std::string csv_row(const RatioReport& r, const std::string& id, const std::string& hash) {
  std::string s = r.module + "," + r.op + "," + std::to_string(r.n) + "," + format_double(r.delta) + "," +
                  format_double(r.R) + "," + format_double(r.q) + "," + format_double(r.r) + "," +
                  std::to_string(r.seed) + "," + format_double(r.lhs) + "," + format_double(r.rhs) + "," +
                  (r.degenerate ? std::string("degenerate") : format_double(r.ratio)) + "," +
                  format_double(r.stderr) + "," + format_double(r.runtime_s) + "," + id + "," + hash;
  return s;
}

CsvSink::CsvSink(const std::string& path) : path_(path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path_) || fs::file_size(path_) == 0) {
    std::ofstream out(path_, std::ios::app);
    out << csv_header() << "\n";
  }
}

void CsvSink::append(const RatioReport& r, const std::string& id, const std::string& hash) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  std::ofstream out(path_, std::ios::app);
  out << csv_row(r, id, hash) << "\n";
}

}  // namespace lab
