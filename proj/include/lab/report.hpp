#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

namespace lab {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RatioReport {
  std::string module, op;
  int n = 0;
  double delta = kNaN, R = kNaN, q = kNaN, r = kNaN;
  std::uint64_t seed = 0;
  double lhs = 0, rhs = 0, ratio = kNaN, stderr = 0, runtime_s = 0;
  std::string method;      // e.g. "direct/full", "gridded/sampled"
  bool degenerate = false;  // rhs == 0; ratio left undefined

  // Fills ratio, or flags the row when rhs vanishes.
  void finish();
};

std::string csv_header();
std::string csv_row(const RatioReport& r, const std::string& experiment_id, const std::string& config_hash);
std::string format_double(double v);

// Append-only CSV file with a single header line.
class CsvSink {
 public:
  explicit CsvSink(const std::string& path);
  void append(const RatioReport& r, const std::string& experiment_id, const std::string& config_hash);

 private:
  std::string path_;
};

}  // namespace lab
