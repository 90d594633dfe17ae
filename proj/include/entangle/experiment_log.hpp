#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace entangle {

struct LogRecord {
  std::int64_t step;
  std::string metric;
  double value;
};

/// Append-only (step, metric, value) sequence. Steps must be non-decreasing so
/// serialized logs are deterministic for a deterministic producer.
class ExperimentLog {
 public:
  void add(std::int64_t step, const std::string& metric, double value);

  const std::vector<LogRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  /// Last recorded value of a metric; throws std::out_of_range if absent.
  double last(const std::string& metric) const;
  std::vector<std::pair<std::int64_t, double>> series(const std::string& metric) const;

  /// CSV with header step,metric,value; values printed with %.17g.
  std::string to_csv() const;
  /// JSON array of {step, metric, value} objects.
  std::string to_json() const;

  void write_csv(const std::string& path) const;
  void write_json(const std::string& path) const;

 private:
  std::vector<LogRecord> records_;
};

/// %.17g rendering used everywhere a double goes into a text artifact.
std::string format_double(double v);

}  // namespace entangle
