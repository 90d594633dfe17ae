#include "entangle/experiment_log.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace entangle {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void ExperimentLog::add(std::int64_t step, const std::string& metric, double value) {
  if (!records_.empty() && step < records_.back().step)
    throw std::invalid_argument("ExperimentLog: steps must be non-decreasing");
  records_.push_back({step, metric, value});
}

double ExperimentLog::last(const std::string& metric) const {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it)
    if (it->metric == metric) return it->value;
  throw std::out_of_range("ExperimentLog: no records for metric " + metric);
}

std::vector<std::pair<std::int64_t, double>> ExperimentLog::series(
    const std::string& metric) const {
  std::vector<std::pair<std::int64_t, double>> out;
  for (const auto& r : records_)
    if (r.metric == metric) out.emplace_back(r.step, r.value);
  return out;
}

std::string ExperimentLog::to_csv() const {
  std::ostringstream os;
  os << "step,metric,value\n";
  for (const auto& r : records_) os << r.step << "," << r.metric << "," << format_double(r.value) << "\n";
  return os.str();
}

std::string ExperimentLog::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records_)
    arr.push_back({{"step", r.step}, {"metric", r.metric}, {"value", r.value}});
  return arr.dump(2) + "\n";
}

namespace {
void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ExperimentLog: cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("ExperimentLog: write failed for " + path);
}
}  // namespace

void ExperimentLog::write_csv(const std::string& path) const { write_text(path, to_csv()); }

void ExperimentLog::write_json(const std::string& path) const { write_text(path, to_json()); }

}  // namespace entangle
