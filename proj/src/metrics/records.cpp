#include "foresight/metrics/records.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "foresight/errors.hpp"

namespace foresight::metrics {

void validate_records(const std::vector<MetricRecord>& records) {
  for (const auto& r : records) {
    if (!std::isfinite(r.value)) {
      throw NumericError("metric record " + r.strategy + "/" + r.task + "/" + r.metric + " (seed " +
                         std::to_string(r.seed) + ") is not finite");
    }
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

void check_field(const std::string& s) {
  if (s.find_first_of(",\n\r\"") != std::string::npos) throw UsageError("metric record field contains a separator: " + s);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string records_to_csv(const std::vector<MetricRecord>& records) {
  std::string out = "run_id,strategy,task,metric,value,seed\n";
  for (const auto& r : records) {
    for (const auto* f : {&r.run_id, &r.strategy, &r.task, &r.metric}) check_field(*f);
    out += r.run_id + ',' + r.strategy + ',' + r.task + ',' + r.metric + ',' + format_double(r.value) + ',' +
           std::to_string(r.seed) + '\n';
  }
  return out;
}

std::vector<MetricRecord> records_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "run_id,strategy,task,metric,value,seed") {
    throw DataError(source + ":1: unexpected metric CSV header");
  }
  std::vector<MetricRecord> out;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const auto cells = split(line);
    const std::string where = source + ":" + std::to_string(lineno);
    if (cells.size() != 6) throw DataError(where + ": expected 6 fields, got " + std::to_string(cells.size()));
    MetricRecord r{cells[0], cells[1], cells[2], cells[3], 0.0, 0};
    auto v = std::from_chars(cells[4].data(), cells[4].data() + cells[4].size(), r.value);
    auto s = std::from_chars(cells[5].data(), cells[5].data() + cells[5].size(), r.seed);
    if (v.ec != std::errc() || v.ptr != cells[4].data() + cells[4].size()) throw DataError(where + ": bad value");
    if (s.ec != std::errc() || s.ptr != cells[5].data() + cells[5].size()) throw DataError(where + ": bad seed");
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json records_to_json(const std::vector<MetricRecord>& records) {
  auto arr = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({{"run_id", r.run_id},
                   {"strategy", r.strategy},
                   {"task", r.task},
                   {"metric", r.metric},
                   {"value", r.value},
                   {"seed", r.seed}});
  }
  return arr;
}

std::vector<MetricRecord> records_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw DataError("metric records: expected a JSON array");
  std::vector<MetricRecord> out;
  for (const auto& j : array) {
    try {
      out.push_back({j.at("run_id").get<std::string>(), j.at("strategy").get<std::string>(),
                     j.at("task").get<std::string>(), j.at("metric").get<std::string>(), j.at("value").get<double>(),
                     j.at("seed").get<std::uint64_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("metric records: ") + e.what());
    }
  }
  return out;
}

std::string significance_stars(double p) {
  if (p < 1e-4) return "****";
  if (p < 1e-3) return "***";
  if (p < 1e-2) return "**";
  return "ns";
}

}  // namespace foresight::metrics
