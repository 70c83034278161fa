#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace foresight::metrics {

/// One scalar result. `task` is a task id, or a label such as "mean" for aggregates.
struct MetricRecord {
  std::string run_id;
  std::string strategy;
  std::string task;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// Throws NumericError when any value is non-finite.
void validate_records(const std::vector<MetricRecord>& records);

/// CSV with header run_id,strategy,task,metric,value,seed; values use shortest round-trip form.
std::string records_to_csv(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> records_from_csv(const std::string& text, const std::string& source = "<csv>");

nlohmann::json records_to_json(const std::vector<MetricRecord>& records);
std::vector<MetricRecord> records_from_json(const nlohmann::json& array);

/// Significance stars: "****" p<1e-4, "***" p<1e-3, "**" p<1e-2, otherwise "ns".
std::string significance_stars(double p);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace foresight::metrics
