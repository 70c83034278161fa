#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "foresight/metrics/records.hpp"

namespace foresight::cli {

enum class Pairing {
  seed,       // one comparison per task, pairs matched by seed
  seed_task,  // one comparison pooling all tasks, pairs matched by (seed, task)
};
std::string to_string(Pairing pairing);
Pairing parse_pairing(const std::string& name);

struct Comparison {
  std::string group;  // task id, or "all" for seed_task pairing
  std::string a;
  std::string b;
  std::size_t n = 0;
  double mean_difference = 0.0;  // mean of a - b
  double statistic = 0.0;        // W = min(W+, W-)
  double p = 1.0;                // two-sided
  double p_corrected = 1.0;      // Bonferroni, factor = number of comparisons
  std::string stars;
  bool exact = false;
  std::string note;
};

/// Wilcoxon signed-rank comparisons of `metric` between every pair of strategies (or each strategy
/// against `baseline`). Identical values give p = 1. Throws DataError listing orphaned pairing keys.
std::vector<Comparison> compare_records(const std::vector<metrics::MetricRecord>& records, const std::string& metric,
                                        Pairing pairing, const std::optional<std::string>& baseline = std::nullopt);

std::string comparisons_csv(const std::vector<Comparison>& rows);

/// Records from a report directory, a metrics CSV or a report JSON.
std::vector<metrics::MetricRecord> load_records(const std::filesystem::path& path);

}  // namespace foresight::cli
