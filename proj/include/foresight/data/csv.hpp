#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "foresight/data/task_series.hpp"

namespace foresight {

/// Column roles. Empty `features` means "every column named feature_<i>, in index order".
struct CsvSchema {
  std::vector<std::string> features;
  std::string target = "target";
  std::string trial = "trial_id";
};

/// Parses `feature_0,...,feature_{d-1},target,trial_id` style files (UTF-8, '.' decimal point).
/// Errors name the offending line. The whole file becomes the training split unless
/// `train_fraction` is in (0,1).
TaskSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema = {}, TaskId task = {},
                    double train_fraction = 0.8);
TaskSeries parse_csv(const std::string& text, const CsvSchema& schema = {}, TaskId task = {},
                     double train_fraction = 0.8, const std::string& source = "<memory>");

/// Writes the canonical header and shortest round-trip decimal values.
void write_csv(const std::filesystem::path& path, const TaskSeries& series);
std::string to_csv(const TaskSeries& series);

}  // namespace foresight
