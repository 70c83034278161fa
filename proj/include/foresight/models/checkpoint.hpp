#pragma once

#include <filesystem>
#include <map>

#include "foresight/models/multitask_model.hpp"
#include "foresight/models/prospective_model.hpp"

namespace foresight {

/// Model plus its per-task dynamics models, as stored on disk.
struct Checkpoint {
  MultiTaskModel model;
  std::map<TaskId, ProspectiveModel> prospective;
};

inline constexpr int kCheckpointVersion = 1;

/// JSON text; doubles are written in shortest round-trip form so reloading is bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string checkpoint_to_string(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_string(const std::string& text);

}  // namespace foresight
