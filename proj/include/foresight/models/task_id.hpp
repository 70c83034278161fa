#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace foresight {

/// Identifies one locomotion task.
struct TaskId {
  std::uint32_t value = 0;

  friend auto operator<=>(const TaskId&, const TaskId&) = default;
  std::string str() const { return std::to_string(value); }
};

}  // namespace foresight

template <>
struct std::hash<foresight::TaskId> {
  std::size_t operator()(const foresight::TaskId& t) const noexcept { return std::hash<std::uint32_t>{}(t.value); }
};
