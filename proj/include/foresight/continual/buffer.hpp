#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "foresight/models/window.hpp"

namespace foresight {

enum class Provenance { original, prospective, noise };

std::string to_string(Provenance p);
Provenance parse_provenance(const std::string& name);

struct BufferEntry {
  Window window;
  Provenance provenance = Provenance::original;
  /// Derived entries share the pair id of the original they were made from.
  std::size_t pair = 0;

  friend bool operator==(const BufferEntry&, const BufferEntry&) = default;
};

/// Rehearsal store holding the same number of entries for every task.
class RehearsalBuffer {
 public:
  explicit RehearsalBuffer(std::size_t capacity = 3000);

  std::size_t capacity() const noexcept { return capacity_; }
  /// Entries each task may hold when `tasks` tasks share the buffer; even, so originals can be paired.
  std::size_t quota(std::size_t tasks) const;

  /// Replaces the entries of `task`. Throws UsageError if the capacity would be exceeded.
  void set_task(TaskId task, std::vector<BufferEntry> entries);
  const std::vector<BufferEntry>& entries(TaskId task) const;
  bool contains(TaskId task) const { return entries_.count(task) != 0; }
  std::vector<TaskId> tasks() const;

  std::size_t size() const;
  std::size_t count(TaskId task) const;
  std::size_t count(Provenance provenance) const;
  /// Largest minus smallest per-task count is at most one.
  bool balanced() const;
  void clear() { entries_.clear(); }

  friend bool operator==(const RehearsalBuffer&, const RehearsalBuffer&) = default;

 private:
  std::size_t capacity_;
  std::map<TaskId, std::vector<BufferEntry>> entries_;
};

/// Positions of the `count` items with the smallest seeded priority among `n` candidates,
/// in ascending order. Priorities depend only on (seed, candidate index), so shrinking `count`
/// keeps a subset of the earlier selection.
std::vector<std::size_t> reservoir_select(std::size_t n, std::size_t count, std::uint64_t seed);

/// Line-oriented text dump with provenance tags; restore is exact.
std::string dump_buffer(const RehearsalBuffer& buffer);
RehearsalBuffer restore_buffer(const std::string& text);

}  // namespace foresight

template <>
struct std::hash<foresight::Provenance> {
  std::size_t operator()(foresight::Provenance p) const noexcept { return static_cast<std::size_t>(p); }
};
