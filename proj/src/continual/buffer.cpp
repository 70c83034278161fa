#include "foresight/continual/buffer.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "foresight/errors.hpp"
#include "foresight/metrics/records.hpp"
#include "foresight/ndkernel/random.hpp"

namespace foresight {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::prospective: return "prospective";
    case Provenance::noise: return "noise";
  }
  return "?";
}

Provenance parse_provenance(const std::string& name) {
  if (name == "original") return Provenance::original;
  if (name == "prospective") return Provenance::prospective;
  if (name == "noise") return Provenance::noise;
  throw DataError("unknown provenance '" + name + "'");
}

RehearsalBuffer::RehearsalBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 2) throw ConfigError("rehearsal buffer: capacity must be >= 2");
}

std::size_t RehearsalBuffer::quota(std::size_t tasks) const {
  if (tasks == 0) return 0;
  return 2 * (capacity_ / (2 * tasks));
}

void RehearsalBuffer::set_task(TaskId task, std::vector<BufferEntry> entries) {
  const std::size_t others = size() - count(task);
  if (others + entries.size() > capacity_) {
    throw UsageError("rehearsal buffer: " + std::to_string(others + entries.size()) + " entries exceed capacity " +
                     std::to_string(capacity_));
  }
  for (const auto& e : entries) {
    if (e.window.task != task) throw UsageError("rehearsal buffer: entry of task " + e.window.task.str() + " filed under " + task.str());
  }
  entries_[task] = std::move(entries);
}

const std::vector<BufferEntry>& RehearsalBuffer::entries(TaskId task) const {
  auto it = entries_.find(task);
  if (it == entries_.end()) throw UsageError("rehearsal buffer: no entries for task " + task.str());
  return it->second;
}

std::vector<TaskId> RehearsalBuffer::tasks() const {
  std::vector<TaskId> out;
  for (const auto& [t, e] : entries_) out.push_back(t);
  return out;
}

std::size_t RehearsalBuffer::size() const {
  std::size_t n = 0;
  for (const auto& [t, e] : entries_) n += e.size();
  return n;
}

std::size_t RehearsalBuffer::count(TaskId task) const {
  auto it = entries_.find(task);
  return it == entries_.end() ? 0 : it->second.size();
}

std::size_t RehearsalBuffer::count(Provenance provenance) const {
  std::size_t n = 0;
  for (const auto& [t, es] : entries_)
    for (const auto& e : es) n += e.provenance == provenance;
  return n;
}

bool RehearsalBuffer::balanced() const {
  if (entries_.empty()) return true;
  std::size_t lo = SIZE_MAX, hi = 0;
  for (const auto& [t, e] : entries_) lo = std::min(lo, e.size()), hi = std::max(hi, e.size());
  return hi - lo <= 1;
}

std::vector<std::size_t> reservoir_select(std::size_t n, std::size_t count, std::uint64_t seed) {
  count = std::min(count, n);
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(n);
  for (std::size_t i = 0; i < n; ++i) keyed[i] = {nd::derive_seed(seed, i), i};
  std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end());
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = keyed[i].second;
  std::sort(out.begin(), out.end());
  return out;
}

std::string dump_buffer(const RehearsalBuffer& buffer) {
  std::string out = "foresight-buffer 1\ncapacity " + std::to_string(buffer.capacity()) + "\n";
  for (TaskId task : buffer.tasks()) {
    for (const auto& e : buffer.entries(task)) {
      const auto& x = e.window.inputs;
      out += "entry " + task.str() + ' ' + to_string(e.provenance) + ' ' + std::to_string(e.pair) + ' ' +
             std::to_string(e.window.step) + ' ' + metrics::format_double(e.window.target) + ' ' +
             std::to_string(x.dim(0)) + ' ' + std::to_string(x.dim(1));
      for (double v : x.data()) out += ' ' + metrics::format_double(v);
      out += '\n';
    }
  }
  return out;
}

RehearsalBuffer restore_buffer(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "foresight-buffer 1") throw DataError("buffer dump: bad header");
  std::string word;
  std::size_t capacity = 0;
  if (!std::getline(in, line)) throw DataError("buffer dump: missing capacity");
  {
    std::istringstream ls(line);
    if (!(ls >> word >> capacity) || word != "capacity") throw DataError("buffer dump: bad capacity line");
  }
  RehearsalBuffer buffer(capacity);
  std::map<TaskId, std::vector<BufferEntry>> staged;
  auto number = [](const std::string& s, auto& value, std::size_t lineno) {
    auto r = std::from_chars(s.data(), s.data() + s.size(), value);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw DataError("buffer dump line " + std::to_string(lineno) + ": bad number '" + s + "'");
    }
  };
  for (std::size_t lineno = 3; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    while (ls >> word) tok.push_back(word);
    if (tok.size() < 8 || tok[0] != "entry") throw DataError("buffer dump line " + std::to_string(lineno) + ": malformed");
    BufferEntry e;
    std::uint32_t task = 0;
    std::size_t T = 0, d = 0;
    number(tok[1], task, lineno);
    e.provenance = parse_provenance(tok[2]);
    number(tok[3], e.pair, lineno);
    number(tok[4], e.window.step, lineno);
    number(tok[5], e.window.target, lineno);
    number(tok[6], T, lineno);
    number(tok[7], d, lineno);
    if (tok.size() != 8 + T * d) throw DataError("buffer dump line " + std::to_string(lineno) + ": wrong value count");
    std::vector<double> values(T * d);
    for (std::size_t i = 0; i < values.size(); ++i) number(tok[8 + i], values[i], lineno);
    e.window.inputs = nd::Tensor(nd::Shape{T, d}, std::move(values));
    e.window.task = TaskId{task};
    staged[e.window.task].push_back(std::move(e));
  }
  for (auto& [t, es] : staged) buffer.set_task(t, std::move(es));
  return buffer;
}

}  // namespace foresight
