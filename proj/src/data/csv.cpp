#include "foresight/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "foresight/errors.hpp"

namespace foresight {
namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view cell, const std::string& where) {
  cell = trim(cell);
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw DataError(where + ": non-numeric cell '" + std::string(cell) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

TaskSeries parse_csv(const std::string& text, const CsvSchema& schema, TaskId task, double train_fraction,
                     const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  // Header, skipping a UTF-8 byte order mark.
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  ++line_no;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_line(line);
  std::map<std::string, std::size_t, std::less<>> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    if (!column.emplace(name, i).second) throw DataError(source + ":1: duplicate column '" + name + "'");
  }
  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw DataError(source + ":1: schema error, missing column '" + name + "'");
    return it->second;
  };
  std::vector<std::size_t> feature_cols;
  if (schema.features.empty()) {
    for (std::size_t i = 0;; ++i) {
      auto it = column.find("feature_" + std::to_string(i));
      if (it == column.end()) break;
      feature_cols.push_back(it->second);
    }
    if (feature_cols.empty()) throw DataError(source + ":1: schema error, missing column 'feature_0'");
  } else {
    for (const auto& f : schema.features) feature_cols.push_back(require(f));
  }
  const std::size_t target_col = require(schema.target);
  const std::size_t trial_col = require(schema.trial);
  const std::size_t d = feature_cols.size();

  std::vector<double> states;
  TaskSeries s;
  s.task = task;
  std::int64_t trial_counter = -1;
  std::string prev_label;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw DataError(where + ": ragged row, " + std::to_string(cells.size()) + " cells but " +
                      std::to_string(header.size()) + " columns");
    }
    for (std::size_t c : feature_cols) states.push_back(parse_number(cells[c], where));
    s.targets.push_back(parse_number(cells[target_col], where));
    const std::string label(trim(cells[trial_col]));
    if (label.empty()) throw DataError(where + ": empty trial_id");
    // Each contiguous run of a label is its own trial, even if the label reappears later.
    if (s.trial.empty() || label != prev_label) {
      ++trial_counter;
      prev_label = label;
    }
    s.trial.push_back(trial_counter);
  }
  const std::size_t n = s.targets.size();
  if (n == 0) throw DataError(source + ": no data rows");
  s.states = nd::Tensor(nd::Shape{n, d}, std::move(states));
  if (train_fraction > 0.0 && train_fraction < 1.0) {
    s.train_end = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(train_fraction * n)));
  } else {
    s.train_end = n;
  }
  s.validate();
  return s;
}

TaskSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema, TaskId task, double train_fraction) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), schema, task, train_fraction, path.string());
}

std::string to_csv(const TaskSeries& series) {
  series.validate();
  const std::size_t d = series.dim();
  std::string out;
  for (std::size_t i = 0; i < d; ++i) out += "feature_" + std::to_string(i) + ",";
  out += "target,trial_id\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      out += format_double(series.states.at(k, i));
      out += ',';
    }
    out += format_double(series.targets[k]);
    out += ',';
    out += std::to_string(series.trial[k]);
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const TaskSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv(series);
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace foresight
