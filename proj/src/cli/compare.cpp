#include "foresight/cli/compare.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "foresight/errors.hpp"
#include "foresight/metrics/wilcoxon.hpp"

namespace foresight::cli {

using metrics::MetricRecord;

std::string to_string(Pairing pairing) { return pairing == Pairing::seed ? "seed" : "seed_task"; }

Pairing parse_pairing(const std::string& name) {
  if (name == "seed") return Pairing::seed;
  if (name == "seed_task") return Pairing::seed_task;
  throw ConfigError("unknown pairing '" + name + "' (expected seed or seed_task)");
}

namespace {

using Key = std::pair<std::uint64_t, std::string>;  // seed, task ("" when pairing by seed)

std::string key_name(const Key& k) {
  return "seed " + std::to_string(k.first) + (k.second.empty() ? "" : " task " + k.second);
}

}  // namespace

std::vector<Comparison> compare_records(const std::vector<MetricRecord>& records, const std::string& metric,
                                        Pairing pairing, const std::optional<std::string>& baseline) {
  std::vector<std::string> strategies;
  // group -> strategy -> key -> value
  std::map<std::string, std::map<std::string, std::map<Key, double>>> table;
  for (const auto& r : records) {
    if (r.metric != metric) continue;
    if (std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end()) strategies.push_back(r.strategy);
    const std::string group = pairing == Pairing::seed ? r.task : "all";
    const Key key{r.seed, pairing == Pairing::seed ? "" : r.task};
    auto& slot = table[group][r.strategy];
    if (slot.count(key)) {
      throw DataError("compare: duplicate " + metric + " record for " + r.strategy + " " + key_name(key) +
                      (pairing == Pairing::seed ? " task " + r.task : ""));
    }
    slot[key] = r.value;
  }
  if (strategies.empty()) throw DataError("compare: no records for metric '" + metric + "'");

  std::vector<std::pair<std::string, std::string>> pairs;
  if (baseline) {
    if (std::find(strategies.begin(), strategies.end(), *baseline) == strategies.end())
      throw DataError("compare: baseline '" + *baseline + "' has no records for " + metric);
    for (const auto& s : strategies)
      if (s != *baseline) pairs.emplace_back(s, *baseline);
  } else {
    for (std::size_t i = 0; i < strategies.size(); ++i)
      for (std::size_t j = i + 1; j < strategies.size(); ++j) pairs.emplace_back(strategies[i], strategies[j]);
  }
  if (pairs.empty()) throw DataError("compare: need at least two strategies with records for '" + metric + "'");

  std::vector<Comparison> rows;
  for (const auto& [group, by_strategy] : table) {
    for (const auto& [a, b] : pairs) {
      const auto ia = by_strategy.find(a), ib = by_strategy.find(b);
      if (ia == by_strategy.end() || ib == by_strategy.end()) {
        throw DataError("compare: group " + group + " lacks records for " + (ia == by_strategy.end() ? a : b));
      }
      std::vector<std::string> orphans;
      for (const auto& [k, _] : ia->second)
        if (!ib->second.count(k)) orphans.push_back(a + ": " + key_name(k));
      for (const auto& [k, _] : ib->second)
        if (!ia->second.count(k)) orphans.push_back(b + ": " + key_name(k));
      if (!orphans.empty()) {
        std::string msg = "compare: unmatched pairing keys in group " + group + ":";
        for (const auto& o : orphans) msg += "\n  " + o;
        throw DataError(msg);
      }
      Comparison c;
      c.group = group;
      c.a = a;
      c.b = b;
      std::vector<double> diffs;
      for (const auto& [k, va] : ia->second) diffs.push_back(va - ib->second.at(k));
      c.n = diffs.size();
      for (double d : diffs) c.mean_difference += d;
      c.mean_difference /= static_cast<double>(diffs.size());
      const std::size_t nonzero = static_cast<std::size_t>(std::count_if(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; }));
      if (nonzero == 0) {
        c.p = 1.0;
        c.exact = true;
        c.note = "identical";
      } else if (nonzero < 5) {
        c.p = 1.0;
        c.note = "fewer than 5 non-zero differences";
      } else {
        const auto w = metrics::wilcoxon_signed_rank(diffs);
        c.statistic = w.statistic;
        c.p = w.p_two_sided;
        c.exact = w.exact;
      }
      rows.push_back(c);
    }
  }
  const double factor = static_cast<double>(rows.size());
  for (auto& r : rows) {
    r.p_corrected = std::min(1.0, r.p * factor);
    r.stars = metrics::significance_stars(r.p_corrected);
  }
  return rows;
}

std::string comparisons_csv(const std::vector<Comparison>& rows) {
  std::ostringstream os;
  os << "group,a,b,n,mean_difference,statistic,p,p_bonferroni,stars,exact,note\n";
  for (const auto& r : rows) {
    os << r.group << ',' << r.a << ',' << r.b << ',' << r.n << ',' << metrics::format_double(r.mean_difference) << ','
       << metrics::format_double(r.statistic) << ',' << metrics::format_double(r.p) << ','
       << metrics::format_double(r.p_corrected) << ',' << r.stars << ',' << (r.exact ? 1 : 0) << ',' << r.note << '\n';
  }
  return os.str();
}

std::vector<MetricRecord> load_records(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  fs::path file = path;
  if (fs::is_directory(path)) file = path / "metrics.csv";
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read records from '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  if (file.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("'" + file.string() + "': " + e.what());
    }
    return metrics::records_from_json(j.contains("records") ? j.at("records") : j);
  }
  return metrics::records_from_csv(ss.str(), file.string());
}

}  // namespace foresight::cli
