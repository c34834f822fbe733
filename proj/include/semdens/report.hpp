#pragma once

// CSV and markdown renderings of evaluation results. Output is a pure
// function of the result objects, so reports are byte-stable.

#include <algorithm>
#include <cstdio>
#include <map>
#include <span>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "semdens/harness.hpp"

namespace semdens {

enum class TableValue { auroc, aupr };

inline std::string format_number(double v, int digits = 12) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v + 0.0);
  return buf;
}

inline std::string format_cell(const std::optional<double>& v) { return v ? format_number(*v) : "n/a"; }

namespace detail {

inline const std::optional<double>& pick(const MetricCell& c, TableValue which) {
  return which == TableValue::auroc ? c.auroc : c.aupr;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

/// model,dataset,<metric>... with one row per configuration.
inline void write_table_csv(std::ostream& os, const EvalTable& table, TableValue which) {
  os << "model,dataset";
  for (Metric m : table.metrics) os << ',' << info(m).name;
  os << '\n';
  for (const auto& row : table.rows) {
    os << row.key.model << ',' << row.key.dataset;
    for (Metric m : table.metrics) os << ',' << format_cell(detail::pick(row[m], which));
    os << '\n';
  }
}

/// One markdown table per dataset, models as rows and metrics as columns.
/// The best value in each row is bold.
inline void write_table_markdown(std::ostream& os, const EvalTable& table, TableValue which) {
  const char* label = which == TableValue::auroc ? "AUROC" : "AUPR";
  std::vector<std::string> datasets;
  for (const auto& r : table.rows) {
    if (std::find(datasets.begin(), datasets.end(), r.key.dataset) == datasets.end()) {
      datasets.push_back(r.key.dataset);
    }
  }
  std::sort(datasets.begin(), datasets.end());
  bool first = true;
  for (const auto& ds : datasets) {
    if (!first) os << '\n';
    first = false;
    os << "### " << (ds.empty() ? "(unnamed dataset)" : ds) << "\n\n";
    os << "| " << label;
    for (Metric m : table.metrics) os << " | " << info(m).name;
    os << " |\n|---";
    for (std::size_t i = 0; i < table.metrics.size(); ++i) os << "|---";
    os << "|\n";
    for (const auto& row : table.rows) {
      if (row.key.dataset != ds) continue;
      std::optional<double> best;
      for (Metric m : table.metrics) {
        const auto& v = detail::pick(row[m], which);
        if (v && (!best || *v > *best)) best = v;
      }
      os << "| " << (row.key.model.empty() ? "(unnamed model)" : row.key.model);
      for (Metric m : table.metrics) {
        const auto& v = detail::pick(row[m], which);
        if (!v) {
          os << " | n/a";
          continue;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", *v);
        if (best && *v == *best) {
          os << " | **" << buf << "**";
        } else {
          os << " | " << buf;
        }
      }
      os << " |\n";
    }
  }
}

/// Reads the CSV written by write_table_csv back as an AUROC table.
inline EvalTable read_table_csv(std::istream& is) {
  EvalTable table;
  std::string line;
  if (!std::getline(is, line)) throw Error("empty table CSV");
  const auto header = detail::split(line, ',');
  if (header.size() < 2 || header[0] != "model" || header[1] != "dataset") {
    throw Error("table CSV must start with model,dataset");
  }
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto m = metric_from_name(header[c]);
    if (!m) throw Error("unknown metric column '" + header[c] + "'");
    table.metrics.push_back(*m);
  }
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != header.size()) {
      throw Error("table CSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                  " fields");
    }
    EvalRow row;
    row.key = {fields[0], fields[1]};
    for (std::size_t c = 2; c < fields.size(); ++c) {
      if (fields[c] == "n/a") continue;
      try {
        std::size_t used = 0;
        const double v = std::stod(fields[c], &used);
        if (used != fields[c].size()) throw std::invalid_argument("trailing characters");
        row[table.metrics[c - 2]].auroc = v;
      } catch (const std::exception&) {
        throw Error("table CSV line " + std::to_string(line_no) + ": bad number '" + fields[c] + "'");
      }
    }
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return table;
}

inline void write_sweep_csv(std::ostream& os, std::span<const SweepPoint> sweep, std::span<const Metric> metrics) {
  os << "model,dataset,threshold";
  for (Metric m : metrics) os << ',' << info(m).name;
  os << '\n';
  // Rows grouped by configuration, thresholds ascending within each.
  std::map<ConfigKey, std::vector<std::pair<double, const EvalRow*>>> rows;
  for (const auto& point : sweep) {
    for (const auto& r : point.table.rows) rows[r.key].push_back({point.threshold, &r});
  }
  for (auto& [key, points] : rows) {
    std::stable_sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [t, r] : points) {
      os << key.model << ',' << key.dataset << ',' << format_number(t);
      for (Metric m : metrics) os << ',' << format_cell((*r)[m].auroc);
      os << '\n';
    }
  }
}

inline void write_ablation_csv(std::ostream& os, const AblationCurve& curve) {
  os << "model,dataset,k,SD,records_used,records_skipped\n";
  for (const auto& p : curve.points) {
    os << p.key.model << ',' << p.key.dataset << ',' << p.k << ',' << format_cell(p.auroc) << ',' << p.records_used
       << ',' << p.records_skipped << '\n';
  }
}

inline void write_groups_csv(std::ostream& os, const GroupBreakdown& groups) {
  os << "model,dataset,beam_group,n,accuracy";
  for (Metric m : groups.metrics) os << ',' << info(m).name;
  os << '\n';
  for (const auto& r : groups.rows) {
    os << r.key.model << ',' << r.key.dataset << ',' << r.beam_group << ',' << r.n << ','
       << format_number(r.accuracy());
    for (Metric m : groups.metrics) os << ',' << format_cell(r[m]);
    os << '\n';
  }
}

inline void write_ttest_csv(std::ostream& os, std::span<const TTestRow> rows) {
  os << "metric_a,metric_b,n,mean_diff,t,df,p,note\n";
  for (const auto& r : rows) {
    os << info(r.a).name << ',' << info(r.b).name << ',';
    if (r.result) {
      const auto& t = *r.result;
      os << t.n << ',' << format_number(t.mean_difference) << ',' << format_number(t.t) << ',' << format_number(t.df)
         << ',' << format_number(t.p) << ',';
    } else {
      os << ",,,,,";
    }
    std::string note = r.note;
    std::replace(note.begin(), note.end(), ',', ';');
    os << note << '\n';
  }
}

}  // namespace semdens
