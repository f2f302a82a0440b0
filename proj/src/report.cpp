#include "imhs/runner.hpp"
#include "imhs/text.hpp"

#include <cstdio>
#include <map>
#include <tuple>

namespace imhs::runner {

namespace {

using RowKey = std::tuple<std::string, std::string, std::string>;  // method, strategy, combo
using ColKey = std::pair<std::string, std::string>;                // dataset, model

std::string method_label(const std::string& method) {
  if (method == "prompt") return "Prompt";
  if (method == "embed") return "Embed";
  return method;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

template <typename Key>
std::size_t index_of(std::vector<Key>& keys, const Key& key) {
  auto it = std::find(keys.begin(), keys.end(), key);
  if (it != keys.end()) return static_cast<std::size_t>(it - keys.begin());
  keys.push_back(key);
  return keys.size() - 1;
}

}  // namespace

Report report(const RunResult& result) {
  std::vector<RowKey> row_keys;
  std::vector<ColKey> col_keys;
  std::map<std::pair<std::size_t, std::size_t>, const RunRow*> cells;
  for (const auto& r : result.rows) {
    const auto ri = index_of(row_keys, RowKey{r.method, r.strategy, r.combo});
    const auto ci = index_of(col_keys, ColKey{r.dataset, r.model});
    cells[{ri, ci}] = &r;
  }

  // Best scored cell per column; strict ">" keeps the first row on ties.
  std::vector<std::optional<std::size_t>> best(col_keys.size());
  for (std::size_t c = 0; c < col_keys.size(); ++c) {
    double best_f1 = -1.0;
    for (std::size_t r = 0; r < row_keys.size(); ++r) {
      auto it = cells.find({r, c});
      if (it == cells.end() || it->second->failed()) continue;
      if (it->second->f1_positive > best_f1) {
        best_f1 = it->second->f1_positive;
        best[c] = r;
      }
    }
  }

  Report rep;
  std::string& md = rep.markdown;
  md += "| Method | Strategy | Codetype |";
  for (const auto& [dataset, model] : col_keys) md += " " + dataset + " / " + model + " |";
  md += "\n|---|---|---|";
  for (std::size_t c = 0; c < col_keys.size(); ++c) md += "---:|";
  md += '\n';
  for (std::size_t r = 0; r < row_keys.size(); ++r) {
    const auto& [method, strategy, combo] = row_keys[r];
    md += "| " + method_label(method) + " | " + strategy + " | " + combo + " |";
    for (std::size_t c = 0; c < col_keys.size(); ++c) {
      auto it = cells.find({r, c});
      std::string value;
      if (it == cells.end()) {
        value = "-";
      } else if (it->second->failed()) {
        value = "error";
      } else {
        value = fixed4(it->second->f1_positive);
        if (best[c] == r) value = "**" + value + "**";
      }
      md += " " + value + " |";
    }
    md += '\n';
  }
  md += "\nF1 is positive-class (implicit hate) F1 on the test split; the best cell per column is bold.\n";

  std::string& csv = rep.csv;
  csv = "method,strategy,combo,dataset,model,f1_positive,f1_macro,status,best\n";
  for (std::size_t r = 0; r < row_keys.size(); ++r) {
    for (std::size_t c = 0; c < col_keys.size(); ++c) {
      auto it = cells.find({r, c});
      if (it == cells.end()) continue;
      const RunRow& row = *it->second;
      csv += csv_escape(row.method) + "," + csv_escape(row.strategy) + "," + csv_escape(row.combo) + "," +
             csv_escape(row.dataset) + "," + csv_escape(row.model) + "," + format_double(row.f1_positive) + "," +
             format_double(row.f1_macro) + "," + row.status + "," + (best[c] == r ? "1" : "0") + "\n";
    }
  }
  return rep;
}

}  // namespace imhs::runner
