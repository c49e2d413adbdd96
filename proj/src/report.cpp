#include "flsim/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "flsim/errors.hpp"

#include <json.hpp>

namespace flsim {

namespace {

using nlohmann::json;

struct RunSummary {
  std::string dir;
  std::string algorithm;
  std::string task;
  std::string partition;
  double alpha = 0.0;
  int n_clients = 0;
  std::string metric;  // primary metric for the task
  double mean = 0.0;
  double stddev = 0.0;
};

std::string primary_metric(const std::string& task) {
  if (task == "multiclass") return "accuracy";
  if (task == "multilabel") return "macro_auc";
  return "retrieval_top1";
}

std::string setting_key(const RunSummary& r) {
  std::ostringstream key;
  key << r.task << " | " << r.partition;
  if (r.partition == "dirichlet" || r.partition == "multilabel_dirichlet" ||
      r.partition == "metadata_dirichlet") {
    key << "(alpha=" << r.alpha << ")";
  }
  key << " | clients=" << r.n_clients;
  return key.str();
}

std::string format_cell(double mean, double stddev) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f+-%.2f", mean * 100.0, stddev * 100.0);
  return std::string(buf);
}

}  // namespace

ReportResult write_report(const std::vector<std::string>& run_dirs,
                          const std::string& out_prefix) {
  namespace fs = std::filesystem;
  ReportResult result;
  std::vector<RunSummary> runs;

  for (const auto& dir : run_dirs) {
    try {
      std::ifstream in(fs::path(dir) / "summary.json");
      if (!in) {
        result.skipped.push_back(dir + " (no summary.json)");
        continue;
      }
      json s = json::parse(in);
      RunSummary r;
      r.dir = dir;
      r.algorithm = s.at("algorithm").get<std::string>();
      r.task = s.at("task").get<std::string>();
      r.partition = s.at("partition").get<std::string>();
      r.alpha = s.at("alpha").get<double>();
      r.n_clients = s.at("n_clients").get<int>();
      r.metric = primary_metric(r.task);
      const json& ft = s.at("final_test");
      if (!ft.contains(r.metric)) {
        result.skipped.push_back(dir + " (missing metric " + r.metric + ")");
        continue;
      }
      r.mean = ft.at(r.metric).at("mean").get<double>();
      r.stddev = ft.at(r.metric).at("std").get<double>();
      runs.push_back(std::move(r));
    } catch (const std::exception& e) {
      result.skipped.push_back(dir + " (" + e.what() + ")");
    }
  }
  result.n_runs = static_cast<int>(runs.size());
  if (runs.empty() && result.skipped.size() == run_dirs.size() && !run_dirs.empty()) {
    // fall through; an empty table plus the skip list is still useful
  }

  // settings x algorithms
  std::set<std::string> algorithms;
  std::map<std::string, std::map<std::string, const RunSummary*>> grid;
  std::map<std::string, std::string> setting_metric;
  for (const auto& r : runs) {
    algorithms.insert(r.algorithm);
    grid[setting_key(r)][r.algorithm] = &r;
    setting_metric[setting_key(r)] = r.metric;
  }

  std::ostringstream table;
  std::vector<std::string> algo_list(algorithms.begin(), algorithms.end());

  std::size_t setting_width = std::string("setting").size();
  for (const auto& [key, row] : grid) setting_width = std::max(setting_width, key.size());
  std::size_t cell_width = 16;

  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(s.size() < w ? w - s.size() : 0, ' ');
  };

  table << pad("setting", setting_width) << "  " << pad("metric", 14);
  for (const auto& a : algo_list) table << "  " << pad(a, cell_width);
  table << "\n";

  json machine = json::array();
  for (const auto& [key, row] : grid) {
    // rank cells for best / second-best marking
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [algo, run] : row) ranked.push_back({run->mean, algo});
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const std::string best = ranked.empty() ? "" : ranked[0].second;
    const std::string second = ranked.size() > 1 ? ranked[1].second : "";

    table << pad(key, setting_width) << "  " << pad(setting_metric[key], 14);
    json row_json;
    row_json["setting"] = key;
    row_json["metric"] = setting_metric[key];
    json cells;
    for (const auto& a : algo_list) {
      auto it = row.find(a);
      if (it == row.end()) {
        table << "  " << pad("-", cell_width);
        continue;
      }
      std::string cell = format_cell(it->second->mean, it->second->stddev);
      if (a == best) cell += "*";
      else if (a == second) cell += "+";
      table << "  " << pad(cell, cell_width);
      cells[a] = {{"mean", it->second->mean},
                  {"std", it->second->stddev},
                  {"best", a == best},
                  {"second", a == second}};
    }
    row_json["cells"] = cells;
    machine.push_back(row_json);
    table << "\n";
  }
  table << "\n(* best per setting, + second best; cells are mean +- std, x100 over seeds)\n";
  if (!result.skipped.empty()) {
    table << "\nskipped runs:\n";
    for (const auto& s : result.skipped) table << "  " << s << "\n";
  }
  result.table = table.str();

  fs::path prefix(out_prefix);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  std::ofstream(out_prefix + "report.txt") << result.table;
  {
    json doc;
    doc["rows"] = machine;
    doc["skipped"] = result.skipped;
    std::ofstream(out_prefix + "report.json") << doc.dump(2) << "\n";
  }

  // Per-round curve data pooled over seeds per run directory.
  std::ofstream curves(out_prefix + "curves.csv");
  curves << "run,round,split,metric,mean,std\n";
  for (const auto& r : runs) {
    std::ifstream csv(fs::path(r.dir) / "metrics.csv");
    if (!csv) continue;
    std::string line;
    std::getline(csv, line);  // header
    // (round, split, metric) -> values over seeds
    std::map<std::tuple<int, std::string, std::string>, std::vector<double>> series;
    while (std::getline(csv, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string seed, round, split, metric, value;
      std::getline(ls, seed, ',');
      std::getline(ls, round, ',');
      std::getline(ls, split, ',');
      std::getline(ls, metric, ',');
      std::getline(ls, value, ',');
      series[{std::stoi(round), split, metric}].push_back(std::stod(value));
    }
    for (const auto& [key, vs] : series) {
      double mean = 0.0;
      for (double v : vs) mean += v;
      mean /= static_cast<double>(vs.size());
      double var = 0.0;
      if (vs.size() > 1) {
        for (double v : vs) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vs.size() - 1);
      }
      curves << fs::path(r.dir).filename().string() << "," << std::get<0>(key) << ","
             << std::get<1>(key) << "," << std::get<2>(key) << "," << mean << ","
             << std::sqrt(var) << "\n";
    }
  }
  return result;
}

}  // namespace flsim
