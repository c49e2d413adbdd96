#pragma once

#include <string>
#include <vector>

namespace flsim {

struct ReportResult {
  std::string table;                 // aligned text table
  std::vector<std::string> skipped;  // run dirs that could not be read
  int n_runs = 0;
};

// Collects completed experiment directories (summary.json + metrics.csv)
// into a settings x algorithms table of the task's primary metric, marking
// the best (*) and second-best (+) per setting. Writes report.txt,
// report.json and curves.csv under out_prefix. Missing or incomplete run
// directories are listed, not fatal.
ReportResult write_report(const std::vector<std::string>& run_dirs,
                          const std::string& out_prefix);

}  // namespace flsim
