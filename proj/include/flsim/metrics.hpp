#pragma once

#include <string>

#include "flsim/vec.hpp"

namespace flsim {

struct EvalResult {
  std::string metric;
  double value = 0.0;  // in [0, 1]; CSV reporting scales by 100
  long n_evaluated = 0;
  std::vector<double> per_class;
  int skipped_classes = 0;    // single-polarity classes excluded from macro AUC
  bool zero_division = false; // f1 denominators hit zero
};

// Per-class ROC AUC via the rank statistic with midrank tie handling, macro
// mean over classes that have both positives and negatives.
EvalResult macro_auc(const std::vector<Vec>& scores,
                     const std::vector<std::vector<int>>& labels);

enum class F1Averaging { Binary, Macro };

// Binary: F1 of class 1. Macro: mean one-vs-rest F1 over observed classes.
// Zero denominators yield 0 with the zero_division flag set.
EvalResult f1_score(const std::vector<int>& predictions, const std::vector<int>& labels,
                    F1Averaging averaging);

// Fraction of queries whose nearest candidate by cosine similarity is the
// true partner (pairing[i] is query i's candidate); ties break to the lowest
// candidate index.
EvalResult retrieval_top1(const std::vector<Vec>& queries, const std::vector<Vec>& candidates,
                          const std::vector<int>& pairing);

}  // namespace flsim
