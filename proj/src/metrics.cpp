#include "flsim/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace flsim {

EvalResult macro_auc(const std::vector<Vec>& scores,
                     const std::vector<std::vector<int>>& labels) {
  const std::size_t n = scores.size();
  if (n == 0 || labels.size() != n) {
    throw std::invalid_argument("macro_auc: shape mismatch");
  }
  const std::size_t K = scores[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i].size() != K || labels[i].size() != K) {
      throw std::invalid_argument("macro_auc: ragged inputs");
    }
  }

  EvalResult res;
  res.metric = "macro_auc";
  res.n_evaluated = static_cast<long>(n);

  double sum = 0.0;
  int valid = 0;
  std::vector<int> order(n);
  std::vector<double> rank(n);
  for (std::size_t k = 0; k < K; ++k) {
    long n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) n_pos += labels[i][k] != 0 ? 1 : 0;
    const long n_neg = static_cast<long>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) {
      res.skipped_classes += 1;
      res.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (scores[a][k] != scores[b][k]) return scores[a][k] < scores[b][k];
      return a < b;
    });
    // midranks over tie groups (1-based ranks)
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && scores[order[j + 1]][k] == scores[order[i]][k]) ++j;
      const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
      for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
      i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (labels[s][k] != 0) rank_sum_pos += rank[s];
    }
    const double auc = (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1)) /
                       (static_cast<double>(n_pos) * static_cast<double>(n_neg));
    res.per_class.push_back(auc);
    sum += auc;
    valid += 1;
  }
  if (valid == 0) throw std::invalid_argument("macro_auc: no class with both polarities");
  res.value = sum / valid;
  return res;
}

EvalResult f1_score(const std::vector<int>& predictions, const std::vector<int>& labels,
                    F1Averaging averaging) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("f1_score: length mismatch");
  }
  EvalResult res;
  res.metric = averaging == F1Averaging::Binary ? "f1" : "macro_f1";
  res.n_evaluated = static_cast<long>(predictions.size());

  auto one_vs_rest = [&](int cls) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      const bool p = predictions[i] == cls;
      const bool y = labels[i] == cls;
      tp += p && y;
      fp += p && !y;
      fn += !p && y;
    }
    if (tp == 0) {
      res.zero_division = true;  // precision, recall, or their sum is 0/0
      return 0.0;
    }
    const double precision = static_cast<double>(tp) / (tp + fp);
    const double recall = static_cast<double>(tp) / (tp + fn);
    return 2.0 * precision * recall / (precision + recall);
  };

  if (averaging == F1Averaging::Binary) {
    res.value = one_vs_rest(1);
    res.per_class = {res.value};
    return res;
  }
  std::set<int> classes(labels.begin(), labels.end());
  classes.insert(predictions.begin(), predictions.end());
  double sum = 0.0;
  for (int cls : classes) {
    const double f = one_vs_rest(cls);
    res.per_class.push_back(f);
    sum += f;
  }
  res.value = classes.empty() ? 0.0 : sum / static_cast<double>(classes.size());
  return res;
}

EvalResult retrieval_top1(const std::vector<Vec>& queries, const std::vector<Vec>& candidates,
                          const std::vector<int>& pairing) {
  const std::size_t n = queries.size();
  if (n == 0 || candidates.empty()) throw std::invalid_argument("retrieval_top1: empty sets");
  if (pairing.size() != n) throw std::invalid_argument("retrieval_top1: pairing length mismatch");
  {
    std::vector<char> seen(candidates.size(), 0);
    for (int p : pairing) {
      if (p < 0 || p >= static_cast<int>(candidates.size()) || seen[p]) {
        throw std::invalid_argument("retrieval_top1: pairing is not a bijection");
      }
      seen[p] = 1;
    }
  }

  auto cosine = [](const Vec& a, const Vec& b) {
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
  };

  long correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      const double c = cosine(queries[i], candidates[j]);
      if (c > best) {
        best = c;
        arg = static_cast<int>(j);
      }
    }
    if (arg == pairing[i]) correct += 1;
  }
  EvalResult res;
  res.metric = "retrieval_top1";
  res.n_evaluated = static_cast<long>(n);
  res.value = static_cast<double>(correct) / static_cast<double>(n);
  return res;
}

}  // namespace flsim
