#include "flsim/partition.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "flsim/errors.hpp"
#include "flsim/rng.hpp"

namespace flsim {

namespace {

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Sample index lists per group, groups ordered by ascending key.
std::vector<std::vector<int>> group_by_label(const std::vector<int>& labels) {
  std::map<int, std::vector<int>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_label[labels[i]].push_back(static_cast<int>(i));
  }
  std::vector<std::vector<int>> groups;
  groups.reserve(by_label.size());
  for (auto& [key, idxs] : by_label) groups.push_back(std::move(idxs));
  return groups;
}

// Allocates each group's samples across clients by a fresh Dirichlet draw.
// Later groups overwrite earlier assignments for shared samples, which is
// what gives multi-label partitioning its last-class-wins semantics.
void allocate_groups(const std::vector<std::vector<int>>& groups, int n_clients,
                     double alpha, Rng& rng, std::vector<int>& assignments) {
  for (const auto& group : groups) {
    if (group.empty()) continue;
    std::vector<double> p = rng.dirichlet(alpha, n_clients);
    std::vector<int> order = group;
    rng.shuffle(order);
    const auto n = static_cast<double>(order.size());
    std::size_t start = 0;
    double cum = 0.0;
    for (int c = 0; c < n_clients; ++c) {
      cum += p[c];
      std::size_t end = (c + 1 == n_clients)
                            ? order.size()
                            : static_cast<std::size_t>(std::llround(cum * n));
      end = std::min(end, order.size());
      for (std::size_t i = start; i < end; ++i) assignments[order[i]] = c;
      start = std::max(start, end);
    }
  }
}

bool sizes_ok(const std::vector<int>& assignments, int n_clients, int min_size) {
  std::vector<long> sizes(n_clients, 0);
  for (int a : assignments) {
    if (a < 0) return false;
    sizes[a] += 1;
  }
  for (long s : sizes) {
    if (s < min_size) return false;
  }
  return true;
}

PartitionPlan dirichlet_over_groups(const std::vector<std::vector<int>>& groups,
                                    std::size_t n_samples, int n_clients, double alpha,
                                    uint64_t seed, const PartitionOptions& opt,
                                    PartitionStrategy strategy) {
  if (alpha <= 0.0) throw std::invalid_argument("dirichlet partition: alpha must be positive");
  if (n_clients < 1) throw std::invalid_argument("dirichlet partition: n_clients must be >= 1");
  if (n_samples == 0) throw std::invalid_argument("dirichlet partition: no samples");

  PartitionPlan plan;
  plan.n_clients = n_clients;
  plan.strategy = strategy;
  plan.alpha = alpha;
  plan.seed = seed;
  plan.provenance = "group order ascending";

  if (n_clients == 1) {
    plan.assignments.assign(n_samples, 0);
    return plan;
  }

  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    Rng rng(seed_chain(seed, {stream::kPartition, static_cast<uint64_t>(attempt)}));
    plan.assignments.assign(n_samples, -1);
    allocate_groups(groups, n_clients, alpha, rng, plan.assignments);
    if (sizes_ok(plan.assignments, n_clients, opt.min_client_size)) return plan;
  }
  throw NumericError("dirichlet partition: retry budget exhausted (dataset too small for requested skew)");
}

}  // namespace

std::string to_string(PartitionStrategy s) {
  switch (s) {
    case PartitionStrategy::Natural: return "natural";
    case PartitionStrategy::Iid: return "iid";
    case PartitionStrategy::Dirichlet: return "dirichlet";
    case PartitionStrategy::MultilabelDirichlet: return "multilabel_dirichlet";
    case PartitionStrategy::MetadataDirichlet: return "metadata_dirichlet";
  }
  return "unknown";
}

PartitionStrategy partition_strategy_from_string(const std::string& s) {
  if (s == "natural") return PartitionStrategy::Natural;
  if (s == "iid") return PartitionStrategy::Iid;
  if (s == "dirichlet") return PartitionStrategy::Dirichlet;
  if (s == "multilabel_dirichlet") return PartitionStrategy::MultilabelDirichlet;
  if (s == "metadata_dirichlet") return PartitionStrategy::MetadataDirichlet;
  throw ConfigError("unknown partition strategy: " + s);
}

std::vector<std::vector<int>> PartitionPlan::client_indices() const {
  std::vector<std::vector<int>> out(n_clients);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    out[assignments[i]].push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<long> PartitionPlan::client_sizes() const {
  std::vector<long> sizes(n_clients, 0);
  for (int a : assignments) sizes[a] += 1;
  return sizes;
}

PartitionPlan dirichlet_partition(const std::vector<int>& labels, int n_clients,
                                  double alpha, uint64_t seed,
                                  const PartitionOptions& opt) {
  return dirichlet_over_groups(group_by_label(labels), labels.size(), n_clients, alpha,
                               seed, opt, PartitionStrategy::Dirichlet);
}

PartitionPlan multilabel_dirichlet_partition(const std::vector<std::vector<int>>& label_matrix,
                                             int n_clients, double alpha, uint64_t seed,
                                             const PartitionOptions& opt) {
  if (label_matrix.empty()) throw std::invalid_argument("multilabel partition: no samples");
  const std::size_t n_labels = label_matrix[0].size();

  // Reserved no-positive group first so that any real label overrides it,
  // then label dimensions in ascending index order.
  std::vector<std::vector<int>> groups(1);
  groups.reserve(n_labels + 1);
  for (std::size_t l = 0; l < n_labels; ++l) groups.emplace_back();
  for (std::size_t i = 0; i < label_matrix.size(); ++i) {
    const auto& row = label_matrix[i];
    if (row.size() != n_labels) {
      throw std::invalid_argument("multilabel partition: ragged label matrix");
    }
    bool any = false;
    for (std::size_t l = 0; l < n_labels; ++l) {
      if (row[l] != 0) {
        groups[l + 1].push_back(static_cast<int>(i));
        any = true;
      }
    }
    if (!any) groups[0].push_back(static_cast<int>(i));
  }

  PartitionPlan plan = dirichlet_over_groups(groups, label_matrix.size(), n_clients, alpha,
                                             seed, opt, PartitionStrategy::MultilabelDirichlet);
  plan.provenance = "classes ascending, no-finding group first, last class wins";
  return plan;
}

PartitionPlan iid_partition(const std::vector<int>& labels, int n_clients, uint64_t seed) {
  if (n_clients < 1) throw std::invalid_argument("iid_partition: n_clients must be >= 1");
  if (labels.empty()) throw std::invalid_argument("iid_partition: no samples");
  PartitionPlan plan;
  plan.n_clients = n_clients;
  plan.strategy = PartitionStrategy::Iid;
  plan.seed = seed;
  plan.assignments.assign(labels.size(), 0);
  if (n_clients == 1) return plan;

  Rng rng(seed_chain(seed, {stream::kPartition}));
  for (auto& group : group_by_label(labels)) {
    rng.shuffle(group);
    for (std::size_t j = 0; j < group.size(); ++j) {
      plan.assignments[group[j]] = static_cast<int>(j % n_clients);
    }
  }
  return plan;
}

PartitionPlan metadata_dirichlet_partition(const std::vector<int>& metadata, int n_clients,
                                           double alpha, uint64_t seed,
                                           const PartitionOptions& opt) {
  PartitionPlan plan = dirichlet_over_groups(group_by_label(metadata), metadata.size(),
                                             n_clients, alpha, seed, opt,
                                             PartitionStrategy::MetadataDirichlet);
  plan.provenance = "per-category symmetric Dirichlet, concentration alpha per client";
  return plan;
}

PartitionPlan natural_partition(const std::vector<int>& metadata, int n_clients) {
  if (n_clients < 1) throw std::invalid_argument("natural_partition: n_clients must be >= 1");
  std::map<int, int> rank;
  for (int c : metadata) rank.emplace(c, 0);
  int r = 0;
  for (auto& [key, value] : rank) value = r++;
  if (r < n_clients) {
    throw ConfigError("natural_partition: fewer metadata categories than clients");
  }
  PartitionPlan plan;
  plan.n_clients = n_clients;
  plan.strategy = PartitionStrategy::Natural;
  plan.assignments.resize(metadata.size());
  for (std::size_t i = 0; i < metadata.size(); ++i) {
    plan.assignments[i] = rank[metadata[i]] % n_clients;
  }
  return plan;
}

PseudoClassLabels pseudo_classes_from_vectors(const std::vector<Vec>& features, int k,
                                              uint64_t seed, PseudoClassSource source) {
  if (k < 2) throw std::invalid_argument("pseudo_classes_from_vectors: k must be >= 2");
  const int n = static_cast<int>(features.size());
  if (n == 0) throw std::invalid_argument("pseudo_classes_from_vectors: no features");
  const std::size_t dim = features[0].size();
  for (const auto& f : features) {
    if (f.size() != dim) throw std::invalid_argument("pseudo_classes_from_vectors: ragged features");
  }

  {
    std::vector<Vec> sorted = features;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (static_cast<int>(sorted.size()) < k) {
      throw std::invalid_argument("pseudo_classes_from_vectors: fewer distinct vectors than k");
    }
  }

  auto dist2 = [&](const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return s;
  };

  Rng rng(seed_chain(seed, {stream::kPseudoClass}));

  // k-means++ seeding
  std::vector<Vec> centers;
  centers.reserve(k);
  centers.push_back(features[rng.uniform_int(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, dist2(features[i], c));
      d2[i] = best;
      total += best;
    }
    const double r = rng.uniform() * total;
    double cum = 0.0;
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      cum += d2[i];
      if (cum > r) {
        pick = i;
        break;
      }
    }
    if (pick < 0) {  // numeric edge; take the farthest point
      pick = static_cast<int>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    }
    centers.push_back(features[pick]);
  }

  std::vector<int> labels(n, 0);
  const int max_iters = 100;
  const double tol = 1e-6;
  for (int iter = 0; iter < max_iters; ++iter) {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int c = 0; c < k; ++c) {
        const double d = dist2(features[i], centers[c]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      labels[i] = arg;
    }
    // Empty clusters grab the point farthest from its current center.
    std::vector<long> counts(k, 0);
    for (int l : labels) counts[l] += 1;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;
        const double d = dist2(features[i], centers[labels[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      counts[labels[far]] -= 1;
      labels[far] = c;
      counts[c] = 1;
    }

    double movement = 0.0;
    std::vector<Vec> next(k, Vec(dim, 0.0));
    counts.assign(k, 0);
    for (int i = 0; i < n; ++i) {
      axpy(1.0, features[i], next[labels[i]]);
      counts[labels[i]] += 1;
    }
    for (int c = 0; c < k; ++c) {
      scale_inplace(next[c], 1.0 / static_cast<double>(counts[c]));
      movement = std::max(movement, std::sqrt(dist2(next[c], centers[c])));
    }
    centers = std::move(next);
    if (movement < tol) break;
  }

  // Final assignment against the converged centers.
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (int c = 0; c < k; ++c) {
      const double d = dist2(features[i], centers[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    labels[i] = arg;
  }
  std::vector<long> counts(k, 0);
  for (int l : labels) counts[l] += 1;
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    int far = -1;
    double far_d = -1.0;
    for (int i = 0; i < n; ++i) {
      if (counts[labels[i]] <= 1) continue;
      const double d = dist2(features[i], centers[labels[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    counts[labels[far]] -= 1;
    labels[far] = c;
    counts[c] = 1;
  }

  PseudoClassLabels out;
  out.labels = std::move(labels);
  out.k = k;
  out.source = source;
  return out;
}

HeterogeneityReport heterogeneity_stats(const PartitionPlan& plan,
                                        const std::vector<int>& labels) {
  if (labels.size() != plan.assignments.size()) {
    throw std::invalid_argument("heterogeneity_stats: plan and labels index sets differ");
  }
  HeterogeneityReport rep;
  std::map<int, int> class_col;
  for (int l : labels) class_col.emplace(l, 0);
  int col = 0;
  for (auto& [key, value] : class_col) {
    value = col++;
    rep.class_ids.push_back(key);
  }
  const int K = col;
  rep.class_histograms.assign(plan.n_clients, std::vector<long>(K, 0));
  rep.client_sizes.assign(plan.n_clients, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = plan.assignments[i];
    rep.class_histograms[c][class_col[labels[i]]] += 1;
    rep.client_sizes[c] += 1;
  }

  double tv_sum = 0.0;
  long pairs = 0;
  for (int a = 0; a < plan.n_clients; ++a) {
    for (int b = a + 1; b < plan.n_clients; ++b) {
      double tv = 0.0;
      for (int cls = 0; cls < K; ++cls) {
        const double pa = rep.client_sizes[a] > 0
                              ? static_cast<double>(rep.class_histograms[a][cls]) / rep.client_sizes[a]
                              : 0.0;
        const double pb = rep.client_sizes[b] > 0
                              ? static_cast<double>(rep.class_histograms[b][cls]) / rep.client_sizes[b]
                              : 0.0;
        tv += std::abs(pa - pb);
      }
      tv_sum += 0.5 * tv;
      pairs += 1;
    }
  }
  rep.mean_pairwise_tv = pairs > 0 ? tv_sum / static_cast<double>(pairs) : 0.0;
  return rep;
}

std::string serialize_plan(const PartitionPlan& plan) {
  std::ostringstream out;
  out << "# strategy=" << to_string(plan.strategy)
      << " alpha=" << (plan.alpha ? format_double(*plan.alpha) : "none")
      << " seed=" << plan.seed << " clients=" << plan.n_clients << "\n";
  for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
    out << i << "," << plan.assignments[i] << "\n";
  }
  return out.str();
}

PartitionPlan parse_plan(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || header.rfind("# strategy=", 0) != 0) {
    throw ConfigError("parse_plan: missing header");
  }
  PartitionPlan plan;
  std::istringstream hs(header.substr(2));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("parse_plan: bad header token: " + tok);
    const std::string key = tok.substr(0, eq);
    const std::string value = tok.substr(eq + 1);
    if (key == "strategy") {
      plan.strategy = partition_strategy_from_string(value);
    } else if (key == "alpha") {
      if (value != "none") plan.alpha = std::stod(value);
    } else if (key == "seed") {
      plan.seed = std::stoull(value);
    } else if (key == "clients") {
      plan.n_clients = std::stoi(value);
    } else {
      throw ConfigError("parse_plan: unknown header key: " + key);
    }
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("parse_plan: bad row: " + line);
    const std::size_t idx = std::stoul(line.substr(0, comma));
    const int client = std::stoi(line.substr(comma + 1));
    if (idx != plan.assignments.size()) throw ConfigError("parse_plan: rows out of order");
    plan.assignments.push_back(client);
  }
  return plan;
}

}  // namespace flsim
