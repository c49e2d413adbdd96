#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "flsim/errors.hpp"
#include "flsim/partition.hpp"
#include "flsim/rng.hpp"

using namespace flsim;

namespace {

std::vector<int> balanced_labels(int n_classes, int per_class) {
  std::vector<int> labels;
  for (int c = 0; c < n_classes; ++c) {
    labels.insert(labels.end(), per_class, c);
  }
  return labels;
}

void check_disjoint_exhaustive(const PartitionPlan& plan, std::size_t n) {
  REQUIRE(plan.assignments.size() == n);
  for (int a : plan.assignments) {
    CHECK(a >= 0);
    CHECK(a < plan.n_clients);
  }
}

// Brute-force mean pairwise total variation between client label
// distributions.
double tv_oracle(const PartitionPlan& plan, const std::vector<int>& labels) {
  std::set<int> classes(labels.begin(), labels.end());
  std::vector<std::map<int, double>> hist(plan.n_clients);
  std::vector<long> sizes(plan.n_clients, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hist[plan.assignments[i]][labels[i]] += 1;
    sizes[plan.assignments[i]] += 1;
  }
  double total = 0;
  long pairs = 0;
  for (int a = 0; a < plan.n_clients; ++a) {
    for (int b = a + 1; b < plan.n_clients; ++b) {
      double tv = 0;
      for (int c : classes) {
        const double pa = hist[a].count(c) ? hist[a][c] / double(sizes[a]) : 0.0;
        const double pb = hist[b].count(c) ? hist[b][c] / double(sizes[b]) : 0.0;
        tv += std::abs(pa - pb);
      }
      total += tv / 2;
      pairs += 1;
    }
  }
  return pairs ? total / pairs : 0.0;
}

}  // namespace

TEST_CASE("dirichlet with huge alpha approaches uniform class proportions") {
  const std::vector<int> labels = balanced_labels(10, 1000);
  const PartitionPlan plan = dirichlet_partition(labels, 5, 1e6, 1);
  check_disjoint_exhaustive(plan, labels.size());
  const HeterogeneityReport rep = heterogeneity_stats(plan, labels);
  for (int c = 0; c < 5; ++c) {
    for (int k = 0; k < 10; ++k) {
      const double prop = double(rep.class_histograms[c][k]) / double(rep.client_sizes[c]);
      CHECK(std::abs(prop - 0.1) < 0.05);
    }
  }
}

TEST_CASE("single-client dirichlet sends everything to client 0") {
  const std::vector<int> labels = balanced_labels(3, 50);
  const PartitionPlan plan = dirichlet_partition(labels, 1, 0.1, 3);
  for (int a : plan.assignments) CHECK(a == 0);
}

TEST_CASE("smaller alpha gives larger heterogeneity on average") {
  const std::vector<int> labels = balanced_labels(10, 200);
  double tv_low = 0, tv_high = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    tv_low += heterogeneity_stats(dirichlet_partition(labels, 5, 0.1, seed), labels).mean_pairwise_tv;
    tv_high += heterogeneity_stats(dirichlet_partition(labels, 5, 100, seed), labels).mean_pairwise_tv;
  }
  CHECK(tv_low / 20 > tv_high / 20);
}

TEST_CASE("dirichlet plans are deterministic and vary across seeds") {
  const std::vector<int> labels = balanced_labels(6, 100);
  const PartitionPlan a = dirichlet_partition(labels, 4, 0.5, 11);
  const PartitionPlan b = dirichlet_partition(labels, 4, 0.5, 11);
  CHECK(a.assignments == b.assignments);
  int distinct = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const PartitionPlan p = dirichlet_partition(labels, 4, 0.5, seed);
    const PartitionPlan q = dirichlet_partition(labels, 4, 0.5, seed + 1);
    distinct += p.assignments != q.assignments;
  }
  CHECK(distinct == 20);
}

TEST_CASE("dirichlet exhausts its retry budget on impossible requests") {
  const std::vector<int> labels = balanced_labels(2, 5);  // 10 samples
  PartitionOptions opt;
  opt.min_client_size = 8;  // 3 clients x 8 > 10
  opt.max_retries = 5;
  CHECK_THROWS_AS(dirichlet_partition(labels, 3, 0.5, 1, opt), NumericError);
}

TEST_CASE("multilabel reduces to dirichlet for single-label rows") {
  const int n = 600, L = 4;
  std::vector<int> labels(n);
  std::vector<std::vector<int>> matrix(n, std::vector<int>(L, 0));
  Rng rng(5);
  for (int i = 0; i < n; ++i) {
    labels[i] = rng.uniform_int(L);
    matrix[i][labels[i]] = 1;
  }
  const PartitionPlan a = dirichlet_partition(labels, 3, 0.3, 7);
  const PartitionPlan b = multilabel_dirichlet_partition(matrix, 3, 0.3, 7);
  CHECK(a.assignments == b.assignments);
}

TEST_CASE("multilabel assignment follows the last class processed") {
  // Two matrices with pairwise-equal class sizes consume the seed stream
  // identically, so class 5's allocation is the same in both. In A the
  // samples [180,200) are positive for classes {4,5}; in B they are positive
  // for class 5 only. Last-class-wins means their final clients must match.
  const int n = 260, L = 6, clients = 3;
  std::vector<std::vector<int>> a(n, std::vector<int>(L, 0));
  std::vector<std::vector<int>> b(n, std::vector<int>(L, 0));
  for (int c = 0; c < 5; ++c) {
    for (int i = c * 40; i < (c + 1) * 40; ++i) a[i][c] = 1;  // classes 0..4: [40c, 40c+40)
  }
  for (int i = 180; i < 260; ++i) a[i][5] = 1;  // class 5 overlaps class 4 on [180, 200)
  for (int c = 0; c < 4; ++c) {
    for (int i = c * 40; i < (c + 1) * 40; ++i) b[i][c] = 1;
  }
  for (int i = 160; i < 180; ++i) b[i][4] = 1;  // class 4 keeps size 40 without overlap
  for (int i = 240; i < 260; ++i) b[i][4] = 1;
  for (int i = 180; i < 260; ++i) b[i][5] = 1;

  const PartitionPlan plan_a = multilabel_dirichlet_partition(a, clients, 0.4, 21);
  const PartitionPlan plan_b = multilabel_dirichlet_partition(b, clients, 0.4, 21);
  for (int i = 180; i < 200; ++i) {
    CHECK(plan_a.assignments[i] == plan_b.assignments[i]);
  }
  CHECK(plan_a.assignments ==
        multilabel_dirichlet_partition(a, clients, 0.4, 21).assignments);
}

TEST_CASE("multilabel plans are disjoint and exhaustive on random matrices") {
  const int n = 500, L = 14;
  Rng rng(31);
  std::vector<std::vector<int>> matrix(n, std::vector<int>(L, 0));
  for (auto& row : matrix) {
    for (auto& bit : row) bit = rng.uniform() < 0.15 ? 1 : 0;
    // all-zero rows allowed: the reserved pseudo-label handles them
  }
  const PartitionPlan plan = multilabel_dirichlet_partition(matrix, 4, 0.5, 3);
  check_disjoint_exhaustive(plan, n);
  const auto sizes = plan.client_sizes();
  long total = 0;
  for (long s : sizes) total += s;
  CHECK(total == n);
}

TEST_CASE("iid partition splits evenly divisible classes exactly") {
  const std::vector<int> labels = balanced_labels(4, 100);
  const PartitionPlan plan = iid_partition(labels, 4, 5);
  check_disjoint_exhaustive(plan, labels.size());
  const HeterogeneityReport rep = heterogeneity_stats(plan, labels);
  for (int c = 0; c < 4; ++c) {
    CHECK(rep.client_sizes[c] == 100);
    for (int k = 0; k < 4; ++k) CHECK(rep.class_histograms[c][k] == 25);
  }
}

TEST_CASE("iid partition with one client is the identity") {
  const std::vector<int> labels = balanced_labels(3, 10);
  const PartitionPlan plan = iid_partition(labels, 1, 9);
  for (int a : plan.assignments) CHECK(a == 0);
}

TEST_CASE("iid class proportions deviate below 1/min_class_count") {
  std::vector<int> labels;
  for (int c = 0; c < 5; ++c) {
    labels.insert(labels.end(), 37 + 11 * c, c);  // uneven class sizes, min 37
  }
  const PartitionPlan plan = iid_partition(labels, 3, 13);
  check_disjoint_exhaustive(plan, labels.size());
  const HeterogeneityReport rep = heterogeneity_stats(plan, labels);
  std::map<int, long> class_count;
  for (int l : labels) class_count[l] += 1;
  long n = static_cast<long>(labels.size());
  double max_dev = 0;
  for (int c = 0; c < plan.n_clients; ++c) {
    for (std::size_t k = 0; k < rep.class_ids.size(); ++k) {
      const double client_prop = double(rep.class_histograms[c][k]) / double(rep.client_sizes[c]);
      const double global_prop = double(class_count[rep.class_ids[k]]) / double(n);
      max_dev = std::max(max_dev, std::abs(client_prop - global_prop));
    }
  }
  CHECK(max_dev < 1.0 / 37.0);
}

TEST_CASE("kmeans recovers well-separated clouds") {
  Rng rng(41);
  std::vector<Vec> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({rng.normal() * 0.1 + 10.0, rng.normal() * 0.1});
  for (int i = 0; i < 50; ++i) pts.push_back({rng.normal() * 0.1 - 10.0, rng.normal() * 0.1});
  const PseudoClassLabels labels = pseudo_classes_from_vectors(pts, 2, 7);
  for (int i = 1; i < 50; ++i) CHECK(labels.labels[i] == labels.labels[0]);
  for (int i = 51; i < 100; ++i) CHECK(labels.labels[i] == labels.labels[50]);
  CHECK(labels.labels[0] != labels.labels[50]);
}

TEST_CASE("kmeans with k equal to the number of distinct points isolates each") {
  std::vector<Vec> pts{{0, 0}, {5, 0}, {0, 5}, {5, 5}};
  const PseudoClassLabels labels = pseudo_classes_from_vectors(pts, 4, 3);
  std::set<int> ids(labels.labels.begin(), labels.labels.end());
  CHECK(ids.size() == 4);
}

TEST_CASE("kmeans beats random assignments on within-cluster SSE") {
  Rng rng(53);
  std::vector<Vec> pts;
  for (int i = 0; i < 120; ++i) pts.push_back({rng.normal(), rng.normal(), rng.normal()});
  const int k = 5;
  const PseudoClassLabels labels = pseudo_classes_from_vectors(pts, k, 11);

  auto sse = [&](const std::vector<int>& assign) {
    std::vector<Vec> centers(k, Vec(3, 0.0));
    std::vector<long> counts(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      axpy(1.0, pts[i], centers[assign[i]]);
      counts[assign[i]] += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c]) scale_inplace(centers[c], 1.0 / counts[c]);
    }
    double total = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int d = 0; d < 3; ++d) {
        const double diff = pts[i][d] - centers[assign[i]][d];
        total += diff * diff;
      }
    }
    return total;
  };

  const double kmeans_sse = sse(labels.labels);
  Rng rand_rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> random_assign(pts.size());
    for (auto& a : random_assign) a = rand_rng.uniform_int(k);
    CHECK(kmeans_sse <= sse(random_assign));
  }
}

TEST_CASE("kmeans rejects fewer distinct vectors than k") {
  std::vector<Vec> pts{{1, 1}, {1, 1}, {2, 2}};
  CHECK_THROWS_AS(pseudo_classes_from_vectors(pts, 3, 1), std::invalid_argument);
}

TEST_CASE("every pseudo-class is non-empty") {
  Rng rng(61);
  std::vector<Vec> pts;
  for (int i = 0; i < 200; ++i) pts.push_back({rng.normal(), rng.normal()});
  const PseudoClassLabels labels = pseudo_classes_from_vectors(pts, 12, 5);
  std::vector<long> counts(12, 0);
  for (int l : labels.labels) counts[l] += 1;
  for (long c : counts) CHECK(c > 0);
}

TEST_CASE("metadata dirichlet with one category reduces to one global split") {
  const std::vector<int> metadata(500, 3);
  const PartitionPlan plan = metadata_dirichlet_partition(metadata, 4, 0.5, 17);
  check_disjoint_exhaustive(plan, metadata.size());
  // exactly one Dirichlet draw governs the split; compare against the
  // equivalent single-class dirichlet_partition under the same seed
  const std::vector<int> one_class(500, 0);
  const PartitionPlan same = dirichlet_partition(one_class, 4, 0.5, 17);
  CHECK(plan.assignments == same.assignments);
}

TEST_CASE("metadata dirichlet approaches per-category uniformity as alpha grows") {
  Rng rng(71);
  std::vector<int> metadata(4000);
  for (auto& g : metadata) g = rng.uniform_int(5);
  const PartitionPlan plan = metadata_dirichlet_partition(metadata, 4, 1e6, 3);
  const HeterogeneityReport rep = heterogeneity_stats(plan, metadata);
  CHECK(rep.mean_pairwise_tv < 0.05);
}

TEST_CASE("metadata dirichlet heterogeneity is monotone in 1/alpha") {
  Rng rng(73);
  std::vector<int> metadata(2000);
  for (auto& g : metadata) g = rng.uniform_int(6);
  double tv02 = 0, tv08 = 0, tv100 = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    tv02 += heterogeneity_stats(metadata_dirichlet_partition(metadata, 4, 0.2, seed), metadata)
                .mean_pairwise_tv;
    tv08 += heterogeneity_stats(metadata_dirichlet_partition(metadata, 4, 0.8, seed), metadata)
                .mean_pairwise_tv;
    tv100 += heterogeneity_stats(metadata_dirichlet_partition(metadata, 4, 100, seed), metadata)
                 .mean_pairwise_tv;
  }
  CHECK(tv02 > tv08);
  CHECK(tv08 > tv100);
}

TEST_CASE("natural partition maps categories to clients") {
  const std::vector<int> metadata{7, 3, 7, 9, 3, 9, 7};
  const PartitionPlan plan = natural_partition(metadata, 3);
  // categories {3,7,9} rank to {0,1,2}
  CHECK(plan.assignments == std::vector<int>{1, 0, 1, 2, 0, 2, 1});
  CHECK_THROWS_AS(natural_partition(metadata, 4), ConfigError);
}

TEST_CASE("heterogeneity stats edge cases and oracle agreement") {
  {  // identical distributions -> TV 0
    std::vector<int> labels = balanced_labels(2, 4);  // 0 0 0 0 1 1 1 1
    PartitionPlan plan;
    plan.n_clients = 2;
    plan.strategy = PartitionStrategy::Iid;
    plan.assignments = {0, 0, 1, 1, 0, 0, 1, 1};
    CHECK(heterogeneity_stats(plan, labels).mean_pairwise_tv == doctest::Approx(0.0));
  }
  {  // disjoint classes -> TV 1
    std::vector<int> labels{0, 0, 1, 1};
    PartitionPlan plan;
    plan.n_clients = 2;
    plan.assignments = {0, 0, 1, 1};
    CHECK(heterogeneity_stats(plan, labels).mean_pairwise_tv == doctest::Approx(1.0));
  }
  {  // random plan matches the brute-force oracle
    Rng rng(81);
    std::vector<int> labels(300);
    for (auto& l : labels) l = rng.uniform_int(7);
    const PartitionPlan plan = dirichlet_partition(labels, 5, 0.4, 2, {.min_client_size = 1});
    CHECK(heterogeneity_stats(plan, labels).mean_pairwise_tv ==
          doctest::Approx(tv_oracle(plan, labels)).epsilon(1e-12));
  }
}

TEST_CASE("plan serialization is byte-stable and round-trips") {
  const std::vector<int> labels = balanced_labels(4, 30);
  const PartitionPlan plan = dirichlet_partition(labels, 3, 0.2, 99);
  const std::string text = serialize_plan(plan);
  CHECK(text == serialize_plan(dirichlet_partition(labels, 3, 0.2, 99)));
  CHECK(text.rfind("# strategy=dirichlet alpha=0.2 seed=99 clients=3\n", 0) == 0);

  const PartitionPlan parsed = parse_plan(text);
  CHECK(parsed.assignments == plan.assignments);
  CHECK(parsed.n_clients == plan.n_clients);
  CHECK(parsed.strategy == plan.strategy);
  CHECK(*parsed.alpha == doctest::Approx(0.2));
  CHECK(parsed.seed == 99);
}
