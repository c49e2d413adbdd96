#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "flsim/vec.hpp"

namespace flsim {

enum class PartitionStrategy { Natural, Iid, Dirichlet, MultilabelDirichlet, MetadataDirichlet };

std::string to_string(PartitionStrategy s);
PartitionStrategy partition_strategy_from_string(const std::string& s);

// Deterministic sample-index -> client-id mapping with provenance. Plans are
// disjoint and exhaustive over [0, assignments.size()).
struct PartitionPlan {
  std::vector<int> assignments;
  int n_clients = 0;
  PartitionStrategy strategy = PartitionStrategy::Iid;
  std::optional<double> alpha;
  uint64_t seed = 0;
  std::string provenance;  // e.g. multi-label class processing order

  std::vector<std::vector<int>> client_indices() const;
  std::vector<long> client_sizes() const;
};

struct PartitionOptions {
  int min_client_size = 10;
  int max_retries = 100;
};

// Per class k: draw p_k ~ Dirichlet(alpha, ..., alpha) over clients, shuffle
// the class's sample indices, split by cumulative proportions. The whole
// draw is resampled when any client ends below min_client_size; throws
// NumericError once the retry budget is exhausted.
PartitionPlan dirichlet_partition(const std::vector<int>& labels, int n_clients,
                                  double alpha, uint64_t seed,
                                  const PartitionOptions& opt = {});

// Label dimensions are processed independently in ascending index order; a
// sample positive for several classes keeps the allocation of the last
// (highest-indexed) class containing it. Samples with no positive label are
// grouped under a reserved pseudo-label processed first.
PartitionPlan multilabel_dirichlet_partition(const std::vector<std::vector<int>>& label_matrix,
                                             int n_clients, double alpha, uint64_t seed,
                                             const PartitionOptions& opt = {});

// Stratified round-robin within each class after a seeded shuffle.
PartitionPlan iid_partition(const std::vector<int>& labels, int n_clients, uint64_t seed);

// Symmetric Dirichlet split per metadata category (total concentration
// alpha * n_clients, i.e. alpha per client).
PartitionPlan metadata_dirichlet_partition(const std::vector<int>& metadata, int n_clients,
                                           double alpha, uint64_t seed,
                                           const PartitionOptions& opt = {});

// Category c -> client (rank of c among distinct categories) mod n_clients.
PartitionPlan natural_partition(const std::vector<int>& metadata, int n_clients);

enum class PseudoClassSource { ProportionVectors, Embeddings };

struct PseudoClassLabels {
  std::vector<int> labels;
  int k = 0;
  PseudoClassSource source = PseudoClassSource::Embeddings;
};

// k-means with seeded k-means++ initialization, iteration cap 100 and
// tolerance 1e-6 on center movement. Every cluster is non-empty.
PseudoClassLabels pseudo_classes_from_vectors(const std::vector<Vec>& features, int k,
                                              uint64_t seed,
                                              PseudoClassSource source = PseudoClassSource::Embeddings);

struct HeterogeneityReport {
  std::vector<int> class_ids;                      // ascending distinct labels
  std::vector<std::vector<long>> class_histograms; // [client][class]
  std::vector<long> client_sizes;
  double mean_pairwise_tv = 0.0;                   // in [0, 1]
};

HeterogeneityReport heterogeneity_stats(const PartitionPlan& plan,
                                        const std::vector<int>& labels);

// Line-oriented text format:
//   # strategy=<s> alpha=<a> seed=<n> clients=<c>
//   sample_index,client_id
// Byte-stable across runs with the same inputs.
std::string serialize_plan(const PartitionPlan& plan);
PartitionPlan parse_plan(const std::string& text);

}  // namespace flsim
