#pragma once

#include <map>
#include <optional>
#include <string>

#include "flsim/fl.hpp"
#include "flsim/partition.hpp"
#include "flsim/synth.hpp"

namespace flsim {

// "centralized" trains one model on pooled client data under the matched
// schedule (rounds x local_epochs epochs); it shares the single-client
// FedAvg code path.
enum class RunAlgorithm { FedAvg, FedProx, Scaffold, FedNova, MMoon, CreamMfl, Centralized };

std::string to_string(RunAlgorithm a);
RunAlgorithm run_algorithm_from_string(const std::string& s);

struct ModelConfig {
  std::vector<int> encoder_hidden = {16};
  int projection_dim = 8;
  std::vector<int> head_hidden = {16};
  Activation activation = Activation::Relu;
};

struct PartitionConfig {
  PartitionStrategy strategy = PartitionStrategy::Iid;
  double alpha = 0.8;
  int min_client_size = 10;
  int max_retries = 100;
  int pseudo_k = 10;  // clusters when partitioning unlabeled (retrieval) data
};

struct ExperimentConfig {
  RunAlgorithm algorithm = RunAlgorithm::FedAvg;
  int n_clients = 3;
  int rounds = 30;
  FlConfig fl;
  PartitionConfig partition;
  SyntheticConfig dataset;
  ModelConfig model;
  double val_frac = 0.1;
  double test_frac = 0.1;
  int public_samples = 200;
  std::vector<uint64_t> seeds = {1, 2, 3};
  std::string out_dir;

  // Set when a config file or CLI flag pins the local optimizer; unpinned
  // values resolve against the final algorithm in apply_overrides (FedNova
  // defaults to sgd_momentum, everything else to Adam).
  bool optimizer_kind_pinned = false;
  bool learning_rate_pinned = false;

  void validate() const;  // throws ConfigError
};

// Strict JSON config: unknown keys are rejected. Missing keys keep defaults.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

struct CliOverrides {
  std::optional<std::string> algorithm;
  std::optional<double> alpha;
  std::optional<int> clients;
  std::optional<int> rounds;
  std::optional<std::string> seed_list;  // comma-separated
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<std::string> partition_strategy;
  std::optional<std::string> task;
  std::optional<int> local_epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
};

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& o);

struct RoundReport {
  int round = 0;  // 1-based
  std::map<std::string, double> val_metrics;
  std::map<std::string, double> test_metrics;  // final round only
  std::vector<ClientLog> client_logs;
  double wall_ms = 0.0;
  bool final_round = false;
};

struct SeedRunResult {
  uint64_t seed = 0;
  std::vector<RoundReport> rounds;
  std::map<std::string, double> final_test;
  double majority_accuracy = 0.0;  // multiclass; NaN otherwise
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SeedRunResult> per_seed;
  // final-test metric -> (mean, sample std over seeds)
  std::map<std::string, std::pair<double, double>> summary;
};

// Builds encoders/head for the configured dataset.
MultimodalModelSpec build_model_spec(const ExperimentConfig& cfg);

// Task-appropriate metrics plus "loss" on the given index set.
std::map<std::string, double> evaluate_model(const MultimodalModelSpec& spec,
                                             const ParamVector& params,
                                             const std::vector<MultimodalSample>& samples,
                                             const std::vector<int>& idx,
                                             double alignment_tau);

// Runs every seed sequentially; writes metrics.csv, provenance.json and
// summary.json under cfg.out_dir when it is non-empty.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Forces algorithm = centralized.
ExperimentResult run_centralized(ExperimentConfig cfg);

// Metric names whose CSV values are scaled by 100.
bool is_percent_metric(const std::string& name);

// Resolves the output directory against the FLSIM_OUT_ROOT environment
// variable when the configured path is relative.
std::string resolve_out_dir(const std::string& out_dir);

}  // namespace flsim
