#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "flsim/errors.hpp"
#include "flsim/experiment.hpp"
#include "flsim/mlp.hpp"
#include "flsim/report.hpp"
#include "flsim/rng.hpp"

#include <CLI11.hpp>

namespace {

using namespace flsim;

int cmd_generate(const std::string& config_path, const std::string& out,
                 std::optional<uint64_t> seed) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_experiment_config(config_path);
  SyntheticConfig dc = cfg.dataset;
  if (seed) dc.seed = *seed;
  DatasetBundle bundle = generate(dc);
  split(bundle, cfg.val_frac, cfg.test_frac, dc.seed);
  save_bundle(bundle, resolve_out_dir(out));
  std::cout << "wrote dataset bundle (" << bundle.samples.size() << " samples, "
            << bundle.train_idx.size() << " train / " << bundle.val_idx.size() << " val / "
            << bundle.test_idx.size() << " test) to " << resolve_out_dir(out) << "\n";
  return 0;
}

int cmd_partition(const std::string& data_dir, const std::string& strategy, double alpha,
                  int clients, uint64_t seed, int min_client_size, int pseudo_k,
                  const std::string& out) {
  DatasetBundle bundle = load_bundle(data_dir);
  const auto& train = bundle.train_idx;
  PartitionOptions opt;
  opt.min_client_size = min_client_size;

  const PartitionStrategy strat = partition_strategy_from_string(strategy);
  std::vector<int> labels;
  std::vector<std::vector<int>> matrix;
  std::vector<int> metadata;
  metadata.reserve(train.size());
  for (int i : train) metadata.push_back(bundle.metadata[i]);
  if (bundle.config.task == TaskKind::Multiclass) {
    for (int i : train) labels.push_back(bundle.samples[i].class_label);
  } else if (bundle.config.task == TaskKind::Multilabel) {
    for (int i : train) matrix.push_back(bundle.samples[i].label_bits);
    for (int i : train) {
      const auto& row = bundle.samples[i].label_bits;
      int anchor = static_cast<int>(row.size());
      for (std::size_t l = 0; l < row.size(); ++l) {
        if (row[l]) {
          anchor = static_cast<int>(l);
          break;
        }
      }
      labels.push_back(anchor);
    }
  } else {
    std::vector<Vec> features;
    for (int i : train) {
      Vec f;
      for (const auto& x : bundle.samples[i].modality_inputs) f.insert(f.end(), x.begin(), x.end());
      features.push_back(std::move(f));
    }
    labels = pseudo_classes_from_vectors(features, pseudo_k, seed).labels;
  }

  PartitionPlan plan;
  switch (strat) {
    case PartitionStrategy::Natural:
      plan = natural_partition(metadata, clients);
      break;
    case PartitionStrategy::Iid:
      plan = iid_partition(labels, clients, seed);
      break;
    case PartitionStrategy::Dirichlet:
      plan = dirichlet_partition(labels, clients, alpha, seed, opt);
      break;
    case PartitionStrategy::MultilabelDirichlet:
      if (matrix.empty()) throw ConfigError("multilabel_dirichlet needs a multilabel dataset");
      plan = multilabel_dirichlet_partition(matrix, clients, alpha, seed, opt);
      break;
    case PartitionStrategy::MetadataDirichlet:
      plan = metadata_dirichlet_partition(metadata, clients, alpha, seed, opt);
      break;
  }

  std::ofstream(out) << serialize_plan(plan);
  HeterogeneityReport het = heterogeneity_stats(plan, labels);
  std::cout << "wrote plan for " << plan.assignments.size() << " samples to " << out
            << " (mean pairwise TV " << het.mean_pairwise_tv << ")\n";
  return 0;
}

int cmd_run(ExperimentConfig cfg, bool centralized) {
  if (centralized) cfg.algorithm = RunAlgorithm::Centralized;
  ExperimentResult result = run_experiment(cfg);
  std::cout << "algorithm=" << to_string(result.config.algorithm)
            << " seeds=" << result.per_seed.size() << "\n";
  for (const auto& [metric, stats] : result.summary) {
    const double scale = is_percent_metric(metric) ? 100.0 : 1.0;
    std::printf("  final test %-16s %8.3f +- %.3f\n", metric.c_str(), stats.first * scale,
                stats.second * scale);
  }
  if (!cfg.out_dir.empty()) {
    std::cout << "outputs in " << resolve_out_dir(cfg.out_dir) << "\n";
  }
  return 0;
}

// Quick oracle checks; a fast subset of the full test suites.
int cmd_selftest() {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::printf("%-48s %s\n", name.c_str(), ok ? "ok" : "FAIL");
    if (!ok) failures += 1;
  };

  {  // analytic vs central-difference gradients on a small model
    MultimodalModelSpec spec;
    spec.projection_dim = 4;
    for (int m = 0; m < 2; ++m) {
      spec.encoders.push_back({{5, 6, 4}, Activation::Tanh});
    }
    spec.head = MLPSpec{{8, 6, 3}, Activation::Tanh};
    spec.task = TaskKind::Multiclass;
    ParamVector params = init_model_params(spec, 11);
    Rng rng(17);
    std::vector<MultimodalSample> data(4);
    for (auto& s : data) {
      s.modality_inputs = {Vec(5), Vec(5)};
      for (auto& x : s.modality_inputs[0]) x = rng.normal();
      for (auto& x : s.modality_inputs[1]) x = rng.normal();
      s.class_label = rng.uniform_int(3);
    }
    std::vector<int> batch = {0, 1, 2, 3};
    LossResult res = task_loss(spec, params, data, batch);
    ParamVector fd = finite_diff_grad(
        [&](const ParamVector& p) { return task_loss(spec, p, data, batch).loss; }, params, 1e-5);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      num += (fd[i] - res.grad[i]) * (fd[i] - res.grad[i]);
      den += fd[i] * fd[i];
    }
    check("task_loss gradient vs finite differences", std::sqrt(num / std::max(den, 1e-300)) < 1e-5);
  }
  {  // m-MOON closed form at z_glob == z_prev
    RepresentationTriple t;
    Rng rng(5);
    for (int m = 0; m < 3; ++m) {
      Vec z(4), g(4);
      for (auto& x : z) x = rng.normal();
      for (auto& x : g) x = rng.normal();
      t.z_loc.push_back(normalized(z));
      t.z_glob.push_back(normalized(g));
      t.z_prev.push_back(t.z_glob.back());
    }
    const double loss = mmoon_loss(t, 0.5).loss;
    check("mmoon_loss equals M ln 2 when glob == prev", std::abs(loss - 3 * std::log(2.0)) < 1e-12);
  }
  {  // SCAFFOLD full-participation identity over a couple of rounds
    ExperimentConfig cfg;
    cfg.algorithm = RunAlgorithm::Scaffold;
    cfg.n_clients = 3;
    cfg.rounds = 2;
    cfg.dataset.n_samples = 240;
    cfg.dataset.modality_dims = {6, 5, 4};
    cfg.seeds = {1};
    CliOverrides o;
    apply_overrides(cfg, o);
    cfg.validate();
    SyntheticConfig dc = cfg.dataset;
    dc.seed = seed_chain(1, {stream::kData});
    DatasetBundle bundle = generate(dc);
    split(bundle, 0.1, 0.1, 1);
    MultimodalModelSpec spec = build_model_spec(cfg);
    ServerState server;
    server.global = init_model_params(spec, 1);
    server.control.assign(server.global.size(), 0.0);
    std::vector<ClientState> clients(3);
    for (int c = 0; c < 3; ++c) {
      clients[c].id = c;
      clients[c].control.assign(server.global.size(), 0.0);
      clients[c].prev_local = server.global;
    }
    for (std::size_t i = 0; i < bundle.train_idx.size(); ++i) {
      clients[i % 3].indices.push_back(bundle.train_idx[i]);
    }
    bool ok = true;
    for (int round = 0; round < 2; ++round) {
      run_round(Algorithm::Scaffold, spec, bundle.samples, clients, server, cfg.fl, 1);
      for (std::size_t i = 0; i < server.control.size(); ++i) {
        double sum = 0;
        for (const auto& c : clients) sum += c.control[i];
        ok = ok && std::abs(sum - 3.0 * server.control[i]) < 1e-8;
      }
    }
    check("scaffold control-variate identity", ok);
  }
  std::printf("%s\n", failures == 0 ? "selftest passed" : "selftest FAILED");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flsim: deterministic multimodal federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, strategy = "dirichlet", out_file = "plan.txt";
  std::string report_out = "./";
  std::vector<std::string> report_dirs;
  double alpha = 0.8;
  int clients = 3;
  uint64_t seed = 1;
  int min_client_size = 10, pseudo_k = 10;
  std::optional<uint64_t> gen_seed;

  CliOverrides overrides;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON");
    cmd->add_option("--algorithm", overrides.algorithm,
                    "fedavg|fedprox|scaffold|fednova|mmoon|creammfl|centralized");
    cmd->add_option("--alpha", overrides.alpha, "Dirichlet concentration");
    cmd->add_option("--clients", overrides.clients, "number of clients");
    cmd->add_option("--rounds", overrides.rounds, "communication rounds");
    cmd->add_option("--seed-list", overrides.seed_list, "comma-separated seeds");
    cmd->add_option("--out", overrides.out_dir, "output directory");
    cmd->add_option("--threads", overrides.threads, "client training threads");
    cmd->add_option("--partition-strategy", overrides.partition_strategy,
                    "natural|iid|dirichlet|multilabel_dirichlet|metadata_dirichlet");
    cmd->add_option("--task", overrides.task, "multiclass|multilabel|retrieval");
    cmd->add_option("--local-epochs", overrides.local_epochs, "local epochs per round");
    cmd->add_option("--batch-size", overrides.batch_size, "mini-batch size");
    cmd->add_option("--lr", overrides.learning_rate, "local learning rate");
  };

  CLI::App* generate_cmd = app.add_subcommand("generate", "generate a synthetic dataset bundle");
  generate_cmd->add_option("--config", config_path, "experiment config JSON");
  generate_cmd->add_option("--out", out_dir, "bundle output directory")->required();
  generate_cmd->add_option("--seed", gen_seed, "dataset seed override");

  CLI::App* partition_cmd = app.add_subcommand("partition", "partition a saved dataset bundle");
  partition_cmd->add_option("--data", data_dir, "bundle directory")->required();
  partition_cmd->add_option("--strategy", strategy, "partition strategy");
  partition_cmd->add_option("--alpha", alpha, "Dirichlet concentration");
  partition_cmd->add_option("--clients", clients, "number of clients");
  partition_cmd->add_option("--seed", seed, "partition seed");
  partition_cmd->add_option("--min-client-size", min_client_size, "minimum shard size");
  partition_cmd->add_option("--pseudo-k", pseudo_k, "pseudo-class count for retrieval data");
  partition_cmd->add_option("--out", out_file, "plan output file");

  CLI::App* run_cmd = app.add_subcommand("run", "run a federated experiment");
  add_run_flags(run_cmd);

  CLI::App* baseline_cmd = app.add_subcommand("baseline", "run the centralized baseline");
  add_run_flags(baseline_cmd);

  CLI::App* report_cmd = app.add_subcommand("report", "summarize completed runs");
  report_cmd->add_option("--out", report_out, "output prefix (directory ending in /)");
  report_cmd->add_option("dirs", report_dirs, "experiment output directories")->required();

  CLI::App* selftest_cmd = app.add_subcommand("selftest", "run quick oracle checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate_cmd->parsed()) return cmd_generate(config_path, out_dir, gen_seed);
    if (partition_cmd->parsed()) {
      return cmd_partition(data_dir, strategy, alpha, clients, seed, min_client_size, pseudo_k,
                           out_file);
    }
    if (run_cmd->parsed() || baseline_cmd->parsed()) {
      ExperimentConfig cfg;
      if (!config_path.empty()) cfg = load_experiment_config(config_path);
      apply_overrides(cfg, overrides);
      return cmd_run(cfg, baseline_cmd->parsed());
    }
    if (report_cmd->parsed()) {
      ReportResult res = write_report(report_dirs, report_out);
      std::cout << res.table;
      return 0;
    }
    if (selftest_cmd->parsed()) return cmd_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
