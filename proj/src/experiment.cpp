#include "flsim/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "flsim/errors.hpp"
#include "flsim/metrics.hpp"
#include "flsim/rng.hpp"

#include <json.hpp>

namespace flsim {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Strict object reader: every key must be consumed.
class JsonReader {
 public:
  JsonReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) {
    if (j_.contains(key)) {
      seen_.insert(key);
      return true;
    }
    return false;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(context_ + "." + key + ": " + e.what());
    }
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError(context_ + ": unknown key \"" + key + "\"");
      }
    }
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

TaskKind task_from_string(const std::string& s) {
  if (s == "multiclass") return TaskKind::Multiclass;
  if (s == "multilabel") return TaskKind::Multilabel;
  if (s == "retrieval") return TaskKind::Retrieval;
  throw ConfigError("unknown task: " + s);
}

std::string task_to_string(TaskKind t) {
  switch (t) {
    case TaskKind::Multiclass: return "multiclass";
    case TaskKind::Multilabel: return "multilabel";
    case TaskKind::Retrieval: return "retrieval";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + s);
}

std::string activation_to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

struct ParseMeta {
  bool kind_set = false;
  bool lr_set = false;
};

void parse_optimizer(const json& j, OptimizerConfig& opt, ParseMeta& meta) {
  JsonReader r(j, "optimizer");
  if (r.has("kind")) {
    const std::string kind = r.raw("kind").get<std::string>();
    if (kind == "adam") opt.kind = OptimizerKind::Adam;
    else if (kind == "sgd_momentum") opt.kind = OptimizerKind::SgdMomentum;
    else throw ConfigError("optimizer.kind must be adam or sgd_momentum");
    meta.kind_set = true;
  }
  if (r.has("learning_rate")) {
    opt.learning_rate = r.raw("learning_rate").get<double>();
    meta.lr_set = true;
  }
  r.get("beta1", opt.beta1);
  r.get("beta2", opt.beta2);
  r.get("eps", opt.eps);
  r.get("momentum", opt.momentum);
  r.finish();
}

void parse_partition(const json& j, PartitionConfig& p) {
  JsonReader r(j, "partition");
  if (r.has("strategy")) {
    p.strategy = partition_strategy_from_string(r.raw("strategy").get<std::string>());
  }
  r.get("alpha", p.alpha);
  r.get("min_client_size", p.min_client_size);
  r.get("max_retries", p.max_retries);
  r.get("pseudo_k", p.pseudo_k);
  r.finish();
}

void parse_dataset(const json& j, SyntheticConfig& d) {
  JsonReader r(j, "dataset");
  r.get("n_samples", d.n_samples);
  r.get("n_modalities", d.n_modalities);
  r.get("modality_dims", d.modality_dims);
  r.get("latent_dim", d.latent_dim);
  if (r.has("task")) d.task = task_from_string(r.raw("task").get<std::string>());
  r.get("n_classes", d.n_classes);
  r.get("label_base_rates", d.label_base_rates);
  r.get("sigma_within", d.sigma_within);
  r.get("sigma_obs", d.sigma_obs);
  r.get("metadata_categories", d.metadata_categories);
  r.get("metadata_correlation", d.metadata_correlation);
  r.get("shared_mixing", d.shared_mixing);
  r.get("seed", d.seed);
  r.finish();
}

void parse_model(const json& j, ModelConfig& m) {
  JsonReader r(j, "model");
  r.get("encoder_hidden", m.encoder_hidden);
  r.get("projection_dim", m.projection_dim);
  r.get("head_hidden", m.head_hidden);
  if (r.has("activation")) {
    m.activation = activation_from_string(r.raw("activation").get<std::string>());
  }
  r.finish();
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["algorithm"] = to_string(c.algorithm);
  j["n_clients"] = c.n_clients;
  j["rounds"] = c.rounds;
  j["local_epochs"] = c.fl.local_epochs;
  j["batch_size"] = c.fl.batch_size;
  j["optimizer"] = {
      {"kind", c.fl.local_opt.kind == OptimizerKind::Adam ? "adam" : "sgd_momentum"},
      {"learning_rate", c.fl.local_opt.learning_rate},
      {"beta1", c.fl.local_opt.beta1},
      {"beta2", c.fl.local_opt.beta2},
      {"eps", c.fl.local_opt.eps},
      {"momentum", c.fl.local_opt.momentum},
  };
  j["mu_fedprox"] = c.fl.mu_fedprox;
  j["mu_moon"] = c.fl.mu_moon;
  j["tau_moon"] = c.fl.tau_moon;
  j["gamma_creamfl"] = c.fl.gamma_creamfl;
  j["alpha_creamfl"] = c.fl.alpha_creamfl;
  j["scaffold_grad_scale"] = c.fl.scaffold_grad_scale;
  j["distill_epochs"] = c.fl.distill_epochs;
  j["distill_task_weight"] = c.fl.distill_task_weight;
  j["inter_denominator"] =
      c.fl.inter_denominator == InterDenominator::AsPrinted ? "as_printed" : "include_positive";
  j["alignment_tau"] = c.fl.alignment_tau;
  j["threads"] = c.fl.threads;
  j["partition"] = {
      {"strategy", to_string(c.partition.strategy)},
      {"alpha", c.partition.alpha},
      {"min_client_size", c.partition.min_client_size},
      {"max_retries", c.partition.max_retries},
      {"pseudo_k", c.partition.pseudo_k},
  };
  j["dataset"] = {
      {"n_samples", c.dataset.n_samples},
      {"n_modalities", c.dataset.n_modalities},
      {"modality_dims", c.dataset.modality_dims},
      {"latent_dim", c.dataset.latent_dim},
      {"task", task_to_string(c.dataset.task)},
      {"n_classes", c.dataset.n_classes},
      {"label_base_rates", c.dataset.label_base_rates},
      {"sigma_within", c.dataset.sigma_within},
      {"sigma_obs", c.dataset.sigma_obs},
      {"metadata_categories", c.dataset.metadata_categories},
      {"metadata_correlation", c.dataset.metadata_correlation},
      {"shared_mixing", c.dataset.shared_mixing},
      {"seed", c.dataset.seed},
  };
  j["model"] = {
      {"encoder_hidden", c.model.encoder_hidden},
      {"projection_dim", c.model.projection_dim},
      {"head_hidden", c.model.head_hidden},
      {"activation", activation_to_string(c.model.activation)},
  };
  j["val_frac"] = c.val_frac;
  j["test_frac"] = c.test_frac;
  j["public_samples"] = c.public_samples;
  j["seeds"] = c.seeds;
  j["out_dir"] = c.out_dir;
  return j;
}

}  // namespace

std::string to_string(RunAlgorithm a) {
  if (a == RunAlgorithm::Centralized) return "centralized";
  return to_string(static_cast<Algorithm>(a));
}

RunAlgorithm run_algorithm_from_string(const std::string& s) {
  if (s == "centralized") return RunAlgorithm::Centralized;
  return static_cast<RunAlgorithm>(algorithm_from_string(s));
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (fl.local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (n_clients < 1) throw ConfigError("n_clients must be >= 1");
  if (fl.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (fl.alignment_tau <= 0) throw ConfigError("alignment_tau must be positive");
  if (fl.tau_moon <= 0) throw ConfigError("tau_moon must be positive");
  if (fl.threads < 1) throw ConfigError("threads must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  dataset.validate();
  if (val_frac <= 0 || test_frac <= 0 || val_frac + test_frac >= 1) {
    throw ConfigError("val_frac/test_frac must be in (0,1) and sum below 1");
  }
  if (algorithm == RunAlgorithm::FedNova && fl.local_opt.kind != OptimizerKind::SgdMomentum) {
    throw ConfigError("fednova requires the sgd_momentum local optimizer");
  }
  if (algorithm == RunAlgorithm::CreamMfl && public_samples < 2) {
    throw ConfigError("creammfl needs public_samples >= 2");
  }
  if (algorithm != RunAlgorithm::Centralized && n_clients > 1) {
    if (partition.strategy == PartitionStrategy::Dirichlet && dataset.task == TaskKind::Multilabel) {
      throw ConfigError("use partition strategy multilabel_dirichlet for multilabel data");
    }
    if (partition.strategy == PartitionStrategy::MultilabelDirichlet &&
        dataset.task != TaskKind::Multilabel) {
      throw ConfigError("multilabel_dirichlet requires a multilabel dataset");
    }
  }
  if (dataset.task == TaskKind::Retrieval && partition.pseudo_k < 2) {
    throw ConfigError("partition.pseudo_k must be >= 2 for retrieval data");
  }
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c;
  ParseMeta meta;
  JsonReader r(j, "config");
  if (r.has("algorithm")) {
    c.algorithm = run_algorithm_from_string(r.raw("algorithm").get<std::string>());
  }
  r.get("n_clients", c.n_clients);
  r.get("rounds", c.rounds);
  r.get("local_epochs", c.fl.local_epochs);
  r.get("batch_size", c.fl.batch_size);
  if (r.has("optimizer")) parse_optimizer(r.raw("optimizer"), c.fl.local_opt, meta);
  r.get("mu_fedprox", c.fl.mu_fedprox);
  r.get("mu_moon", c.fl.mu_moon);
  r.get("tau_moon", c.fl.tau_moon);
  r.get("gamma_creamfl", c.fl.gamma_creamfl);
  r.get("alpha_creamfl", c.fl.alpha_creamfl);
  r.get("scaffold_grad_scale", c.fl.scaffold_grad_scale);
  r.get("distill_epochs", c.fl.distill_epochs);
  r.get("distill_task_weight", c.fl.distill_task_weight);
  if (r.has("inter_denominator")) {
    const std::string v = r.raw("inter_denominator").get<std::string>();
    if (v == "as_printed") c.fl.inter_denominator = InterDenominator::AsPrinted;
    else if (v == "include_positive") c.fl.inter_denominator = InterDenominator::IncludePositive;
    else throw ConfigError("inter_denominator must be as_printed or include_positive");
  }
  r.get("alignment_tau", c.fl.alignment_tau);
  r.get("threads", c.fl.threads);
  if (r.has("partition")) parse_partition(r.raw("partition"), c.partition);
  if (r.has("dataset")) parse_dataset(r.raw("dataset"), c.dataset);
  if (r.has("model")) parse_model(r.raw("model"), c.model);
  r.get("val_frac", c.val_frac);
  r.get("test_frac", c.test_frac);
  r.get("public_samples", c.public_samples);
  r.get("seeds", c.seeds);
  r.get("out_dir", c.out_dir);
  r.finish();
  c.optimizer_kind_pinned = meta.kind_set;
  c.learning_rate_pinned = meta.lr_set;
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

void apply_overrides(ExperimentConfig& cfg, const CliOverrides& o) {
  if (o.algorithm) cfg.algorithm = run_algorithm_from_string(*o.algorithm);
  if (o.alpha) cfg.partition.alpha = *o.alpha;
  if (o.clients) cfg.n_clients = *o.clients;
  if (o.rounds) cfg.rounds = *o.rounds;
  if (o.seed_list) {
    cfg.seeds.clear();
    std::istringstream ss(*o.seed_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) cfg.seeds.push_back(std::stoull(tok));
    }
    if (cfg.seeds.empty()) throw ConfigError("--seed-list produced no seeds");
  }
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.threads) cfg.fl.threads = *o.threads;
  if (o.partition_strategy) {
    cfg.partition.strategy = partition_strategy_from_string(*o.partition_strategy);
  }
  if (o.task) cfg.dataset.task = task_from_string(*o.task);
  if (o.local_epochs) cfg.fl.local_epochs = *o.local_epochs;
  if (o.batch_size) cfg.fl.batch_size = *o.batch_size;
  if (o.learning_rate) {
    cfg.fl.local_opt.learning_rate = *o.learning_rate;
    cfg.learning_rate_pinned = true;
  }

  // Resolve unpinned optimizer defaults against the final algorithm choice:
  // SGD momentum for FedNova, Adam otherwise.
  if (!cfg.optimizer_kind_pinned) {
    cfg.fl.local_opt.kind = cfg.algorithm == RunAlgorithm::FedNova ? OptimizerKind::SgdMomentum
                                                                   : OptimizerKind::Adam;
  }
  if (!cfg.learning_rate_pinned) {
    cfg.fl.local_opt.learning_rate =
        cfg.fl.local_opt.kind == OptimizerKind::Adam ? 1e-3 : 0.02;
  }
}

MultimodalModelSpec build_model_spec(const ExperimentConfig& cfg) {
  MultimodalModelSpec spec;
  spec.task = cfg.dataset.task;
  spec.projection_dim = cfg.model.projection_dim;
  for (int m = 0; m < cfg.dataset.n_modalities; ++m) {
    MLPSpec enc;
    enc.activation = cfg.model.activation;
    enc.layer_sizes.push_back(cfg.dataset.modality_dims[m]);
    for (int h : cfg.model.encoder_hidden) enc.layer_sizes.push_back(h);
    enc.layer_sizes.push_back(cfg.model.projection_dim);
    spec.encoders.push_back(std::move(enc));
  }
  if (cfg.dataset.task != TaskKind::Retrieval) {
    MLPSpec head;
    head.activation = cfg.model.activation;
    head.layer_sizes.push_back(cfg.dataset.n_modalities * cfg.model.projection_dim);
    for (int h : cfg.model.head_hidden) head.layer_sizes.push_back(h);
    head.layer_sizes.push_back(cfg.dataset.n_outputs());
    spec.head = std::move(head);
  }
  spec.validate();
  return spec;
}

std::map<std::string, double> evaluate_model(const MultimodalModelSpec& spec,
                                             const ParamVector& params,
                                             const std::vector<MultimodalSample>& samples,
                                             const std::vector<int>& idx,
                                             double alignment_tau) {
  std::map<std::string, double> out;
  if (idx.empty()) throw std::invalid_argument("evaluate_model: empty index set");
  const std::span<const int> span(idx);

  if (spec.task == TaskKind::Retrieval) {
    out["loss"] = alignment_loss(spec, params, samples, span, alignment_tau).loss;
    const int n = static_cast<int>(idx.size());
    const int M = spec.n_modalities();
    std::vector<std::vector<Vec>> z(n);
    for (int i = 0; i < n; ++i) z[i] = encode(spec, params, samples[idx[i]]);
    std::vector<int> pairing(n);
    for (int i = 0; i < n; ++i) pairing[i] = i;
    double acc_sum = 0.0;
    // Retrieve each modality from the sum of the remaining modalities' reps.
    for (int target = 0; target < M; ++target) {
      std::vector<Vec> candidates(n), queries(n);
      for (int i = 0; i < n; ++i) {
        candidates[i] = z[i][target];
        Vec q(spec.projection_dim, 0.0);
        for (int m = 0; m < M; ++m) {
          if (m != target) axpy(1.0, z[i][m], q);
        }
        queries[i] = std::move(q);
      }
      acc_sum += retrieval_top1(queries, candidates, pairing).value;
    }
    out["retrieval_top1"] = acc_sum / M;
    return out;
  }

  out["loss"] = task_loss(spec, params, samples, span).loss;
  if (spec.task == TaskKind::Multiclass) {
    std::vector<int> predictions(idx.size());
    std::vector<int> labels(idx.size());
    long correct = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const Vec logits = predict(spec, params, samples[idx[i]]);
      const int arg =
          static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      predictions[i] = arg;
      labels[i] = samples[idx[i]].class_label;
      correct += arg == labels[i];
    }
    out["accuracy"] = static_cast<double>(correct) / static_cast<double>(idx.size());
    out["macro_f1"] = f1_score(predictions, labels, F1Averaging::Macro).value;
  } else {
    std::vector<Vec> scores;
    std::vector<std::vector<int>> labels;
    scores.reserve(idx.size());
    labels.reserve(idx.size());
    for (int i : idx) {
      scores.push_back(predict(spec, params, samples[i]));
      labels.push_back(samples[i].label_bits);
    }
    out["macro_auc"] = macro_auc(scores, labels).value;
  }
  return out;
}

bool is_percent_metric(const std::string& name) {
  return name == "accuracy" || name == "macro_f1" || name == "macro_auc" ||
         name == "retrieval_top1";
}

std::string resolve_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) return out_dir;
  std::filesystem::path p(out_dir);
  if (p.is_absolute()) return out_dir;
  const char* root = std::getenv("FLSIM_OUT_ROOT");
  if (root && *root) return (std::filesystem::path(root) / p).string();
  return out_dir;
}

namespace {

struct PartitionInputs {
  std::vector<int> labels;                     // single-label or anchor labels
  std::vector<std::vector<int>> label_matrix;  // multilabel only
  std::vector<int> metadata;
};

PartitionInputs partition_inputs(const ExperimentConfig& cfg, const DatasetBundle& bundle,
                                 uint64_t master_seed) {
  PartitionInputs in;
  const auto& train = bundle.train_idx;
  in.metadata.reserve(train.size());
  for (int i : train) in.metadata.push_back(bundle.metadata[i]);

  if (cfg.dataset.task == TaskKind::Multiclass) {
    in.labels.reserve(train.size());
    for (int i : train) in.labels.push_back(bundle.samples[i].class_label);
  } else if (cfg.dataset.task == TaskKind::Multilabel) {
    in.label_matrix.reserve(train.size());
    in.labels.reserve(train.size());
    for (int i : train) {
      const auto& row = bundle.samples[i].label_bits;
      in.label_matrix.push_back(row);
      int anchor = static_cast<int>(row.size());
      for (std::size_t l = 0; l < row.size(); ++l) {
        if (row[l]) {
          anchor = static_cast<int>(l);
          break;
        }
      }
      in.labels.push_back(anchor);
    }
  } else if (cfg.partition.strategy == PartitionStrategy::Iid ||
             cfg.partition.strategy == PartitionStrategy::Dirichlet) {
    // Retrieval data has no labels; cluster the concatenated raw inputs into
    // pseudo-classes and skew those. Metadata-driven strategies skip this.
    std::vector<Vec> features;
    features.reserve(train.size());
    for (int i : train) {
      Vec f;
      for (const auto& x : bundle.samples[i].modality_inputs) {
        f.insert(f.end(), x.begin(), x.end());
      }
      features.push_back(std::move(f));
    }
    in.labels = pseudo_classes_from_vectors(features, cfg.partition.pseudo_k, master_seed,
                                            PseudoClassSource::Embeddings)
                    .labels;
  }
  return in;
}

std::vector<ClientState> build_clients(const ExperimentConfig& cfg, const DatasetBundle& bundle,
                                       uint64_t master_seed) {
  std::vector<ClientState> clients;
  const auto& train = bundle.train_idx;
  if (cfg.algorithm == RunAlgorithm::Centralized || cfg.n_clients == 1) {
    ClientState c;
    c.id = 0;
    c.indices = train;
    clients.push_back(std::move(c));
    return clients;
  }

  PartitionInputs in = partition_inputs(cfg, bundle, master_seed);
  PartitionOptions opt;
  opt.min_client_size = cfg.partition.min_client_size;
  opt.max_retries = cfg.partition.max_retries;

  PartitionPlan plan;
  switch (cfg.partition.strategy) {
    case PartitionStrategy::Natural:
      plan = natural_partition(in.metadata, cfg.n_clients);
      break;
    case PartitionStrategy::Iid:
      plan = iid_partition(in.labels, cfg.n_clients, master_seed);
      break;
    case PartitionStrategy::Dirichlet:
      plan = dirichlet_partition(in.labels, cfg.n_clients, cfg.partition.alpha, master_seed, opt);
      break;
    case PartitionStrategy::MultilabelDirichlet:
      plan = multilabel_dirichlet_partition(in.label_matrix, cfg.n_clients, cfg.partition.alpha,
                                            master_seed, opt);
      break;
    case PartitionStrategy::MetadataDirichlet:
      plan = metadata_dirichlet_partition(in.metadata, cfg.n_clients, cfg.partition.alpha,
                                          master_seed, opt);
      break;
  }

  clients.resize(cfg.n_clients);
  for (int c = 0; c < cfg.n_clients; ++c) clients[c].id = c;
  for (std::size_t pos = 0; pos < plan.assignments.size(); ++pos) {
    clients[plan.assignments[pos]].indices.push_back(train[pos]);
  }
  for (const auto& c : clients) {
    if (c.indices.empty()) throw NumericError("partitioning produced an empty client");
  }
  return clients;
}

double majority_accuracy(const DatasetBundle& bundle) {
  if (bundle.config.task != TaskKind::Multiclass) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::map<int, long> counts;
  for (int i : bundle.train_idx) counts[bundle.samples[i].class_label] += 1;
  int majority = 0;
  long best = -1;
  for (const auto& [cls, n] : counts) {
    if (n > best) {
      best = n;
      majority = cls;
    }
  }
  long hit = 0;
  for (int i : bundle.test_idx) hit += bundle.samples[i].class_label == majority;
  return static_cast<double>(hit) / static_cast<double>(bundle.test_idx.size());
}

SeedRunResult run_one_seed(const ExperimentConfig& cfg, uint64_t master_seed) {
  SeedRunResult result;
  result.seed = master_seed;

  SyntheticConfig dc = cfg.dataset;
  dc.seed = seed_chain(master_seed, {stream::kData});
  DatasetBundle bundle = generate(dc);
  split(bundle, cfg.val_frac, cfg.test_frac, master_seed);

  const MultimodalModelSpec spec = build_model_spec(cfg);
  std::vector<ClientState> clients = build_clients(cfg, bundle, master_seed);

  ServerState server;
  server.global = init_model_params(spec, master_seed);
  if (cfg.algorithm == RunAlgorithm::Scaffold) {
    server.control.assign(server.global.size(), 0.0);
    for (auto& c : clients) c.control.assign(server.global.size(), 0.0);
  }
  for (auto& c : clients) c.prev_local = server.global;

  std::vector<MultimodalSample> public_samples;
  if (cfg.algorithm == RunAlgorithm::CreamMfl) {
    SyntheticConfig pc = cfg.dataset;
    pc.seed = seed_chain(master_seed, {stream::kPublicData});
    pc.n_samples = cfg.public_samples;
    public_samples = generate(pc).samples;
  }

  const Algorithm alg = cfg.algorithm == RunAlgorithm::Centralized
                            ? Algorithm::FedAvg
                            : static_cast<Algorithm>(cfg.algorithm);

  result.majority_accuracy = majority_accuracy(bundle);
  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    RoundReport report;
    report.round = round;
    RoundLogs logs = run_round(alg, spec, bundle.samples, clients, server, cfg.fl, master_seed,
                               public_samples.empty() ? nullptr : &public_samples);
    report.client_logs = logs.clients;
    report.val_metrics =
        evaluate_model(spec, server.global, bundle.samples, bundle.val_idx, cfg.fl.alignment_tau);
    if (round == cfg.rounds) {
      report.final_round = true;
      report.test_metrics = evaluate_model(spec, server.global, bundle.samples, bundle.test_idx,
                                           cfg.fl.alignment_tau);
      result.final_test = report.test_metrics;
    }
    report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.rounds.push_back(std::move(report));
  }
  return result;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  // metrics.csv: deterministic bytes for a fixed (config, seeds) pair.
  std::ofstream csv(fs::path(dir) / "metrics.csv");
  csv << "seed,round,split,metric,value\n";
  for (const auto& seed_run : result.per_seed) {
    for (const auto& round : seed_run.rounds) {
      for (const auto& [metric, value] : round.val_metrics) {
        const double v = is_percent_metric(metric) ? value * 100.0 : value;
        csv << seed_run.seed << "," << round.round << ",val," << metric << ","
            << format_double(v) << "\n";
      }
      for (const auto& log : round.client_logs) {
        csv << seed_run.seed << "," << round.round << ",train,client" << log.client_id
            << "_loss," << format_double(log.mean_loss) << "\n";
      }
      for (const auto& [metric, value] : round.test_metrics) {
        const double v = is_percent_metric(metric) ? value * 100.0 : value;
        csv << seed_run.seed << "," << round.round << ",test," << metric << ","
            << format_double(v) << "\n";
      }
    }
  }
  csv.close();

  // provenance.json: resolved config plus run facts. Timings live here, not
  // in the CSV, so reruns stay byte-identical.
  json prov;
  prov["config"] = config_to_json(result.config);
  prov["n_seeds"] = result.per_seed.size();
  json timings = json::array();
  for (const auto& seed_run : result.per_seed) {
    json t;
    t["seed"] = seed_run.seed;
    json per_round = json::array();
    for (const auto& r : seed_run.rounds) per_round.push_back(r.wall_ms);
    t["round_wall_ms"] = per_round;
    timings.push_back(t);
  }
  prov["timing"] = timings;
  std::ofstream(fs::path(dir) / "provenance.json") << prov.dump(2) << "\n";

  // summary.json: per-metric mean/std of the final test evaluation.
  json summary;
  summary["algorithm"] = to_string(cfg.algorithm);
  summary["task"] = task_to_string(cfg.dataset.task);
  summary["partition"] = to_string(cfg.partition.strategy);
  summary["alpha"] = cfg.partition.alpha;
  summary["n_clients"] = cfg.n_clients;
  summary["rounds"] = cfg.rounds;
  summary["seeds"] = cfg.seeds;
  json final_test;
  for (const auto& [metric, stats] : result.summary) {
    final_test[metric] = {{"mean", stats.first}, {"std", stats.second}};
  }
  summary["final_test"] = final_test;
  {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : result.per_seed) {
      if (std::isfinite(s.majority_accuracy)) {
        sum += s.majority_accuracy;
        n += 1;
      }
    }
    if (n > 0) summary["majority_accuracy_mean"] = sum / n;
  }
  std::ofstream(fs::path(dir) / "summary.json") << summary.dump(2) << "\n";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  for (uint64_t seed : cfg.seeds) {
    result.per_seed.push_back(run_one_seed(cfg, seed));
  }

  std::map<std::string, std::vector<double>> values;
  for (const auto& s : result.per_seed) {
    for (const auto& [metric, v] : s.final_test) values[metric].push_back(v);
  }
  for (const auto& [metric, vs] : values) {
    double mean = 0.0;
    for (double v : vs) mean += v;
    mean /= static_cast<double>(vs.size());
    double var = 0.0;
    if (vs.size() > 1) {
      for (double v : vs) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vs.size() - 1);
    }
    result.summary[metric] = {mean, std::sqrt(var)};
  }

  if (!cfg.out_dir.empty()) {
    write_outputs(cfg, result, resolve_out_dir(cfg.out_dir));
  }
  return result;
}

ExperimentResult run_centralized(ExperimentConfig cfg) {
  cfg.algorithm = RunAlgorithm::Centralized;
  return run_experiment(cfg);
}

}  // namespace flsim
