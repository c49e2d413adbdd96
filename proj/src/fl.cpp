#include "flsim/fl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "flsim/errors.hpp"
#include "flsim/rng.hpp"

namespace flsim {

namespace {

struct LoopStats {
  long steps = 0;
  double loss_sum = 0.0;
  long zero_reps = 0;
};

std::vector<std::vector<int>> make_epoch_batches(const std::vector<int>& indices,
                                                 int batch_size, Rng& rng,
                                                 bool merge_lone_last) {
  std::vector<int> order = indices;
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  // A lone trailing sample cannot form a contrastive batch; fold it back.
  if (merge_lone_last && batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

// Shared mini-batch loop: fresh optimizer per round, per-epoch reshuffles
// from the client stream, full pass over the local data each epoch.
template <typename StepFn>
LoopStats local_loop(ParamVector& w, const std::vector<int>& indices, const FlConfig& cfg,
                     Rng& rng, bool merge_lone_last, StepFn&& step_fn) {
  if (indices.empty()) throw std::invalid_argument("local training: empty client dataset");
  if (cfg.local_epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("local training: epochs and batch size must be >= 1");
  }
  OptimizerState opt = OptimizerState::create(cfg.local_opt, w.size());
  LoopStats stats;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (const auto& batch : make_epoch_batches(indices, cfg.batch_size, rng, merge_lone_last)) {
      LossResult res = step_fn(w, std::span<const int>(batch));
      if (!std::isfinite(res.loss)) throw NumericError("local training: non-finite loss");
      optimizer_step(opt, w, res.grad);
      stats.steps += 1;
      stats.loss_sum += res.loss;
      stats.zero_reps += res.zero_reps;
    }
  }
  return stats;
}

ClientUpdate finish_update(const ClientState& client, ParamVector w, const LoopStats& stats,
                           ClientLog* log) {
  ClientUpdate up;
  up.client_id = client.id;
  up.params = std::move(w);
  up.n_samples = static_cast<long>(client.indices.size());
  up.n_steps = stats.steps;
  if (!all_finite(up.params)) throw NumericError("local training: non-finite parameters");
  if (log) {
    log->client_id = client.id;
    log->steps = stats.steps;
    log->mean_loss = stats.steps > 0 ? stats.loss_sum / static_cast<double>(stats.steps) : 0.0;
    log->zero_rep_events = stats.zero_reps;
  }
  return up;
}

// Frozen per-sample representations under fixed parameters, keyed by sample
// index.
std::unordered_map<int, std::vector<Vec>> frozen_reps(const MultimodalModelSpec& spec,
                                                      const ParamVector& params,
                                                      const std::vector<MultimodalSample>& data,
                                                      const std::vector<int>& indices) {
  std::unordered_map<int, std::vector<Vec>> reps;
  reps.reserve(indices.size());
  for (int i : indices) reps.emplace(i, encode(spec, params, data[i]));
  return reps;
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::FedAvg: return "fedavg";
    case Algorithm::FedProx: return "fedprox";
    case Algorithm::Scaffold: return "scaffold";
    case Algorithm::FedNova: return "fednova";
    case Algorithm::MMoon: return "mmoon";
    case Algorithm::CreamMfl: return "creammfl";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "fedavg") return Algorithm::FedAvg;
  if (s == "fedprox") return Algorithm::FedProx;
  if (s == "scaffold") return Algorithm::Scaffold;
  if (s == "fednova") return Algorithm::FedNova;
  if (s == "mmoon") return Algorithm::MMoon;
  if (s == "creammfl") return Algorithm::CreamMfl;
  throw ConfigError("unknown algorithm: " + s);
}

ClientUpdate local_train_fedavg(const MultimodalModelSpec& spec,
                                const std::vector<MultimodalSample>& data,
                                const ClientState& client, const ParamVector& w_t,
                                const FlConfig& cfg, uint64_t stream_seed, ClientLog* log) {
  Rng rng(stream_seed);
  ParamVector w = w_t;
  LoopStats stats = local_loop(w, client.indices, cfg, rng, spec.task == TaskKind::Retrieval,
                               [&](const ParamVector& p, std::span<const int> batch) {
                                 return batch_loss(spec, p, data, batch, cfg.alignment_tau);
                               });
  return finish_update(client, std::move(w), stats, log);
}

ClientUpdate local_train_fedprox(const MultimodalModelSpec& spec,
                                 const std::vector<MultimodalSample>& data,
                                 const ClientState& client, const ParamVector& w_t,
                                 double mu, const FlConfig& cfg, uint64_t stream_seed,
                                 ClientLog* log) {
  if (mu < 0.0) throw std::invalid_argument("fedprox: mu must be >= 0");
  if (mu == 0.0) return local_train_fedavg(spec, data, client, w_t, cfg, stream_seed, log);
  Rng rng(stream_seed);
  ParamVector w = w_t;
  LoopStats stats = local_loop(
      w, client.indices, cfg, rng, spec.task == TaskKind::Retrieval,
      [&](const ParamVector& p, std::span<const int> batch) {
        LossResult res = batch_loss(spec, p, data, batch, cfg.alignment_tau);
        double prox = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double d = p[i] - w_t[i];
          res.grad[i] += mu * d;
          prox += d * d;
        }
        res.loss += 0.5 * mu * prox;
        return res;
      });
  return finish_update(client, std::move(w), stats, log);
}

ClientUpdate local_train_scaffold(const MultimodalModelSpec& spec,
                                  const std::vector<MultimodalSample>& data,
                                  const ClientState& client, const ParamVector& w_t,
                                  const Vec& server_control, double grad_scale,
                                  const FlConfig& cfg, uint64_t stream_seed, ClientLog* log) {
  if (server_control.size() != w_t.size() || client.control.size() != w_t.size()) {
    throw std::invalid_argument("scaffold: control variate length mismatch");
  }
  const double eta = cfg.local_opt.learning_rate;
  if (eta <= 0.0) throw std::invalid_argument("scaffold: learning rate must be positive");

  // Constant correction for the whole round.
  Vec correction(w_t.size());
  for (std::size_t i = 0; i < w_t.size(); ++i) {
    correction[i] = grad_scale * (server_control[i] - client.control[i]);
  }

  Rng rng(stream_seed);
  ParamVector w = w_t;
  LoopStats stats = local_loop(w, client.indices, cfg, rng, spec.task == TaskKind::Retrieval,
                               [&](const ParamVector& p, std::span<const int> batch) {
                                 LossResult res = batch_loss(spec, p, data, batch, cfg.alignment_tau);
                                 axpy(1.0, correction, res.grad);
                                 return res;
                               });
  if (stats.steps == 0) throw NumericError("scaffold: no local steps taken");

  ClientUpdate up = finish_update(client, std::move(w), stats, log);
  up.control_delta.resize(w_t.size());
  const double inv_keta = 1.0 / (static_cast<double>(stats.steps) * eta);
  for (std::size_t i = 0; i < w_t.size(); ++i) {
    // c_i+ = c_i - c + (w_t - w_k)/(K eta); transmitted as delta c_i.
    up.control_delta[i] = -server_control[i] + (w_t[i] - up.params[i]) * inv_keta;
  }
  return up;
}

ClientUpdate local_train_mmoon(const MultimodalModelSpec& spec,
                               const std::vector<MultimodalSample>& data,
                               const ClientState& client, const ParamVector& w_t,
                               double mu, double tau, const FlConfig& cfg,
                               uint64_t stream_seed, ClientLog* log) {
  if (tau <= 0.0) throw std::invalid_argument("mmoon: tau must be positive");
  if (mu == 0.0) return local_train_fedavg(spec, data, client, w_t, cfg, stream_seed, log);
  if (client.prev_local.size() != w_t.size()) {
    throw std::invalid_argument("mmoon: previous-round local params missing");
  }

  const auto glob_reps = frozen_reps(spec, w_t, data, client.indices);
  const auto prev_reps = frozen_reps(spec, client.prev_local, data, client.indices);

  Rng rng(stream_seed);
  ParamVector w = w_t;
  LoopStats stats = local_loop(
      w, client.indices, cfg, rng, spec.task == TaskKind::Retrieval,
      [&](const ParamVector& p, std::span<const int> batch) {
        LossResult res = batch_loss(spec, p, data, batch, cfg.alignment_tau);
        const double scale = mu / static_cast<double>(batch.size());
        for (int idx : batch) {
          EncodeCache cache;
          RepresentationTriple triple;
          triple.z_loc = encode(spec, p, data[idx], &cache);
          triple.z_glob = glob_reps.at(idx);
          triple.z_prev = prev_reps.at(idx);
          RepLoss rl = mmoon_loss(triple, tau);
          res.loss += scale * rl.loss;
          res.zero_reps += cache.zero_reps;
          for (auto& g : rl.grad) scale_inplace(g, scale);
          encode_backward(spec, p, cache, rl.grad, res.grad);
        }
        return res;
      });
  return finish_update(client, std::move(w), stats, log);
}

double fednova_a_norm(long tau, double momentum) {
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("fednova: momentum must be in [0, 1)");
  }
  if (tau < 1) throw std::invalid_argument("fednova: tau must be >= 1");
  if (momentum == 0.0) return static_cast<double>(tau);
  const double rho = momentum;
  const double t = static_cast<double>(tau);
  return (t - rho * (1.0 - std::pow(rho, t)) / (1.0 - rho)) / (1.0 - rho);
}

ParamVector fedavg_aggregate(const std::vector<ClientUpdate>& updates,
                             const ParamVector& w_t) {
  if (updates.empty()) throw std::invalid_argument("fedavg_aggregate: no updates");
  std::vector<const ClientUpdate*> ordered;
  ordered.reserve(updates.size());
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.params.size() != w_t.size()) {
      throw std::invalid_argument("fedavg_aggregate: parameter length mismatch");
    }
    ordered.push_back(&u);
    total += static_cast<double>(u.n_samples);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });
  ParamVector next(w_t.size(), 0.0);
  for (const ClientUpdate* u : ordered) {
    axpy(static_cast<double>(u->n_samples) / total, u->params, next);
  }
  return next;
}

ParamVector fednova_aggregate(const std::vector<ClientUpdate>& updates,
                              const ParamVector& w_t, double eta, double momentum) {
  if (updates.empty()) throw std::invalid_argument("fednova_aggregate: no updates");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("fednova_aggregate: momentum must be in [0, 1)");
  }
  if (eta <= 0.0) throw std::invalid_argument("fednova_aggregate: eta must be positive");
  std::vector<const ClientUpdate*> ordered;
  ordered.reserve(updates.size());
  double total = 0.0;
  for (const auto& u : updates) {
    if (u.params.size() != w_t.size()) {
      throw std::invalid_argument("fednova_aggregate: parameter length mismatch");
    }
    if (u.a_norm <= 0.0) throw std::invalid_argument("fednova_aggregate: missing a_norm");
    ordered.push_back(&u);
    total += static_cast<double>(u.n_samples);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  double tau_eff = 0.0;
  for (const ClientUpdate* u : ordered) {
    tau_eff += static_cast<double>(u->n_samples) / total * u->a_norm;
  }
  ParamVector next = w_t;
  Vec direction(w_t.size(), 0.0);
  for (const ClientUpdate* u : ordered) {
    const double p = static_cast<double>(u->n_samples) / total;
    const double coef = p / (eta * u->a_norm);
    for (std::size_t i = 0; i < w_t.size(); ++i) {
      direction[i] += coef * (w_t[i] - u->params[i]);
    }
  }
  for (std::size_t i = 0; i < w_t.size(); ++i) {
    next[i] -= eta * tau_eff * direction[i];
  }
  return next;
}

RepBank compute_rep_bank(const MultimodalModelSpec& spec, const ParamVector& params,
                         const std::vector<MultimodalSample>& samples) {
  RepBank bank;
  bank.reps.reserve(samples.size());
  for (const auto& s : samples) bank.reps.push_back(encode(spec, params, s));
  return bank;
}

RepBank cream_targets(const std::vector<RepBank>& client_banks, const RepBank& globals,
                      double alpha_agg) {
  if (client_banks.empty()) throw std::invalid_argument("cream_targets: no client banks");
  const int P = globals.n_samples();
  const int M = globals.n_modalities();
  for (const auto& b : client_banks) {
    if (b.n_samples() != P || b.n_modalities() != M) {
      throw std::invalid_argument("cream_targets: bank shape mismatch");
    }
  }
  auto cosine = [](const Vec& a, const Vec& b) {
    const double na = l2_norm(a), nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
  };

  RepBank targets;
  targets.reps.assign(P, std::vector<Vec>(M));
  const int K = static_cast<int>(client_banks.size());
  std::vector<double> weight(K);
  for (int n = 0; n < P; ++n) {
    for (int m = 0; m < M; ++m) {
      const Vec& g = globals.reps[n][m];
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        weight[k] = cosine(client_banks[k].reps[n][m], g);
        mx = std::max(mx, weight[k]);
      }
      double sum = 0.0;
      for (int k = 0; k < K; ++k) {
        weight[k] = std::exp(weight[k] - mx);
        sum += weight[k];
      }
      Vec ensemble(g.size(), 0.0);
      for (int k = 0; k < K; ++k) {
        axpy(weight[k] / sum, client_banks[k].reps[n][m], ensemble);
      }
      Vec target(g.size());
      for (std::size_t d = 0; d < g.size(); ++d) {
        target[d] = alpha_agg * g[d] + (1.0 - alpha_agg) * ensemble[d];
      }
      targets.reps[n][m] = std::move(target);
    }
  }
  return targets;
}

std::vector<double> cream_distill(const MultimodalModelSpec& spec, ParamVector& params,
                                  const std::vector<MultimodalSample>& public_set,
                                  const RepBank& targets, const FlConfig& cfg,
                                  uint64_t stream_seed) {
  if (public_set.empty()) throw std::invalid_argument("cream_distill: empty public set");
  if (targets.n_samples() != static_cast<int>(public_set.size())) {
    throw std::invalid_argument("cream_distill: target bank size mismatch");
  }
  const int M = spec.n_modalities();
  const bool with_task = cfg.distill_task_weight > 0.0 && spec.head.has_value();

  std::vector<int> all(public_set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

  Rng rng(stream_seed);
  OptimizerState opt = OptimizerState::create(cfg.local_opt, params.size());
  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < cfg.distill_epochs; ++epoch) {
    double loss_sum = 0.0;
    long batches = 0;
    for (const auto& batch : make_epoch_batches(all, cfg.batch_size, rng, false)) {
      ParamVector grad(params.size(), 0.0);
      double loss = 0.0;
      const double w = 1.0 / (static_cast<double>(batch.size()) * M);
      for (int idx : batch) {
        EncodeCache cache;
        std::vector<Vec> z = encode(spec, params, public_set[idx], &cache);
        std::vector<Vec> gz(M);
        for (int m = 0; m < M; ++m) {
          const Vec& t = targets.reps[idx][m];
          Vec diff(z[m].size());
          for (std::size_t d = 0; d < diff.size(); ++d) diff[d] = z[m][d] - t[d];
          loss += dot(diff, diff) * w;
          scale_inplace(diff, 2.0 * w);
          gz[m] = std::move(diff);
        }
        encode_backward(spec, params, cache, gz, grad);
      }
      if (with_task) {
        LossResult tl = task_loss(spec, params, public_set, batch);
        loss += cfg.distill_task_weight * tl.loss;
        axpy(cfg.distill_task_weight, tl.grad, grad);
      }
      if (!std::isfinite(loss)) throw NumericError("cream_distill: non-finite loss");
      optimizer_step(opt, params, grad);
      loss_sum += loss;
      batches += 1;
    }
    epoch_losses.push_back(batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0);
  }
  return epoch_losses;
}

namespace {

ClientUpdate local_train_cream(const MultimodalModelSpec& spec,
                               const std::vector<MultimodalSample>& data,
                               const ClientState& client, const ParamVector& w_t,
                               const std::vector<MultimodalSample>& public_set,
                               const RepBank& glob_bank, const FlConfig& cfg,
                               uint64_t stream_seed, uint64_t public_stream_seed,
                               ClientLog* log) {
  if (client.prev_local.size() != w_t.size()) {
    throw std::invalid_argument("creammfl: previous-round local params missing");
  }
  const double gamma = cfg.gamma_creamfl;
  if (gamma == 0.0) return local_train_fedavg(spec, data, client, w_t, cfg, stream_seed, log);

  const RepBank prev_bank = compute_rep_bank(spec, client.prev_local, public_set);
  const int P = static_cast<int>(public_set.size());
  const int pub_batch = std::min(cfg.batch_size, P);

  // Independent cycling stream over the public set.
  Rng pub_rng(public_stream_seed);
  std::vector<int> pub_order(P);
  for (int i = 0; i < P; ++i) pub_order[i] = i;
  pub_rng.shuffle(pub_order);
  std::size_t pub_pos = 0;
  auto next_public = [&]() {
    std::vector<int> chunk;
    chunk.reserve(pub_batch);
    for (int i = 0; i < pub_batch; ++i) {
      if (pub_pos == pub_order.size()) {
        pub_rng.shuffle(pub_order);
        pub_pos = 0;
      }
      chunk.push_back(pub_order[pub_pos++]);
    }
    return chunk;
  };

  Rng rng(stream_seed);
  ParamVector w = w_t;
  LoopStats stats = local_loop(
      w, client.indices, cfg, rng, spec.task == TaskKind::Retrieval,
      [&](const ParamVector& p, std::span<const int> batch) {
        LossResult res = batch_loss(spec, p, data, batch, cfg.alignment_tau);
        const std::vector<int> pub = next_public();
        const double scale = gamma / static_cast<double>(pub.size());
        for (int r : pub) {
          EncodeCache cache;
          std::vector<Vec> z = encode(spec, p, public_set[r], &cache);
          RepresentationTriple triple{z, glob_bank.reps[r], prev_bank.reps[r]};
          RepLoss intra = cream_intra_loss(triple);
          RepLoss inter = cream_inter_loss(r, z, glob_bank, cfg.inter_denominator);
          res.loss += scale * (intra.loss + inter.loss);
          res.zero_reps += cache.zero_reps;
          std::vector<Vec> gz(z.size());
          for (std::size_t m = 0; m < z.size(); ++m) {
            gz[m].assign(z[m].size(), 0.0);
            axpy(scale, intra.grad[m], gz[m]);
            axpy(scale, inter.grad[m], gz[m]);
          }
          encode_backward(spec, p, cache, gz, res.grad);
        }
        return res;
      });
  return finish_update(client, std::move(w), stats, log);
}

template <typename Fn>
void for_each_client(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_threads = std::min(threads, n);
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

RoundLogs run_round(Algorithm alg, const MultimodalModelSpec& spec,
                    const std::vector<MultimodalSample>& data,
                    std::vector<ClientState>& clients, ServerState& server,
                    const FlConfig& cfg, uint64_t master_seed,
                    const std::vector<MultimodalSample>* public_set) {
  if (clients.empty()) throw std::invalid_argument("run_round: no clients");
  const int round = server.round + 1;
  const int N = static_cast<int>(clients.size());

  RoundLogs logs;
  logs.clients.resize(N);
  std::vector<ClientUpdate> updates(N);

  RepBank glob_bank;
  if (alg == Algorithm::CreamMfl) {
    if (!public_set || public_set->empty()) {
      throw std::invalid_argument("creammfl: public set required");
    }
    glob_bank = compute_rep_bank(spec, server.global, *public_set);
  }

  auto train_one = [&](int i) {
    const ClientState& client = clients[i];
    const uint64_t cseed = seed_chain(
        master_seed, {stream::kClient, static_cast<uint64_t>(client.id), static_cast<uint64_t>(round)});
    try {
      switch (alg) {
        case Algorithm::FedAvg:
        case Algorithm::FedNova:
          updates[i] = local_train_fedavg(spec, data, client, server.global, cfg, cseed,
                                          &logs.clients[i]);
          break;
        case Algorithm::FedProx:
          updates[i] = local_train_fedprox(spec, data, client, server.global, cfg.mu_fedprox,
                                           cfg, cseed, &logs.clients[i]);
          break;
        case Algorithm::Scaffold:
          updates[i] = local_train_scaffold(spec, data, client, server.global, server.control,
                                            cfg.scaffold_grad_scale, cfg, cseed,
                                            &logs.clients[i]);
          break;
        case Algorithm::MMoon:
          updates[i] = local_train_mmoon(spec, data, client, server.global, cfg.mu_moon,
                                         cfg.tau_moon, cfg, cseed, &logs.clients[i]);
          break;
        case Algorithm::CreamMfl: {
          const uint64_t pseed = seed_chain(
              master_seed, {stream::kPublicBatch, static_cast<uint64_t>(client.id),
                            static_cast<uint64_t>(round)});
          updates[i] = local_train_cream(spec, data, client, server.global, *public_set,
                                         glob_bank, cfg, cseed, pseed, &logs.clients[i]);
          break;
        }
      }
      if (alg == Algorithm::FedNova) {
        updates[i].a_norm = fednova_a_norm(updates[i].n_steps, cfg.local_opt.momentum);
      }
    } catch (const NumericError& e) {
      throw NumericError("round " + std::to_string(round) + ", client " +
                         std::to_string(client.id) + ": " + e.what());
    }
  };
  for_each_client(N, cfg.threads, train_one);

  switch (alg) {
    case Algorithm::FedAvg:
    case Algorithm::FedProx:
    case Algorithm::MMoon:
      server.global = fedavg_aggregate(updates, server.global);
      break;
    case Algorithm::Scaffold: {
      server.global = fedavg_aggregate(updates, server.global);
      const double inv_n = 1.0 / static_cast<double>(N);
      for (int i = 0; i < N; ++i) {
        axpy(1.0, updates[i].control_delta, clients[i].control);
        axpy(inv_n, updates[i].control_delta, server.control);
      }
      break;
    }
    case Algorithm::FedNova:
      server.global = fednova_aggregate(updates, server.global, cfg.local_opt.learning_rate,
                                        cfg.local_opt.momentum);
      break;
    case Algorithm::CreamMfl: {
      // Virtual client: plain task training on the public set, then a
      // representation upload like everyone else.
      ClientState virt;
      virt.id = N;
      virt.indices.resize(public_set->size());
      for (std::size_t i = 0; i < public_set->size(); ++i) virt.indices[i] = static_cast<int>(i);
      ClientLog virt_log;
      const uint64_t vseed = seed_chain(
          master_seed, {stream::kClient, static_cast<uint64_t>(virt.id), static_cast<uint64_t>(round)});
      ClientUpdate virt_update =
          local_train_fedavg(spec, *public_set, virt, server.global, cfg, vseed, &virt_log);
      logs.clients.push_back(virt_log);

      std::vector<RepBank> banks;
      banks.reserve(updates.size() + 1);
      for (auto& u : updates) {
        u.public_reps = compute_rep_bank(spec, u.params, *public_set);
        banks.push_back(u.public_reps);
      }
      virt_update.public_reps = compute_rep_bank(spec, virt_update.params, *public_set);
      banks.push_back(virt_update.public_reps);

      RepBank targets = cream_targets(banks, glob_bank, cfg.alpha_creamfl);
      logs.distill_losses = cream_distill(
          spec, server.global, *public_set, targets, cfg,
          seed_chain(master_seed, {stream::kServer, static_cast<uint64_t>(round)}));
      break;
    }
  }
  if (!all_finite(server.global)) {
    throw NumericError("round " + std::to_string(round) + ": non-finite global parameters");
  }

  for (int i = 0; i < N; ++i) clients[i].prev_local = updates[i].params;
  server.round = round;
  return logs;
}

}  // namespace flsim
