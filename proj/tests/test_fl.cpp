#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "flsim/errors.hpp"
#include "flsim/fl.hpp"
#include "flsim/rng.hpp"
#include "flsim/synth.hpp"
#include "test_util.hpp"

using namespace flsim;
using namespace flsim::test;

namespace {

struct Fixture {
  MultimodalModelSpec spec;
  std::vector<MultimodalSample> data;
  std::vector<ClientState> clients;
  ServerState server;
  FlConfig cfg;

  explicit Fixture(int n_clients, int n_samples = 120, TaskKind task = TaskKind::Multiclass,
                   uint64_t seed = 1) {
    SyntheticConfig dc;
    dc.n_samples = n_samples;
    dc.n_modalities = 2;
    dc.modality_dims = {6, 5};
    dc.latent_dim = 4;
    dc.task = task;
    dc.n_classes = 3;
    dc.label_base_rates = {0.4, 0.4, 0.4};
    dc.seed = seed;
    DatasetBundle bundle = generate(dc);
    data = std::move(bundle.samples);

    spec.projection_dim = 4;
    spec.encoders.push_back({{6, 5, 4}, Activation::Tanh});
    spec.encoders.push_back({{5, 5, 4}, Activation::Tanh});
    spec.task = task;
    if (task != TaskKind::Retrieval) {
      spec.head = MLPSpec{{8, 6, 3}, Activation::Tanh};
    }

    server.global = init_model_params(spec, seed);
    clients.resize(n_clients);
    for (int c = 0; c < n_clients; ++c) {
      clients[c].id = c;
      clients[c].prev_local = server.global;
      for (int i = c; i < n_samples; i += n_clients) clients[c].indices.push_back(i);
    }
    cfg.local_epochs = 2;
    cfg.batch_size = 16;
    cfg.local_opt.learning_rate = 1e-3;
  }

  void init_scaffold() {
    server.control.assign(server.global.size(), 0.0);
    for (auto& c : clients) c.control.assign(server.global.size(), 0.0);
  }
};

double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("a zero-gradient landscape produces a zero delta") {
  // Zero params and zero inputs pin every logit at 0, where sigmoid is
  // exactly 1/2; with label columns half-positive over a full batch whose
  // size is a power of two, every bias gradient cancels in exact dyadic
  // arithmetic. All gradients are bitwise zero, so the loss surface is flat
  // along the whole trajectory.
  MultimodalModelSpec spec;
  spec.projection_dim = 3;
  spec.encoders.push_back({{4, 3}, Activation::Relu});
  spec.encoders.push_back({{4, 3}, Activation::Relu});
  spec.head = MLPSpec{{6, 2}, Activation::Relu};
  spec.task = TaskKind::Multilabel;

  std::vector<MultimodalSample> data(8);
  ClientState client;
  client.id = 0;
  for (int i = 0; i < 8; ++i) {
    data[i].modality_inputs = {Vec(4, 0.0), Vec(4, 0.0)};
    data[i].label_bits = i % 2 == 0 ? std::vector<int>{1, 0} : std::vector<int>{0, 1};
    client.indices.push_back(i);
  }

  FlConfig cfg;
  cfg.local_epochs = 3;
  cfg.batch_size = 8;  // full batch keeps the labels balanced per step
  const ParamVector w_t(spec.param_count(), 0.0);
  const ClientUpdate up = local_train_fedavg(spec, data, client, w_t, cfg, 7);
  CHECK(max_abs_diff(up.params, w_t) == 0.0);
  CHECK(up.n_samples == 8);
  CHECK(up.n_steps == 3);
}

TEST_CASE("single-client fedavg reproduces an independent centralized loop") {
  Fixture f(1, 60);
  const uint64_t master = 5;

  // library side: 3 rounds of 1 local epoch each
  FlConfig cfg = f.cfg;
  cfg.local_epochs = 1;
  ServerState server = f.server;
  std::vector<ClientState> clients = f.clients;
  std::vector<ParamVector> lib_trajectory;
  for (int round = 0; round < 3; ++round) {
    run_round(Algorithm::FedAvg, f.spec, f.data, clients, server, cfg, master);
    lib_trajectory.push_back(server.global);
  }

  // oracle: plain centralized loop with the same stream discipline and a
  // fresh optimizer per epoch block
  ParamVector w = f.server.global;
  for (int round = 1; round <= 3; ++round) {
    Rng rng(seed_chain(master, {stream::kClient, 0, static_cast<uint64_t>(round)}));
    std::vector<int> order = f.clients[0].indices;
    rng.shuffle(order);
    OptimizerState opt = OptimizerState::create(cfg.local_opt, w.size());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + end);
      const LossResult res = task_loss(f.spec, w, f.data, batch);
      optimizer_step(opt, w, res.grad);
    }
    CHECK(max_abs_diff(lib_trajectory[round - 1], w) < 1e-10);
  }
}

TEST_CASE("loss is non-increasing on a convex quadratic surrogate") {
  // one linear layer + identity activations + multilabel BCE on a single
  // repeated sample is convex in the parameters; small-step SGD must not
  // increase the loss across an epoch sequence
  MultimodalModelSpec spec;
  spec.projection_dim = 2;
  spec.encoders.push_back({{2, 2}, Activation::Identity});
  spec.encoders.push_back({{2, 2}, Activation::Identity});
  spec.head = MLPSpec{{4, 2}, Activation::Identity};
  spec.task = TaskKind::Multilabel;

  std::vector<MultimodalSample> data(1);
  data[0].modality_inputs = {Vec{1.0, 0.5}, Vec{-0.5, 1.0}};
  data[0].label_bits = {1, 0};

  ClientState client;
  client.id = 0;
  client.indices = {0};

  FlConfig cfg;
  cfg.local_epochs = 40;
  cfg.batch_size = 1;
  cfg.local_opt.kind = OptimizerKind::SgdMomentum;
  cfg.local_opt.momentum = 0.0;
  cfg.local_opt.learning_rate = 0.05;

  ParamVector w = init_model_params(spec, 3);
  double prev = task_loss(spec, w, data, client.indices).loss;
  Rng rng(1);
  OptimizerState opt = OptimizerState::create(cfg.local_opt, w.size());
  for (int step = 0; step < 40; ++step) {
    const LossResult res = task_loss(spec, w, data, client.indices);
    optimizer_step(opt, w, res.grad);
    const double now = task_loss(spec, w, data, client.indices).loss;
    CHECK(now <= prev + 1e-12);
    prev = now;
  }
}

TEST_CASE("fedavg aggregation examples") {
  ParamVector w_t{0.0, 0.0};
  std::vector<ClientUpdate> updates(2);
  updates[0].client_id = 0;
  updates[0].params = {1.0, 3.0};
  updates[0].n_samples = 10;
  updates[1].client_id = 1;
  updates[1].params = {3.0, 5.0};
  updates[1].n_samples = 10;
  CHECK(fedavg_aggregate(updates, w_t) == ParamVector{2.0, 4.0});

  updates.resize(1);
  CHECK(fedavg_aggregate(updates, w_t) == updates[0].params);
}

TEST_CASE("fedavg aggregation matches a brute-force weighted mean") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ParamVector w_t = random_vec(rng, 6);
    std::vector<ClientUpdate> updates(3);
    Vec expected(6, 0.0);
    double total = 0;
    for (int k = 0; k < 3; ++k) {
      updates[k].client_id = k;
      updates[k].params = random_vec(rng, 6);
      updates[k].n_samples = 1 + rng.uniform_int(50);
      total += updates[k].n_samples;
    }
    for (int k = 0; k < 3; ++k) {
      axpy(updates[k].n_samples / total, updates[k].params, expected);
    }
    CHECK(max_abs_diff(fedavg_aggregate(updates, w_t), expected) < 1e-12);
  }
}

TEST_CASE("fedprox with mu 0 equals fedavg exactly") {
  Fixture f(2);
  const ClientUpdate a = local_train_fedavg(f.spec, f.data, f.clients[0], f.server.global, f.cfg, 9);
  const ClientUpdate b =
      local_train_fedprox(f.spec, f.data, f.clients[0], f.server.global, 0.0, f.cfg, 9);
  CHECK(max_abs_diff(a.params, b.params) == 0.0);
}

TEST_CASE("huge mu pins the local model to the global model") {
  // The proximal limit needs an optimizer whose step scales with the
  // gradient; Adam normalizes it away. Plain SGD with lr*mu = 1 contracts
  // onto w_t each step, leaving only the lr-scaled task gradient.
  Fixture f(1, 60);
  FlConfig cfg = f.cfg;
  cfg.local_epochs = 1;
  cfg.local_opt.kind = OptimizerKind::SgdMomentum;
  cfg.local_opt.momentum = 0.0;
  cfg.local_opt.learning_rate = 1e-6;
  const ClientUpdate up =
      local_train_fedprox(f.spec, f.data, f.clients[0], f.server.global, 1e6, cfg, 4);
  double norm = 0;
  for (std::size_t i = 0; i < up.params.size(); ++i) {
    const double d = up.params[i] - f.server.global[i];
    norm += d * d;
  }
  CHECK(std::sqrt(norm) < 1e-3);
}

TEST_CASE("the proximal gradient term passes finite differences") {
  Fixture f(1, 20);
  Rng rng(6);
  const ParamVector w = init_model_params(f.spec, 77);
  const ParamVector w_t = init_model_params(f.spec, 78);
  const double mu = 0.37;
  const std::vector<int> batch{0, 1, 2};
  LossResult res = task_loss(f.spec, w, f.data, batch);
  for (std::size_t i = 0; i < w.size(); ++i) res.grad[i] += mu * (w[i] - w_t[i]);
  const ParamVector fd = finite_diff_grad(
      [&](const ParamVector& q) {
        double prox = 0;
        for (std::size_t i = 0; i < q.size(); ++i) prox += (q[i] - w_t[i]) * (q[i] - w_t[i]);
        return task_loss(f.spec, q, f.data, batch).loss + 0.5 * mu * prox;
      },
      w, 1e-5);
  CHECK(rel_error(res.grad, fd) < 1e-5);
}

TEST_CASE("scaffold round 1 with zero controls matches fedavg locally") {
  Fixture f(2);
  f.init_scaffold();
  const ClientUpdate a = local_train_fedavg(f.spec, f.data, f.clients[0], f.server.global, f.cfg, 11);
  const ClientUpdate b = local_train_scaffold(f.spec, f.data, f.clients[0], f.server.global,
                                              f.server.control, 1.0, f.cfg, 11);
  CHECK(max_abs_diff(a.params, b.params) < 1e-10);
  CHECK(b.control_delta.size() == a.params.size());
}

TEST_CASE("scaffold grad_scale 0 reduces to fedavg while tracking controls") {
  Fixture f(2);
  f.init_scaffold();
  // give the server control a nonzero value; scale 0 must ignore it
  std::fill(f.server.control.begin(), f.server.control.end(), 0.5);
  const ClientUpdate a = local_train_fedavg(f.spec, f.data, f.clients[0], f.server.global, f.cfg, 13);
  const ClientUpdate b = local_train_scaffold(f.spec, f.data, f.clients[0], f.server.global,
                                              f.server.control, 0.0, f.cfg, 13);
  CHECK(max_abs_diff(a.params, b.params) == 0.0);
  double norm = 0;
  for (double x : b.control_delta) norm += x * x;
  CHECK(norm > 0.0);  // c_i still moves
}

TEST_CASE("scaffold preserves the full-participation control identity") {
  Fixture f(5, 200);
  f.init_scaffold();
  FlConfig cfg = f.cfg;
  cfg.local_epochs = 1;
  for (int round = 0; round < 4; ++round) {
    run_round(Algorithm::Scaffold, f.spec, f.data, f.clients, f.server, cfg, 21);
    Vec sum(f.server.control.size(), 0.0);
    for (const auto& c : f.clients) axpy(1.0, c.control, sum);
    for (std::size_t i = 0; i < sum.size(); ++i) {
      CHECK(std::abs(sum[i] - 5.0 * f.server.control[i]) <= 1e-8);
    }
  }
}

TEST_CASE("fednova momentum coefficient sum") {
  CHECK(fednova_a_norm(1, 0.0) == doctest::Approx(1.0));
  CHECK(fednova_a_norm(7, 0.0) == doctest::Approx(7.0));
  // tau=3, rho=0.5: a = (3 - 0.5*(1-0.125)/0.5) / 0.5 = (3 - 0.875) / 0.5
  CHECK(fednova_a_norm(3, 0.5) == doctest::Approx((3.0 - 0.875) / 0.5));
  CHECK_THROWS_AS(fednova_a_norm(3, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(fednova_a_norm(0, 0.5), std::invalid_argument);
}

TEST_CASE("fednova with rho 0 and equal steps equals fedavg aggregation") {
  Rng rng(31);
  ParamVector w_t = random_vec(rng, 8);
  std::vector<ClientUpdate> updates(3);
  for (int k = 0; k < 3; ++k) {
    updates[k].client_id = k;
    updates[k].params = random_vec(rng, 8);
    updates[k].n_samples = 10 * (k + 1);
    updates[k].n_steps = 6;
    updates[k].a_norm = fednova_a_norm(6, 0.0);
  }
  const ParamVector nova = fednova_aggregate(updates, w_t, 0.05, 0.0);
  const ParamVector avg = fedavg_aggregate(updates, w_t);
  CHECK(max_abs_diff(nova, avg) < 1e-8);
}

TEST_CASE("fednova single client returns that client's parameters") {
  Rng rng(37);
  ParamVector w_t = random_vec(rng, 5);
  std::vector<ClientUpdate> updates(1);
  updates[0].client_id = 0;
  updates[0].params = random_vec(rng, 5);
  updates[0].n_samples = 17;
  updates[0].n_steps = 9;
  updates[0].a_norm = fednova_a_norm(9, 0.9);
  CHECK(max_abs_diff(fednova_aggregate(updates, w_t, 0.01, 0.9), updates[0].params) < 1e-12);
}

TEST_CASE("fednova rejects missing a_norm and bad momentum") {
  ParamVector w_t{0.0};
  std::vector<ClientUpdate> updates(1);
  updates[0].client_id = 0;
  updates[0].params = {1.0};
  updates[0].n_samples = 1;
  CHECK_THROWS_AS(fednova_aggregate(updates, w_t, 0.1, 0.9), std::invalid_argument);
  updates[0].a_norm = 1.0;
  CHECK_THROWS_AS(fednova_aggregate(updates, w_t, 0.1, 1.5), std::invalid_argument);
}

TEST_CASE("mmoon with mu 0 equals fedavg exactly") {
  Fixture f(2);
  const ClientUpdate a = local_train_fedavg(f.spec, f.data, f.clients[0], f.server.global, f.cfg, 41);
  const ClientUpdate b =
      local_train_mmoon(f.spec, f.data, f.clients[0], f.server.global, 0.0, 0.5, f.cfg, 41);
  CHECK(max_abs_diff(a.params, b.params) == 0.0);
}

TEST_CASE("mmoon round 1 contributes a constant M ln 2 and zero extra gradient") {
  // prev_local == global makes the contrastive term flat, so the trajectory
  // matches fedavg bitwise even with mu > 0
  Fixture f(2);
  const ClientUpdate a = local_train_fedavg(f.spec, f.data, f.clients[0], f.server.global, f.cfg, 43);
  const ClientUpdate b =
      local_train_mmoon(f.spec, f.data, f.clients[0], f.server.global, 5.0, 0.5, f.cfg, 43);
  CHECK(max_abs_diff(a.params, b.params) == 0.0);
}

TEST_CASE("mmoon objective gradient passes finite differences") {
  Fixture f(1, 30);
  const double mu = 0.7, tau = 0.5;
  const ParamVector w = init_model_params(f.spec, 91);
  const ParamVector w_t = init_model_params(f.spec, 92);   // global
  const ParamVector w_prev = init_model_params(f.spec, 93);  // previous local
  const std::vector<int> batch{0, 1, 2, 3};

  auto objective = [&](const ParamVector& p) {
    double total = task_loss(f.spec, p, f.data, batch).loss;
    for (int idx : batch) {
      RepresentationTriple t;
      t.z_loc = encode(f.spec, p, f.data[idx]);
      t.z_glob = encode(f.spec, w_t, f.data[idx]);
      t.z_prev = encode(f.spec, w_prev, f.data[idx]);
      total += mu / batch.size() * mmoon_loss(t, tau).loss;
    }
    return total;
  };

  LossResult res = task_loss(f.spec, w, f.data, batch);
  for (int idx : batch) {
    EncodeCache cache;
    RepresentationTriple t;
    t.z_loc = encode(f.spec, w, f.data[idx], &cache);
    t.z_glob = encode(f.spec, w_t, f.data[idx]);
    t.z_prev = encode(f.spec, w_prev, f.data[idx]);
    RepLoss rl = mmoon_loss(t, tau);
    for (auto& g : rl.grad) scale_inplace(g, mu / batch.size());
    encode_backward(f.spec, w, cache, rl.grad, res.grad);
  }
  const ParamVector fd = finite_diff_grad(objective, w, 1e-5);
  CHECK(rel_error(res.grad, fd) < 1e-5);
}

TEST_CASE("cream targets are convex combinations") {
  Rng rng(47);
  RepBank glob;
  glob.reps = {{normalized(random_vec(rng, 4)), normalized(random_vec(rng, 4))},
               {normalized(random_vec(rng, 4)), normalized(random_vec(rng, 4))}};
  // all clients upload the same bank: the ensemble equals it regardless of weights
  RepBank shared;
  shared.reps = {{normalized(random_vec(rng, 4)), normalized(random_vec(rng, 4))},
                 {normalized(random_vec(rng, 4)), normalized(random_vec(rng, 4))}};
  const std::vector<RepBank> banks{shared, shared, shared};

  const RepBank targets = cream_targets(banks, glob, 0.25);
  for (int n = 0; n < 2; ++n) {
    for (int m = 0; m < 2; ++m) {
      for (int d = 0; d < 4; ++d) {
        const double expected = 0.25 * glob.reps[n][m][d] + 0.75 * shared.reps[n][m][d];
        CHECK(targets.reps[n][m][d] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  // alpha 1 ignores the ensemble entirely
  const RepBank only_glob = cream_targets(banks, glob, 1.0);
  for (int n = 0; n < 2; ++n) {
    for (int m = 0; m < 2; ++m) {
      CHECK(max_abs_diff(only_glob.reps[n][m], glob.reps[n][m]) < 1e-15);
    }
  }
}

TEST_CASE("distillation at the fixed point leaves parameters unchanged") {
  Fixture f(1, 30);
  FlConfig cfg = f.cfg;
  cfg.distill_task_weight = 0.0;
  cfg.distill_epochs = 2;
  std::vector<MultimodalSample> public_set(f.data.begin(), f.data.begin() + 10);
  const RepBank targets = compute_rep_bank(f.spec, f.server.global, public_set);
  ParamVector w = f.server.global;
  const auto losses = cream_distill(f.spec, w, public_set, targets, cfg, 3);
  for (double l : losses) CHECK(l == doctest::Approx(0.0));
  CHECK(max_abs_diff(w, f.server.global) == 0.0);
}

TEST_CASE("distillation loss is non-increasing on a fixed target bank") {
  // identity-activation encoders make the representation regression smooth;
  // small plain-SGD steps must descend
  MultimodalModelSpec spec;
  spec.projection_dim = 3;
  spec.encoders.push_back({{4, 3}, Activation::Identity});
  spec.encoders.push_back({{4, 3}, Activation::Identity});
  spec.task = TaskKind::Retrieval;

  Rng rng(53);
  std::vector<MultimodalSample> public_set(12);
  for (auto& s : public_set) {
    s.modality_inputs = {random_vec(rng, 4), random_vec(rng, 4)};
  }
  RepBank targets;
  targets.reps.resize(12);
  for (auto& row : targets.reps) {
    row = {normalized(random_vec(rng, 3)), normalized(random_vec(rng, 3))};
  }

  FlConfig cfg;
  cfg.batch_size = 12;  // full batch
  cfg.distill_epochs = 25;
  cfg.distill_task_weight = 0.0;
  cfg.local_opt.kind = OptimizerKind::SgdMomentum;
  cfg.local_opt.momentum = 0.0;
  cfg.local_opt.learning_rate = 0.02;

  ParamVector w = init_model_params(spec, 7);
  const auto losses = cream_distill(spec, w, public_set, targets, cfg, 9);
  for (std::size_t i = 1; i < losses.size(); ++i) {
    CHECK(losses[i] <= losses[i - 1] + 1e-12);
  }
}

TEST_CASE("cream round runs end to end and logs the virtual client") {
  Fixture f(3, 150);
  SyntheticConfig pc;
  pc.n_samples = 24;
  pc.n_modalities = 2;
  pc.modality_dims = {6, 5};
  pc.latent_dim = 4;
  pc.n_classes = 3;
  pc.seed = 99;
  std::vector<MultimodalSample> public_set = generate(pc).samples;

  FlConfig cfg = f.cfg;
  cfg.local_epochs = 1;
  RoundLogs logs =
      run_round(Algorithm::CreamMfl, f.spec, f.data, f.clients, f.server, cfg, 61, &public_set);
  CHECK(logs.clients.size() == 4);  // 3 real + virtual
  CHECK(logs.distill_losses.size() == static_cast<std::size_t>(cfg.distill_epochs));
  CHECK(all_finite(f.server.global));
  CHECK(f.server.round == 1);
}

TEST_CASE("rounds are invariant to client execution order and threading") {
  Fixture f(4, 160);
  FlConfig cfg = f.cfg;
  cfg.local_epochs = 1;

  ServerState s1 = f.server;
  std::vector<ClientState> c1 = f.clients;
  run_round(Algorithm::FedAvg, f.spec, f.data, c1, s1, cfg, 71);

  // same clients listed in a different order
  ServerState s2 = f.server;
  std::vector<ClientState> c2 = {f.clients[2], f.clients[0], f.clients[3], f.clients[1]};
  run_round(Algorithm::FedAvg, f.spec, f.data, c2, s2, cfg, 71);
  CHECK(max_abs_diff(s1.global, s2.global) == 0.0);

  // multithreaded execution
  ServerState s3 = f.server;
  std::vector<ClientState> c3 = f.clients;
  FlConfig threaded = cfg;
  threaded.threads = 4;
  run_round(Algorithm::FedAvg, f.spec, f.data, c3, s3, threaded, 71);
  CHECK(max_abs_diff(s1.global, s3.global) == 0.0);
}

TEST_CASE("run_round produces one log entry per client") {
  Fixture f(3, 90);
  RoundLogs logs = run_round(Algorithm::FedProx, f.spec, f.data, f.clients, f.server, f.cfg, 81);
  REQUIRE(logs.clients.size() == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(logs.clients[c].client_id == c);
    CHECK(logs.clients[c].steps > 0);
  }
}

TEST_CASE("global parameters stay finite over fifty rounds for all algorithms") {
  SyntheticConfig pc;
  pc.n_samples = 30;
  pc.n_modalities = 2;
  pc.modality_dims = {6, 5};
  pc.latent_dim = 4;
  pc.n_classes = 3;
  pc.seed = 123;
  const std::vector<MultimodalSample> public_set = generate(pc).samples;

  for (Algorithm alg : {Algorithm::FedAvg, Algorithm::FedProx, Algorithm::Scaffold,
                        Algorithm::FedNova, Algorithm::MMoon, Algorithm::CreamMfl}) {
    Fixture f(3, 120, TaskKind::Multiclass, 7);
    FlConfig cfg = f.cfg;
    cfg.local_epochs = 1;
    if (alg == Algorithm::FedNova) {
      cfg.local_opt.kind = OptimizerKind::SgdMomentum;
      cfg.local_opt.learning_rate = 0.02;
    }
    if (alg == Algorithm::Scaffold) f.init_scaffold();
    for (int round = 0; round < 50; ++round) {
      run_round(alg, f.spec, f.data, f.clients, f.server, cfg, 17,
                alg == Algorithm::CreamMfl ? &public_set : nullptr);
    }
    CHECK(all_finite(f.server.global));
  }
}

TEST_CASE("retrieval task trains through the same round machinery") {
  Fixture f(2, 100, TaskKind::Retrieval, 3);
  FlConfig cfg = f.cfg;
  cfg.local_epochs = 1;
  run_round(Algorithm::FedAvg, f.spec, f.data, f.clients, f.server, cfg, 5);
  CHECK(all_finite(f.server.global));
  CHECK(f.server.round == 1);
}
