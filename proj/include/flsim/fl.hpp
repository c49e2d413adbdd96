#pragma once

#include <cstdint>
#include <string>

#include "flsim/contrastive.hpp"
#include "flsim/model.hpp"
#include "flsim/optimizer.hpp"

namespace flsim {

enum class Algorithm { FedAvg, FedProx, Scaffold, FedNova, MMoon, CreamMfl };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct FlConfig {
  int local_epochs = 3;
  int batch_size = 32;
  OptimizerConfig local_opt;  // Adam everywhere; FedNova uses sgd_momentum
  double mu_fedprox = 0.1;
  double mu_moon = 0.1;
  double tau_moon = 0.5;
  double gamma_creamfl = 0.002;
  double alpha_creamfl = 0.03;
  double scaffold_grad_scale = 1.0;
  int distill_epochs = 3;
  // Weight of the supervised public-set loss during server distillation.
  // Representation regression alone cannot train the fusion head, so the
  // labeled public set also drives the task loss; set to 0 for
  // representation-only distillation.
  double distill_task_weight = 1.0;
  InterDenominator inter_denominator = InterDenominator::AsPrinted;
  double alignment_tau = 0.07;
  int threads = 1;
};

struct ClientState {
  int id = 0;
  std::vector<int> indices;  // sample indices into the shared dataset
  ParamVector prev_local;    // previous-round local params (m-MOON, CreamMFL)
  Vec control;               // SCAFFOLD c_i
};

struct ServerState {
  ParamVector global;  // w_t
  int round = 0;       // rounds completed
  Vec control;         // SCAFFOLD c
};

struct ClientUpdate {
  int client_id = -1;
  ParamVector params;     // full w_k; deltas are derived server-side
  long n_samples = 0;
  long n_steps = 0;       // tau_i
  Vec control_delta;      // SCAFFOLD only
  double a_norm = 0.0;    // FedNova ||a_i||_1; 0 means absent
  RepBank public_reps;    // CreamMFL only
};

struct ClientLog {
  int client_id = -1;
  long steps = 0;
  double mean_loss = 0.0;
  long zero_rep_events = 0;
};

struct RoundLogs {
  std::vector<ClientLog> clients;
  std::vector<double> distill_losses;  // CreamMFL, one entry per distill epoch
};

// ---- local training ----------------------------------------------------

ClientUpdate local_train_fedavg(const MultimodalModelSpec& spec,
                                const std::vector<MultimodalSample>& data,
                                const ClientState& client, const ParamVector& w_t,
                                const FlConfig& cfg, uint64_t stream_seed,
                                ClientLog* log = nullptr);

ClientUpdate local_train_fedprox(const MultimodalModelSpec& spec,
                                 const std::vector<MultimodalSample>& data,
                                 const ClientState& client, const ParamVector& w_t,
                                 double mu, const FlConfig& cfg, uint64_t stream_seed,
                                 ClientLog* log = nullptr);

// Option II control-variate update: after K steps at learning rate eta,
// c_i+ = c_i - c + (w_t - w_k) / (K eta); the update carries delta c_i.
ClientUpdate local_train_scaffold(const MultimodalModelSpec& spec,
                                  const std::vector<MultimodalSample>& data,
                                  const ClientState& client, const ParamVector& w_t,
                                  const Vec& server_control, double grad_scale,
                                  const FlConfig& cfg, uint64_t stream_seed,
                                  ClientLog* log = nullptr);

ClientUpdate local_train_mmoon(const MultimodalModelSpec& spec,
                               const std::vector<MultimodalSample>& data,
                               const ClientState& client, const ParamVector& w_t,
                               double mu, double tau, const FlConfig& cfg,
                               uint64_t stream_seed, ClientLog* log = nullptr);

// FedNova's SGD-with-momentum coefficient sum for tau local steps.
double fednova_a_norm(long tau, double momentum);

// ---- aggregation -------------------------------------------------------

// w_{t+1} = sum_k (n_k / sum n) w_k, summed in ascending client-id order.
ParamVector fedavg_aggregate(const std::vector<ClientUpdate>& updates,
                             const ParamVector& w_t);

// Normalized averaging: d_i = (w_t - w_k) / (eta a_i),
// tau_eff = sum p_k a_k, w_{t+1} = w_t - eta tau_eff sum p_k d_k.
ParamVector fednova_aggregate(const std::vector<ClientUpdate>& updates,
                              const ParamVector& w_t, double eta, double momentum);

// ---- CreamMFL round pieces ----------------------------------------------

RepBank compute_rep_bank(const MultimodalModelSpec& spec, const ParamVector& params,
                         const std::vector<MultimodalSample>& samples);

// Per sample and modality: alpha * previous-global rep + (1 - alpha) *
// softmax-weighted ensemble of client reps (weights by cosine similarity to
// the previous-global rep, temperature 1).
RepBank cream_targets(const std::vector<RepBank>& client_banks, const RepBank& globals,
                      double alpha_agg);

// Minibatch regression of the server model's public-set representations onto
// the targets (squared L2, mean over samples and modalities), optionally plus
// distill_task_weight * task loss on the labeled public set. Returns the mean
// objective per distillation epoch.
std::vector<double> cream_distill(const MultimodalModelSpec& spec, ParamVector& params,
                                  const std::vector<MultimodalSample>& public_set,
                                  const RepBank& targets, const FlConfig& cfg,
                                  uint64_t stream_seed);

// ---- round driver --------------------------------------------------------

// Full-participation synchronous round: every client trains once, updates
// aggregate in ascending client-id order, and per-algorithm state
// (control variates, previous-round local params) advances. public_set is
// required for CreamMFL and ignored otherwise.
RoundLogs run_round(Algorithm alg, const MultimodalModelSpec& spec,
                    const std::vector<MultimodalSample>& data,
                    std::vector<ClientState>& clients, ServerState& server,
                    const FlConfig& cfg, uint64_t master_seed,
                    const std::vector<MultimodalSample>* public_set = nullptr);

}  // namespace flsim
