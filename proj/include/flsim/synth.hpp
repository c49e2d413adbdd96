#pragma once

#include <cstdint>
#include <string>

#include "flsim/model.hpp"

namespace flsim {

// Controllable multimodal generator: class prototypes in a shared latent
// space, per-modality random linear observation maps, Gaussian noise.
struct SyntheticConfig {
  int n_samples = 3000;
  int n_modalities = 3;
  std::vector<int> modality_dims = {20, 16, 12};
  int latent_dim = 8;
  TaskKind task = TaskKind::Multiclass;
  int n_classes = 6;                     // multiclass
  std::vector<double> label_base_rates;  // multilabel; one rate per label
  double sigma_within = 0.25;            // within-class latent noise
  double sigma_obs = 0.25;               // per-modality observation noise
  int metadata_categories = 4;
  double metadata_correlation = 0.5;     // prob. metadata follows the class
  bool shared_mixing = false;            // all modalities reuse one mixing map
  uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  int n_outputs() const;  // classes or labels; 0 for retrieval
};

struct DatasetBundle {
  SyntheticConfig config;
  std::vector<MultimodalSample> samples;
  std::vector<int> metadata;  // categorical column per sample
  std::vector<Vec> latents;   // generation provenance
  std::vector<int> train_idx, val_idx, test_idx;
};

// Deterministic in config (including config.seed). Splits start empty; call
// split() to fill them.
DatasetBundle generate(const SyntheticConfig& config);

// Seeded stratified split by class (plain random split for retrieval);
// remaining indices become the train set.
void split(DatasetBundle& bundle, double val_frac, double test_frac, uint64_t seed);

// Directory layout: provenance.json plus plain-text CSV matrices
// (modality_<m>.csv, labels.csv, metadata.csv, latents.csv, splits.csv).
// Byte-stable for identical bundles.
void save_bundle(const DatasetBundle& bundle, const std::string& dir);
DatasetBundle load_bundle(const std::string& dir);

}  // namespace flsim
