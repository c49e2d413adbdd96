#pragma once

#include "flsim/vec.hpp"

namespace flsim {

// Per-modality representations from the current local model, the global
// model, and the previous-round local model. z_glob and z_prev are constants
// during differentiation; gradients are taken w.r.t. z_loc only.
struct RepresentationTriple {
  std::vector<Vec> z_loc;
  std::vector<Vec> z_glob;
  std::vector<Vec> z_prev;
};

struct RepLoss {
  double loss = 0.0;
  std::vector<Vec> grad;  // w.r.t. z_loc, one block per modality
};

// Modality-wise model-contrastive loss:
//   sum_m -log f(zl, zg) / (f(zl, zg) + f(zl, zp)),  f = exp(cos(.,.)/tau).
// The cosine gradient is exact, so unnormalized inputs are handled too.
RepLoss mmoon_loss(const RepresentationTriple& t, double tau);

// Intra-modal regularizer with f = exp(z1 . z2):
//   sum_m -log f(z, zg) / (f(z, zg) + f(z, zp)).
RepLoss cream_intra_loss(const RepresentationTriple& t);

// Representations for every public sample, indexed [sample][modality].
struct RepBank {
  std::vector<std::vector<Vec>> reps;

  int n_samples() const { return static_cast<int>(reps.size()); }
  int n_modalities() const { return reps.empty() ? 0 : static_cast<int>(reps[0].size()); }
};

// The printed denominator sums f(z^(r,m1), z_glob^(n,m2)) over n != r only;
// the conventional InfoNCE form would include the positive term as well.
// Both are available; AsPrinted is the default.
enum class InterDenominator { AsPrinted, IncludePositive };

// Cross-modal regularizer over ordered modality pairs m1 != m2 for public
// sample r, scored against the global representations of all public samples.
// f = exp(z1 . z2); gradient w.r.t. z_r[m1] per modality.
RepLoss cream_inter_loss(int r, const std::vector<Vec>& z_r, const RepBank& globals,
                         InterDenominator mode = InterDenominator::AsPrinted);

}  // namespace flsim
