#include "flsim/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flsim {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double cosine(const Vec& u, const Vec& v) {
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot(u, v) / (nu * nv);
}

// d cos(u, v) / du; zero when either vector is zero.
Vec cosine_grad_u(const Vec& u, const Vec& v) {
  Vec g(u.size(), 0.0);
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) return g;
  const double c = dot(u, v) / (nu * nv);
  for (std::size_t i = 0; i < u.size(); ++i) {
    g[i] = v[i] / (nu * nv) - c * u[i] / (nu * nu);
  }
  return g;
}

void check_triple(const RepresentationTriple& t) {
  if (t.z_loc.empty() || t.z_loc.size() != t.z_glob.size() ||
      t.z_loc.size() != t.z_prev.size()) {
    throw std::invalid_argument("representation triple: modality count mismatch");
  }
  for (std::size_t m = 0; m < t.z_loc.size(); ++m) {
    if (t.z_loc[m].size() != t.z_glob[m].size() ||
        t.z_loc[m].size() != t.z_prev[m].size()) {
      throw std::invalid_argument("representation triple: dimension mismatch");
    }
  }
}

}  // namespace

RepLoss mmoon_loss(const RepresentationTriple& t, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("mmoon_loss: tau must be positive");
  check_triple(t);
  const int M = static_cast<int>(t.z_loc.size());
  RepLoss out;
  out.grad.resize(M);
  for (int m = 0; m < M; ++m) {
    const Vec& zl = t.z_loc[m];
    const double a = cosine(zl, t.z_glob[m]) / tau;
    const double b = cosine(zl, t.z_prev[m]) / tau;
    // -log(e^a / (e^a + e^b)) = softplus(b - a)
    out.loss += softplus(b - a);
    const double s = sigmoid(b - a);
    Vec ga = cosine_grad_u(zl, t.z_glob[m]);
    Vec gb = cosine_grad_u(zl, t.z_prev[m]);
    out.grad[m].assign(zl.size(), 0.0);
    axpy(s / tau, gb, out.grad[m]);
    axpy(-s / tau, ga, out.grad[m]);
  }
  return out;
}

RepLoss cream_intra_loss(const RepresentationTriple& t) {
  check_triple(t);
  const int M = static_cast<int>(t.z_loc.size());
  RepLoss out;
  out.grad.resize(M);
  for (int m = 0; m < M; ++m) {
    const Vec& z = t.z_loc[m];
    const double a = dot(z, t.z_glob[m]);
    const double b = dot(z, t.z_prev[m]);
    out.loss += softplus(b - a);
    const double s = sigmoid(b - a);
    out.grad[m].assign(z.size(), 0.0);
    axpy(s, t.z_prev[m], out.grad[m]);
    axpy(-s, t.z_glob[m], out.grad[m]);
  }
  return out;
}

RepLoss cream_inter_loss(int r, const std::vector<Vec>& z_r, const RepBank& globals,
                         InterDenominator mode) {
  const int P = globals.n_samples();
  const int M = globals.n_modalities();
  if (P < 2) throw std::invalid_argument("cream_inter_loss: needs |P| >= 2");
  if (r < 0 || r >= P) throw std::invalid_argument("cream_inter_loss: r out of range");
  if (static_cast<int>(z_r.size()) != M) {
    throw std::invalid_argument("cream_inter_loss: modality count mismatch");
  }

  RepLoss out;
  out.grad.resize(M);
  for (int m = 0; m < M; ++m) out.grad[m].assign(z_r[m].size(), 0.0);

  std::vector<double> scores(P);
  for (int m1 = 0; m1 < M; ++m1) {
    const Vec& z = z_r[m1];
    for (int m2 = 0; m2 < M; ++m2) {
      if (m1 == m2) continue;
      for (int n = 0; n < P; ++n) scores[n] = dot(z, globals.reps[n][m2]);

      double mx = -std::numeric_limits<double>::infinity();
      for (int n = 0; n < P; ++n) {
        if (mode == InterDenominator::AsPrinted && n == r) continue;
        mx = std::max(mx, scores[n]);
      }
      double sum = 0.0;
      for (int n = 0; n < P; ++n) {
        if (mode == InterDenominator::AsPrinted && n == r) continue;
        sum += std::exp(scores[n] - mx);
      }
      const double lse = mx + std::log(sum);
      out.loss += lse - scores[r];

      // d/dz: -g_r + sum_n p_n g_n over the denominator index set
      axpy(-1.0, globals.reps[r][m2], out.grad[m1]);
      for (int n = 0; n < P; ++n) {
        if (mode == InterDenominator::AsPrinted && n == r) continue;
        const double p = std::exp(scores[n] - lse);
        axpy(p, globals.reps[n][m2], out.grad[m1]);
      }
    }
  }
  return out;
}

}  // namespace flsim
