#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace flsim {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(const Vec& a) { return std::sqrt(dot(a, a)); }

// y += a * x
inline void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale_inplace(Vec& v, double s) {
  for (auto& x : v) x *= s;
}

inline bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// v / |v|; a zero vector passes through unchanged (caller may record it).
inline Vec normalized(const Vec& v, bool* was_zero = nullptr) {
  double n = l2_norm(v);
  if (was_zero) *was_zero = (n == 0.0);
  if (n == 0.0) return v;
  Vec out(v);
  scale_inplace(out, 1.0 / n);
  return out;
}

// Backprop of raw -> raw/|raw| (identity at |raw| = 0).
inline Vec normalize_backward(const Vec& raw, const Vec& grad_out) {
  double n = l2_norm(raw);
  if (n == 0.0) return grad_out;
  Vec z(raw);
  scale_inplace(z, 1.0 / n);
  double g_dot_z = dot(grad_out, z);
  Vec grad(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    grad[i] = (grad_out[i] - g_dot_z * z[i]) / n;
  }
  return grad;
}

}  // namespace flsim
