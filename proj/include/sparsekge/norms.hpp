#pragma once

// Score reductions and their gradient directions. The sparse engine and the
// dense baseline both call these on their residual rows, so bitwise-identical
// residuals give bitwise-identical scores no matter how either engine
// organizes its linear algebra (reductions are the only order-sensitive step;
// elementwise work is exact per lane either way). The accumulation order is
// fixed by these functions alone, which keeps results reproducible run to run.

#include "sparsekge/common.hpp"

#include <cmath>

namespace skge {

// Four independent accumulators break the add-latency dependency chain, which
// is worth about 4x on wide rows. Rows shorter than 8 keep the plain
// left-to-right loop so small hand-checked cases sum in the obvious order.
inline Real squared_sum(const Real* v, Index n) {
  if (n < 8) {
    Real s = 0;
    for (Index j = 0; j < n; ++j) s += v[j] * v[j];
    return s;
  }
  Real s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  Index j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += v[j] * v[j];
    s1 += v[j + 1] * v[j + 1];
    s2 += v[j + 2] * v[j + 2];
    s3 += v[j + 3] * v[j + 3];
  }
  Real s = (s0 + s1) + (s2 + s3);
  for (; j < n; ++j) s += v[j] * v[j];
  return s;
}

inline Real abs_sum(const Real* v, Index n) {
  if (n < 8) {
    Real s = 0;
    for (Index j = 0; j < n; ++j) s += std::abs(v[j]);
    return s;
  }
  Real s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  Index j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += std::abs(v[j]);
    s1 += std::abs(v[j + 1]);
    s2 += std::abs(v[j + 2]);
    s3 += std::abs(v[j + 3]);
  }
  Real s = (s0 + s1) + (s2 + s3);
  for (; j < n; ++j) s += std::abs(v[j]);
  return s;
}

inline Real score_norm(const Real* v, Index n, NormKind norm) {
  if (norm == NormKind::L1) return abs_sum(v, n);
  // Exact square root: a perfect translation must score exactly zero. The
  // epsilon guard lives only in the gradient denominator below.
  return std::sqrt(squared_sum(v, n));
}

// weight * d||v||/dv. L2 guards the denominator with kNormEps; L1 takes the
// subgradient 0 at kinks.
inline void norm_direction(const Real* v, Index n, NormKind norm, Real weight, Real* out) {
  if (norm == NormKind::L1) {
    for (Index j = 0; j < n; ++j)
      out[j] = v[j] > Real(0) ? weight : (v[j] < Real(0) ? -weight : Real(0));
    return;
  }
  const Real inv = weight / std::sqrt(squared_sum(v, n) + kNormEps);
  for (Index j = 0; j < n; ++j) out[j] = v[j] * inv;
}

inline Real sum_row(const Real* v, Index n) {
  Real s = 0;
  for (Index j = 0; j < n; ++j) s += v[j];
  return s;
}

inline Real sum_real(const Complex* v, Index n) {
  Real s = 0;
  for (Index j = 0; j < n; ++j) s += v[j].real();
  return s;
}

inline Real sum_abs(const Complex* v, Index n) {
  Real s = 0;
  for (Index j = 0; j < n; ++j) s += std::abs(v[j]);
  return s;
}

// Wrap to the half-open interval [-0.5, 0.5). Round-half-even gives
// x - nearbyint(x) in [-0.5, 0.5]; the correction folds +0.5 onto -0.5.
inline Real torus_wrap(Real x) {
  Real d = x - std::nearbyint(x);
  if (d >= Real(0.5)) d -= Real(1);
  return d;
}

inline void torus_wrap_row(const Real* v, Index n, Real* delta) {
  for (Index j = 0; j < n; ++j) delta[j] = torus_wrap(v[j]);
}

// Torus distance per row: sum of delta^2 (L2 flavor, squared form) or |delta|.
inline Real torus_score_from_delta(const Real* delta, Index n, NormKind norm) {
  Real s = 0;
  if (norm == NormKind::L1) {
    for (Index j = 0; j < n; ++j) s += std::abs(delta[j]);
    return s;
  }
  for (Index j = 0; j < n; ++j) s += delta[j] * delta[j];
  return s;
}

// weight * d(torus score)/d(delta), treating the wrap offset as locally
// constant: 2*delta for the squared form, sign(delta) for L1.
inline void torus_direction(const Real* delta, Index n, NormKind norm, Real weight, Real* out) {
  if (norm == NormKind::L1) {
    for (Index j = 0; j < n; ++j)
      out[j] = delta[j] > Real(0) ? weight : (delta[j] < Real(0) ? -weight : Real(0));
    return;
  }
  for (Index j = 0; j < n; ++j) out[j] = weight * Real(2) * delta[j];
}

// weight * pair-gradient of sum_j |q_j| with the epsilon-guarded modulus.
inline void modulus_direction(const Complex* q, Index n, Real weight, Complex* out) {
  for (Index j = 0; j < n; ++j) {
    const Real m2 = q[j].real() * q[j].real() + q[j].imag() * q[j].imag();
    const Real inv = weight / std::sqrt(m2 + kNormEps);
    out[j] = Complex(q[j].real() * inv, q[j].imag() * inv);
  }
}

}  // namespace skge
