#pragma once

#include <cstddef>

namespace mpnp::kernels {

/// Pointwise / reduction kernels for the hot per-cell loops. Two lanes are
/// built: a plain scalar reference and an AVX2 lane (x86-64 only), selected
/// once at runtime. Override with MPNP_KERNELS={auto,scalar,avx2}.
///
/// Lane equivalence contracts (enforced by tests/test_kernels.cpp):
///  - pointwise kernels agree with the scalar lane to a few ULP per element;
///  - reductions agree to 1e-13 relative (reassociation only);
///  - max_positive_step is bit-identical across lanes (min is associative).
struct Ops {
  const char* name;

  /// out[i] = log(x[i]); x[i] > 0.
  void (*log_batch)(const double* x, double* out, std::size_t n);

  /// w[i] = 1 - sum_l a3[l]*c[l][i]  (solvent volume fraction).
  void (*solvent_fraction)(const double* const* c, const double* a3,
                           int num_species, double* w, std::size_t n);

  /// sum_i m[i] * c[i] * (log(c[i]) + log_a3 - 1); c[i] > 0.
  double (*entropy_weighted_sum)(const double* m, const double* c,
                                 double log_a3, std::size_t n);

  /// out[i] = log(c1[i]) + log_a3 - d/(2 c1) - d^2/(6 c1^2), d = c1[i]-c0[i].
  void (*mu_e1_batch)(const double* c1, const double* c0, double log_a3,
                      double* out, std::size_t n);

  /// out[i] = -log(w1) - s/(2 w1) + s^2/(6 w1^2), s = w0[i]-w1[i].
  /// Species-independent core of the second-order steric potential; callers
  /// scale by a_l^3/a_0^3.
  void (*e2_base_batch)(const double* w1, const double* w0, double* out,
                        std::size_t n);

  /// min over {i : dx[i] < 0} of x[i] / (-dx[i]); +inf when no such i.
  /// Largest step lambda with x + lambda*dx >= 0 componentwise.
  double (*max_positive_step)(const double* x, const double* dx,
                              std::size_t n);
};

/// Active lane (resolved once, thread-safe).
const Ops& ops();

/// Named lanes, for equivalence tests. avx2() is null when unavailable.
const Ops& scalar();
const Ops* avx2();

}  // namespace mpnp::kernels
