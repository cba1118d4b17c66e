#include "mpnp/kernels/kernels.hpp"

#include <cmath>
#include <limits>

// Reference lane. Keep these loops dead simple: the AVX2 lane is validated
// against them element by element.

namespace mpnp::kernels {
namespace {

void log_batch(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

void solvent_fraction(const double* const* c, const double* a3,
                      int num_species, double* w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;
    for (int l = 0; l < num_species; ++l) s -= a3[l] * c[l][i];
    w[i] = s;
  }
}

double entropy_weighted_sum(const double* m, const double* c, double log_a3,
                            std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += m[i] * c[i] * (std::log(c[i]) + log_a3 - 1.0);
  return acc;
}

void mu_e1_batch(const double* c1, const double* c0, double log_a3,
                 double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = c1[i] - c0[i];
    const double r = d / c1[i];
    out[i] = std::log(c1[i]) + log_a3 - 0.5 * r - r * r / 6.0;
  }
}

void e2_base_batch(const double* w1, const double* w0, double* out,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double s = w0[i] - w1[i];
    const double r = s / w1[i];
    out[i] = -std::log(w1[i]) - 0.5 * r + r * r / 6.0;
  }
}

double max_positive_step(const double* x, const double* dx, std::size_t n) {
  double lam = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (dx[i] < 0.0) {
      const double t = x[i] / -dx[i];
      if (t < lam) lam = t;
    }
  }
  return lam;
}

}  // namespace

const Ops& scalar() {
  static const Ops ops = {
      "scalar",        log_batch,    solvent_fraction, entropy_weighted_sum,
      mu_e1_batch,     e2_base_batch, max_positive_step,
  };
  return ops;
}

}  // namespace mpnp::kernels
