#include "mpnp/kernels/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

namespace mpnp::kernels {
namespace {

// log(x) = k*ln2 + 2*atanh(t), t = (m-1)/(m+1), x = 2^k * m, m in [2/3, 4/3).
// t is exact by Sterbenz (m in [1/2, 2)), |t| <= 1/5, and the odd atanh
// series truncated at t^25 is below 1 ulp of log over the reduced range.
// Accuracy vs std::log: ~2 ulp worst case (checked in test_kernels.cpp).

const __m256d kOne = _mm256_set1_pd(1.0);
const __m256d kHalf = _mm256_set1_pd(0.5);
const __m256d kTwoThirdsHi = _mm256_set1_pd(4.0 / 3.0);
const __m256d kLn2Hi = _mm256_set1_pd(6.93147180369123816490e-01);
const __m256d kLn2Lo = _mm256_set1_pd(1.90821492927058770002e-10);

inline __m256d log_pd(__m256d x) {
  // Rescale subnormals so the exponent field is meaningful.
  const __m256d tiny = _mm256_cmp_pd(
      x, _mm256_set1_pd(std::numeric_limits<double>::min()), _CMP_LT_OQ);
  x = _mm256_blendv_pd(x, _mm256_mul_pd(x, _mm256_set1_pd(0x1p54)), tiny);
  __m256d kbias = _mm256_blendv_pd(_mm256_setzero_pd(),
                                   _mm256_set1_pd(-54.0), tiny);

  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i expo = _mm256_srli_epi64(bits, 52);
  // int64 -> double for small non-negative integers.
  const __m256d expod = _mm256_sub_pd(
      _mm256_castsi256_pd(
          _mm256_or_si256(expo, _mm256_set1_epi64x(0x4330000000000000LL))),
      _mm256_set1_pd(0x1p52));
  __m256d k = _mm256_add_pd(_mm256_sub_pd(expod, _mm256_set1_pd(1023.0)),
                            kbias);

  // Mantissa in [1,2), then fold to [2/3, 4/3).
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
      _mm256_set1_epi64x(0x3FF0000000000000LL)));
  const __m256d fold = _mm256_cmp_pd(m, kTwoThirdsHi, _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, kHalf), fold);
  k = _mm256_add_pd(k, _mm256_and_pd(fold, kOne));

  const __m256d t =
      _mm256_div_pd(_mm256_sub_pd(m, kOne), _mm256_add_pd(m, kOne));
  const __m256d u = _mm256_mul_pd(t, t);

  // Q(u) = sum_{j>=1} u^(j-1)/(2j+1); atanh(t) = t + t*u*Q(u).
  __m256d q = _mm256_set1_pd(1.0 / 25.0);
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 23.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 21.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 19.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 17.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 15.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 13.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 11.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 9.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 7.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 5.0));
  q = _mm256_fmadd_pd(q, u, _mm256_set1_pd(1.0 / 3.0));

  const __m256d s = _mm256_add_pd(t, t);
  const __m256d atanh2 = _mm256_fmadd_pd(_mm256_mul_pd(s, u), q, s);
  return _mm256_fmadd_pd(k, kLn2Hi,
                         _mm256_fmadd_pd(k, kLn2Lo, atanh2));
}

inline double hsum(__m256d v) {
  // Fixed summation order: lane 0 + lane 1 + lane 2 + lane 3.
  alignas(32) double a[4];
  _mm256_store_pd(a, v);
  return ((a[0] + a[1]) + a[2]) + a[3];
}

inline double hmin(__m256d v) {
  alignas(32) double a[4];
  _mm256_store_pd(a, v);
  double r = a[0];
  if (a[1] < r) r = a[1];
  if (a[2] < r) r = a[2];
  if (a[3] < r) r = a[3];
  return r;
}

void log_batch(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, log_pd(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = std::log(x[i]);
}

void solvent_fraction(const double* const* c, const double* a3,
                      int num_species, double* w, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = kOne;
    for (int l = 0; l < num_species; ++l) {
      // mul+sub (not fma) to stay bit-identical with the scalar lane
      s = _mm256_sub_pd(
          s, _mm256_mul_pd(_mm256_set1_pd(a3[l]), _mm256_loadu_pd(c[l] + i)));
    }
    _mm256_storeu_pd(w + i, s);
  }
  for (; i < n; ++i) {
    double s = 1.0;
    for (int l = 0; l < num_species; ++l) s -= a3[l] * c[l][i];
    w[i] = s;
  }
}

double entropy_weighted_sum(const double* m, const double* c, double log_a3,
                            std::size_t n) {
  const __m256d la = _mm256_set1_pd(log_a3 - 1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d ci = _mm256_loadu_pd(c + i);
    const __m256d term = _mm256_add_pd(log_pd(ci), la);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(m + i), ci), term,
                          acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += m[i] * c[i] * (std::log(c[i]) + log_a3 - 1.0);
  return r;
}

void mu_e1_batch(const double* c1, const double* c0, double log_a3,
                 double* out, std::size_t n) {
  const __m256d la = _mm256_set1_pd(log_a3);
  const __m256d sixth = _mm256_set1_pd(1.0 / 6.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(c1 + i);
    const __m256d r =
        _mm256_div_pd(_mm256_sub_pd(a, _mm256_loadu_pd(c0 + i)), a);
    __m256d v = _mm256_add_pd(log_pd(a), la);
    v = _mm256_fnmadd_pd(kHalf, r, v);
    v = _mm256_fnmadd_pd(_mm256_mul_pd(r, r), sixth, v);
    _mm256_storeu_pd(out + i, v);
  }
  for (; i < n; ++i) {
    const double d = c1[i] - c0[i];
    const double r = d / c1[i];
    out[i] = std::log(c1[i]) + log_a3 - 0.5 * r - r * r / 6.0;
  }
}

void e2_base_batch(const double* w1, const double* w0, double* out,
                   std::size_t n) {
  const __m256d sixth = _mm256_set1_pd(1.0 / 6.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(w1 + i);
    const __m256d r =
        _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(w0 + i), a), a);
    __m256d v = _mm256_sub_pd(_mm256_setzero_pd(), log_pd(a));
    v = _mm256_fnmadd_pd(kHalf, r, v);
    v = _mm256_fmadd_pd(_mm256_mul_pd(r, r), sixth, v);
    _mm256_storeu_pd(out + i, v);
  }
  for (; i < n; ++i) {
    const double s = w0[i] - w1[i];
    const double r = s / w1[i];
    out[i] = -std::log(w1[i]) - 0.5 * r + r * r / 6.0;
  }
}

double max_positive_step(const double* x, const double* dx, std::size_t n) {
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  __m256d lam = inf;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_loadu_pd(dx + i);
    const __m256d neg = _mm256_cmp_pd(d, _mm256_setzero_pd(), _CMP_LT_OQ);
    const __m256d t = _mm256_div_pd(
        _mm256_loadu_pd(x + i), _mm256_sub_pd(_mm256_setzero_pd(), d));
    lam = _mm256_min_pd(lam, _mm256_blendv_pd(inf, t, neg));
  }
  double r = hmin(lam);
  for (; i < n; ++i) {
    if (dx[i] < 0.0) {
      const double t = x[i] / -dx[i];
      if (t < r) r = t;
    }
  }
  return r;
}

}  // namespace

const Ops* avx2() {
  static const Ops ops = {
      "avx2",          log_batch,     solvent_fraction, entropy_weighted_sum,
      mu_e1_batch,     e2_base_batch, max_positive_step,
  };
  return &ops;
}

}  // namespace mpnp::kernels

#else

namespace mpnp::kernels {
const Ops* avx2() { return nullptr; }
}  // namespace mpnp::kernels

#endif
