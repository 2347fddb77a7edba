// Compiled with -mavx2 only; never called unless the CPU reports AVX2.

#include "qrproxy/simd/kernels.hpp"

#include <immintrin.h>

namespace qrproxy::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double check_loss_sum(std::span<const double> r, double p) {
  const std::size_t n = r.size();
  const std::size_t body = n & ~std::size_t{3};
  const __m256d vp = _mm256_set1_pd(p);
  const __m256d vpm1 = _mm256_set1_pd(p - 1.0);
  const __m256d zero = _mm256_setzero_pd();
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d v = _mm256_loadu_pd(r.data() + i);
    const __m256d neg = _mm256_cmp_pd(v, zero, _CMP_LT_OQ);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, _mm256_blendv_pd(vp, vpm1, neg)));
  }
  double sum = hsum(acc);
  const double pm1 = p - 1.0;
  for (std::size_t i = body; i < n; ++i) sum += r[i] * (r[i] < 0.0 ? pm1 : p);
  return sum;
}

void check_loss(std::span<const double> r, double p, std::span<double> out) {
  const std::size_t n = r.size();
  const std::size_t body = n & ~std::size_t{3};
  const __m256d vp = _mm256_set1_pd(p);
  const __m256d vpm1 = _mm256_set1_pd(p - 1.0);
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d v = _mm256_loadu_pd(r.data() + i);
    const __m256d neg = _mm256_cmp_pd(v, zero, _CMP_LT_OQ);
    _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(v, _mm256_blendv_pd(vp, vpm1, neg)));
  }
  const double pm1 = p - 1.0;
  for (std::size_t i = body; i < n; ++i) out[i] = r[i] * (r[i] < 0.0 ? pm1 : p);
}

double sq_diff_sum(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t body = n & ~std::size_t{3};
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double sum = hsum(acc);
  for (std::size_t i = body; i < n; ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void ncs_eval(const NcsView& s, std::span<const std::int32_t> idx, std::span<const double> x,
              std::span<double> out) {
  const std::size_t n = x.size();
  const std::size_t body = n & ~std::size_t{3};
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sixth = _mm256_set1_pd(6.0);
  const __m128i step = _mm_set1_epi32(1);
  for (std::size_t i = 0; i < body; i += 4) {
    const __m128i j0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx.data() + i));
    const __m128i j1 = _mm_add_epi32(j0, step);
    const __m256d a = _mm256_i32gather_pd(s.knots.data(), j0, 8);
    const __m256d b = _mm256_i32gather_pd(s.knots.data(), j1, 8);
    const __m256d v0 = _mm256_i32gather_pd(s.values.data(), j0, 8);
    const __m256d v1 = _mm256_i32gather_pd(s.values.data(), j1, 8);
    const __m256d s0 = _mm256_i32gather_pd(s.second.data(), j0, 8);
    const __m256d s1 = _mm256_i32gather_pd(s.second.data(), j1, 8);
    const __m256d xv = _mm256_loadu_pd(x.data() + i);
    const __m256d h = _mm256_sub_pd(b, a);
    const __m256d dl = _mm256_sub_pd(xv, a);
    const __m256d dr = _mm256_sub_pd(b, xv);
    const __m256d lin =
        _mm256_div_pd(_mm256_add_pd(_mm256_mul_pd(dl, v1), _mm256_mul_pd(dr, v0)), h);
    const __m256d curv =
        _mm256_add_pd(_mm256_mul_pd(_mm256_add_pd(one, _mm256_div_pd(dl, h)), s1),
                      _mm256_mul_pd(_mm256_add_pd(one, _mm256_div_pd(dr, h)), s0));
    const __m256d w = _mm256_div_pd(_mm256_mul_pd(dl, dr), sixth);
    _mm256_storeu_pd(out.data() + i, _mm256_sub_pd(lin, _mm256_mul_pd(w, curv)));
  }
  if (body < n) {
    scalar::ncs_eval(s, idx.subspan(body), x.subspan(body), out.subspan(body));
  }
}

void tpow_eval(const TpowView& s, std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  const std::size_t body = n & ~std::size_t{3};
  const int l = s.degree;
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x.data() + i);
    __m256d acc = _mm256_set1_pd(s.beta[l]);
    for (int j = l - 1; j >= 0; --j) {
      acc = _mm256_add_pd(_mm256_mul_pd(acc, xv), _mm256_set1_pd(s.beta[j]));
    }
    for (std::size_t k = 0; k < s.knots.size(); ++k) {
      const __m256d t = _mm256_max_pd(_mm256_sub_pd(xv, _mm256_set1_pd(s.knots[k])), zero);
      __m256d tp = t;
      for (int m = 1; m < l; ++m) tp = _mm256_mul_pd(tp, t);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(s.beta[l + 1 + k]), tp));
    }
    _mm256_storeu_pd(out.data() + i, acc);
  }
  if (body < n) scalar::tpow_eval(s, x.subspan(body), out.subspan(body));
}

void gauss_logratio_acc(std::span<const double> w, std::span<const double> mean_new,
                        std::span<const double> mean_old, double inv_two_var,
                        std::span<double> acc) {
  const std::size_t n = w.size();
  const std::size_t body = n & ~std::size_t{3};
  const __m256d c = _mm256_set1_pd(inv_two_var);
  for (std::size_t i = 0; i < body; i += 4) {
    const __m256d wv = _mm256_loadu_pd(w.data() + i);
    const __m256d dn = _mm256_sub_pd(wv, _mm256_loadu_pd(mean_new.data() + i));
    const __m256d d0 = _mm256_sub_pd(wv, _mm256_loadu_pd(mean_old.data() + i));
    const __m256d diff = _mm256_sub_pd(_mm256_mul_pd(d0, d0), _mm256_mul_pd(dn, dn));
    _mm256_storeu_pd(acc.data() + i,
                     _mm256_add_pd(_mm256_loadu_pd(acc.data() + i), _mm256_mul_pd(diff, c)));
  }
  if (body < n) {
    scalar::gauss_logratio_acc(w.subspan(body), mean_new.subspan(body), mean_old.subspan(body),
                               inv_two_var, acc.subspan(body));
  }
}

}  // namespace qrproxy::simd::avx2
