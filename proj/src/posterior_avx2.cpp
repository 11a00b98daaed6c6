// AVX2+FMA variant of the batched posterior kernel. This translation unit is
// compiled with -mavx2 -mfma; the dispatcher in posterior_scalar.cpp only
// routes here after checking CPU support at runtime.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "utsim/posterior.hpp"

namespace utsim::kernel {

namespace {

// exp() for 4 doubles, Cephes-style: range reduction by powers of two, then
// a rational approximation of exp(r) on |r| <= ln(2)/2. Accuracy ~1-2 ulp,
// which the kernel equivalence test pins against std::exp.
inline __m256d exp_pd(__m256d x) {
    const __m256d hi = _mm256_set1_pd(709.437);
    const __m256d lo = _mm256_set1_pd(-708.396);
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);

    x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    x = _mm256_fnmadd_pd(n, c1, x);
    x = _mm256_fnmadd_pd(n, c2, x);

    const __m256d xx = _mm256_mul_pd(x, x);
    __m256d px = _mm256_fmadd_pd(p0, xx, p1);
    px = _mm256_fmadd_pd(px, xx, p2);
    px = _mm256_mul_pd(px, x);
    __m256d qx = _mm256_fmadd_pd(q0, xx, q1);
    qx = _mm256_fmadd_pd(qx, xx, q2);
    qx = _mm256_fmadd_pd(qx, xx, q3);
    const __m256d r =
        _mm256_fmadd_pd(two, _mm256_div_pd(px, _mm256_sub_pd(qx, px)), one);

    // Scale by 2^n through the exponent bits; the input clamp keeps n within
    // the normal range.
    const __m128i n32 = _mm256_cvtpd_epi32(n);
    const __m256i n64 = _mm256_cvtepi32_epi64(n32);
    const __m256i pow2 =
        _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(r, _mm256_castsi256_pd(pow2));
}

// sigmoid(x) = 1/(1+exp(-x)), rearranged around exp(-|x|) exactly like the
// scalar reference so the two paths agree to rounding error.
inline __m256d sigmoid_pd(__m256d x) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d neg_abs = _mm256_min_pd(x, _mm256_sub_pd(zero, x));
    const __m256d e = exp_pd(neg_abs);
    const __m256d denom = _mm256_add_pd(one, e);
    const __m256d pos = _mm256_div_pd(one, denom);
    const __m256d neg = _mm256_div_pd(e, denom);
    const __m256d take_pos = _mm256_cmp_pd(x, zero, _CMP_GE_OQ);
    return _mm256_blendv_pd(neg, pos, take_pos);
}

void batch_avx2(const std::uint32_t* k, const std::uint32_t* n, std::size_t len,
                double bias, double wk, double wn, double* out) {
    const __m256d vb = _mm256_set1_pd(bias);
    const __m256d vwk = _mm256_set1_pd(wk);
    const __m256d vwn = _mm256_set1_pd(wn);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        // Counts stay far below 2^31 (total challenges are validated against
        // that), so the signed int32 -> double conversion is exact.
        const __m128i ki = _mm_loadu_si128(reinterpret_cast<const __m128i*>(k + i));
        const __m128i ni = _mm_loadu_si128(reinterpret_cast<const __m128i*>(n + i));
        const __m256d kd = _mm256_cvtepi32_pd(ki);
        const __m256d nd = _mm256_cvtepi32_pd(ni);
        __m256d x = _mm256_fmadd_pd(kd, vwk, vb);
        x = _mm256_fmadd_pd(nd, vwn, x);
        _mm256_storeu_pd(out + i, sigmoid_pd(x));
    }
    for (; i < len; ++i) {
        const double x =
            bias + static_cast<double>(k[i]) * wk + static_cast<double>(n[i]) * wn;
        double e, s;
        if (x >= 0.0) {
            e = std::exp(-x);
            s = 1.0 / (1.0 + e);
        } else {
            e = std::exp(x);
            s = e / (1.0 + e);
        }
        out[i] = s;
    }
}

}  // namespace

const Impl kAvx2Impl{"avx2", &batch_avx2};

}  // namespace utsim::kernel

#endif  // x86_64
