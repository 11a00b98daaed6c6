#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

// Bayes posterior Pr(image is a trap | it appeared k times in n challenges).
//
// Per-image model: under the trap hypothesis the image lands in a challenge
// with probability p_trap, under the non-trap hypothesis with p_nontrap; the
// appearance count over n challenges is Binomial either way. The posterior is
//
//   prior * L_trap / (prior * L_trap + (1 - prior) * L_nontrap)
//
// evaluated in log space. Because the binomial coefficient cancels in the
// likelihood ratio, the whole thing reduces to a logistic over an affine
// function of (k, n):
//
//   posterior = sigmoid(logit(prior) + k*(A - B) + n*B)
//   A = log(p_trap) - log(p_nontrap),  B = log(1-p_trap) - log(1-p_nontrap)
//
// which is what the batched kernel computes. The batched form exists because
// the learner periodically refreshes the posterior for every tracked image
// (thousands of records per sweep); it is a pure arithmetic map and ships
// with a scalar reference implementation plus an AVX2 variant selected at
// runtime. The two are equivalence-tested against each other.

namespace utsim {

struct PosteriorParams {
    double p_trap;     // appearance probability if the image is a trap, in (0, 1]
    double p_nontrap;  // appearance probability otherwise, in (0, 1)
    double prior;      // Pr(trap) before seeing counts, in (0, 1)
};

// Scalar reference. n = challenges elapsed since the image's last passed
// challenge, k = appearances in them (k <= n). n == 0 carries no evidence and
// returns the prior unchanged. Returns nullopt when the counts are impossible
// under both hypotheses (both likelihoods zero), which callers treat as
// "no update".
std::optional<double> posterior_trap(std::uint64_t k, std::uint64_t n, const PosteriorParams& params);

namespace kernel {

// out[i] = sigmoid(bias + k[i]*wk + n[i]*wn); the affine-logistic core above.
using BatchFn = void (*)(const std::uint32_t* k, const std::uint32_t* n, std::size_t len,
                         double bias, double wk, double wn, double* out);

struct Impl {
    const char* name;
    BatchFn run;
};

// Always-available reference.
extern const Impl kScalarImpl;

#if defined(__x86_64__) || defined(_M_X64)
// AVX2+FMA variant; calling it on a CPU without AVX2 is undefined.
extern const Impl kAvx2Impl;
#endif

// Implementation picked at load time: AVX2 when the CPU supports it, scalar
// otherwise. Overridable with UTSIM_KERNEL=scalar|avx2 (useful for the
// equivalence tests and for bit-reproducibility across machines).
const Impl& active_impl();

// Batched posterior for non-degenerate params (0 < p_trap < 1). Lengths of
// k, n, out must match; k[i] <= n[i]. Dispatches to active_impl().
void posterior_batch(const std::uint32_t* k, const std::uint32_t* n, std::size_t len,
                     const PosteriorParams& params, double* out);

}  // namespace kernel

}  // namespace utsim
