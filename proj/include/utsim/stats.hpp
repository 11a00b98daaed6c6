#pragma once

#include <cstdint>

// Statistical kernels used by the trap detectors. All functions are pure and
// safe for unrestricted concurrent use.
//
// Numerical methods:
//   - binomial pmf: log-gamma based, evaluated in log space so n up to 1e6
//     does not overflow; relative accuracy ~1e-13.
//   - chi-square(1) survival function: sf(x) = erfc(sqrt(x/2)); relative
//     error <= 1e-9 on [0, 100].

namespace utsim::stats {

// log C(n, k). Throws std::domain_error if k > n.
double log_choose(std::int64_t n, std::int64_t k);

// log of C(n,k) p^k (1-p)^(n-k). Returns -inf for events of probability
// zero (p == 0 with k > 0, p == 1 with k < n). Throws std::domain_error on
// k > n, negative arguments, or p outside [0, 1].
double log_binomial_pmf(std::int64_t k, std::int64_t n, double p);

// C(n,k) p^k (1-p)^(n-k), computed as exp(log_binomial_pmf).
double binomial_pmf(std::int64_t k, std::int64_t n, double p);

// Upper-tail probability of the chi-square distribution with 1 degree of
// freedom. Throws std::domain_error for negative x.
double chisq1_sf(double x);

struct PearsonResult {
    double statistic;  // non-negative
    double p_value;    // in [0, 1], non-increasing in statistic
};

// Two-cell Pearson goodness-of-fit test against Binomial(trials, p0), one
// degree of freedom:
//   X^2 = (o - t p0)^2 / (t p0) + ((t - o) - t (1 - p0))^2 / (t (1 - p0))
// No continuity correction (see pearson_chi2_1dof_corrected).
// Throws std::domain_error if observed > trials, trials < 1, or p0 not in
// (0, 1).
PearsonResult pearson_chi2_1dof(std::int64_t observed, std::int64_t trials, double p0);

// Same test with the Yates continuity correction. Off by default everywhere;
// provided behind a config flag only.
PearsonResult pearson_chi2_1dof_corrected(std::int64_t observed, std::int64_t trials, double p0);

}  // namespace utsim::stats
