#include "utsim/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace utsim::stats {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double log_choose(std::int64_t n, std::int64_t k) {
    if (n < 0 || k < 0 || k > n) throw std::domain_error("log_choose: require 0 <= k <= n");
    if (k == 0 || k == n) return 0.0;
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

double log_binomial_pmf(std::int64_t k, std::int64_t n, double p) {
    if (n < 0 || k < 0) throw std::domain_error("log_binomial_pmf: negative argument");
    if (k > n) throw std::domain_error("log_binomial_pmf: k > n");
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("log_binomial_pmf: p outside [0, 1]");
    // Degenerate trial probabilities: the distribution is a point mass.
    if (p == 0.0) return k == 0 ? 0.0 : kNegInf;
    if (p == 1.0) return k == n ? 0.0 : kNegInf;
    return log_choose(n, k) + static_cast<double>(k) * std::log(p) +
           static_cast<double>(n - k) * std::log1p(-p);
}

double binomial_pmf(std::int64_t k, std::int64_t n, double p) {
    return std::exp(log_binomial_pmf(k, n, p));
}

double chisq1_sf(double x) {
    if (x < 0.0) throw std::domain_error("chisq1_sf: negative statistic");
    return std::erfc(std::sqrt(0.5 * x));
}

namespace {

PearsonResult pearson_impl(std::int64_t observed, std::int64_t trials, double p0, bool corrected) {
    if (trials < 1) throw std::domain_error("pearson_chi2_1dof: trials must be >= 1");
    if (observed < 0 || observed > trials)
        throw std::domain_error("pearson_chi2_1dof: observed outside [0, trials]");
    if (!(p0 > 0.0 && p0 < 1.0)) throw std::domain_error("pearson_chi2_1dof: p0 outside (0, 1)");
    const double t = static_cast<double>(trials);
    const double o1 = static_cast<double>(observed);
    const double o0 = t - o1;
    const double e1 = t * p0;
    const double e0 = t * (1.0 - p0);
    double d1 = std::abs(o1 - e1);
    double d0 = std::abs(o0 - e0);
    if (corrected) {
        d1 = std::max(0.0, d1 - 0.5);
        d0 = std::max(0.0, d0 - 0.5);
    }
    const double statistic = d1 * d1 / e1 + d0 * d0 / e0;
    return {statistic, chisq1_sf(statistic)};
}

}  // namespace

PearsonResult pearson_chi2_1dof(std::int64_t observed, std::int64_t trials, double p0) {
    return pearson_impl(observed, trials, p0, /*corrected=*/false);
}

PearsonResult pearson_chi2_1dof_corrected(std::int64_t observed, std::int64_t trials, double p0) {
    return pearson_impl(observed, trials, p0, /*corrected=*/true);
}

}  // namespace utsim::stats
