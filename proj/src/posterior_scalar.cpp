#include "utsim/posterior.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "utsim/stats.hpp"

namespace utsim {

std::optional<double> posterior_trap(std::uint64_t k, std::uint64_t n, const PosteriorParams& params) {
    if (k > n) throw std::domain_error("posterior_trap: k > n");
    if (!(params.prior > 0.0 && params.prior < 1.0))
        throw std::domain_error("posterior_trap: prior outside (0, 1)");
    if (n == 0) return params.prior;  // no evidence yet

    const double lt = stats::log_binomial_pmf(static_cast<std::int64_t>(k),
                                              static_cast<std::int64_t>(n), params.p_trap);
    const double ln = stats::log_binomial_pmf(static_cast<std::int64_t>(k),
                                              static_cast<std::int64_t>(n), params.p_nontrap);
    const bool t_impossible = std::isinf(lt);
    const bool n_impossible = std::isinf(ln);
    if (t_impossible && n_impossible) return std::nullopt;  // indeterminate
    if (t_impossible) return 0.0;
    if (n_impossible) return 1.0;

    // posterior = 1 / (1 + exp(log-odds against)), stable for both signs.
    const double log_odds_against =
        (ln - lt) + std::log1p(-params.prior) - std::log(params.prior);
    if (log_odds_against >= 0.0) {
        return 1.0 / (1.0 + std::exp(log_odds_against));
    }
    const double e = std::exp(log_odds_against);
    return 1.0 / (1.0 + e);
}

namespace kernel {

namespace {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void batch_scalar(const std::uint32_t* k, const std::uint32_t* n, std::size_t len,
                  double bias, double wk, double wn, double* out) {
    for (std::size_t i = 0; i < len; ++i) {
        out[i] = sigmoid(bias + static_cast<double>(k[i]) * wk + static_cast<double>(n[i]) * wn);
    }
}

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Impl& choose_impl() {
    const char* forced = std::getenv("UTSIM_KERNEL");
    if (forced != nullptr) {
        const std::string want(forced);
        if (want == "scalar") return kScalarImpl;
#if defined(__x86_64__) || defined(_M_X64)
        if (want == "avx2") {
            if (!cpu_has_avx2()) throw std::runtime_error("UTSIM_KERNEL=avx2: CPU lacks AVX2/FMA");
            return kAvx2Impl;
        }
#endif
        throw std::runtime_error("UTSIM_KERNEL: unknown value '" + want + "'");
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2()) return kAvx2Impl;
#endif
    return kScalarImpl;
}

}  // namespace

const Impl kScalarImpl{"scalar", &batch_scalar};

const Impl& active_impl() {
    static const Impl& impl = choose_impl();
    return impl;
}

void posterior_batch(const std::uint32_t* k, const std::uint32_t* n, std::size_t len,
                     const PosteriorParams& params, double* out) {
    if (!(params.p_trap > 0.0 && params.p_trap < 1.0) ||
        !(params.p_nontrap > 0.0 && params.p_nontrap < 1.0))
        throw std::domain_error("posterior_batch: degenerate appearance probability");
    if (!(params.prior > 0.0 && params.prior < 1.0))
        throw std::domain_error("posterior_batch: prior outside (0, 1)");
    const double a = std::log(params.p_trap) - std::log(params.p_nontrap);
    const double b = std::log1p(-params.p_trap) - std::log1p(-params.p_nontrap);
    const double bias = std::log(params.prior) - std::log1p(-params.prior);
    active_impl().run(k, n, len, bias, a - b, b, out);
}

}  // namespace kernel

}  // namespace utsim
