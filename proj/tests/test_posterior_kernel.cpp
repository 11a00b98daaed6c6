#include <cmath>
#include <cstring>
#include <doctest.h>
#include <vector>

#include "utsim/posterior.hpp"
#include "utsim/rng.hpp"

using namespace utsim;

TEST_SUITE_BEGIN("posterior_kernel");

namespace {

struct Batch {
    std::vector<std::uint32_t> k, n;
};

Batch random_batch(std::size_t len, std::uint64_t seed, std::uint32_t max_n) {
    Batch batch;
    Rng rng(seed);
    batch.k.resize(len);
    batch.n.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        batch.n[i] = 1 + static_cast<std::uint32_t>(rng.below(max_n));
        batch.k[i] = static_cast<std::uint32_t>(rng.below(batch.n[i] + 1));
    }
    return batch;
}

}  // namespace

TEST_CASE("batched kernel agrees with the scalar posterior") {
    const PosteriorParams grid[] = {
        {0.75, 0.011, 0.001}, {0.15, 0.011, 0.0005}, {0.5, 0.022, 0.5}, {0.9, 0.2, 1e-6},
    };
    for (const auto& params : grid) {
        const Batch batch = random_batch(1003, 0xfeed + static_cast<std::uint64_t>(params.p_trap * 100), 5000);
        std::vector<double> out(batch.k.size());
        kernel::posterior_batch(batch.k.data(), batch.n.data(), batch.k.size(), params, out.data());
        for (std::size_t i = 0; i < batch.k.size(); ++i) {
            const auto reference = posterior_trap(batch.k[i], batch.n[i], params);
            REQUIRE(reference.has_value());
            // Same quantity through two algebraic routes (two full pmfs vs the
            // reduced likelihood-ratio form). At n in the thousands the routes
            // accumulate log-space rounding of order 1e-12 relative, so the
            // bound sits one order above that.
            CHECK(std::abs(out[i] - *reference) <=
                  1e-10 * std::max(1e-30, std::max(std::abs(out[i]), std::abs(*reference))) + 1e-300);
        }
    }
}

TEST_CASE("scalar and SIMD implementations are equivalent") {
#if defined(__x86_64__) || defined(_M_X64)
    if (!(__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))) {
        MESSAGE("CPU lacks AVX2+FMA; nothing to compare");
        return;
    }
    const Batch batch = random_batch(4097, 0xc0ffee, 100000);
    // Weight grids covering strong and weak evidence in both directions.
    const double biases[] = {-6.9, 0.0, 3.2};
    const double wks[] = {4.2, 0.3, -2.0};
    const double wns[] = {-1.4, -0.01, 0.05};
    std::vector<double> scalar_out(batch.k.size()), simd_out(batch.k.size());
    for (const double bias : biases) {
        for (const double wk : wks) {
            for (const double wn : wns) {
                kernel::kScalarImpl.run(batch.k.data(), batch.n.data(), batch.k.size(), bias, wk,
                                        wn, scalar_out.data());
                kernel::kAvx2Impl.run(batch.k.data(), batch.n.data(), batch.k.size(), bias, wk,
                                      wn, simd_out.data());
                for (std::size_t i = 0; i < batch.k.size(); ++i) {
                    CAPTURE(i);
                    CAPTURE(bias);
                    CAPTURE(wk);
                    CAPTURE(wn);
                    // Sigmoid outputs live in [0, 1]; absolute tolerance is
                    // the right scale and 1e-12 leaves ~3 decimal orders of
                    // headroom over the observed deviation of the vector exp.
                    CHECK(std::abs(scalar_out[i] - simd_out[i]) <= 1e-12);
                }
            }
        }
    }
#else
    MESSAGE("not an x86-64 build; nothing to compare");
#endif
}

TEST_CASE("kernel saturates cleanly at extreme inputs") {
    const auto run = [](double bias, double wk, double wn, std::uint32_t k, std::uint32_t n) {
        double out = 0.0;
        kernel::active_impl().run(&k, &n, 1, bias, wk, wn, &out);
        return out;
    };
    CHECK(run(0.0, 50.0, 0.0, 100, 100) == 1.0);
    CHECK(run(0.0, -50.0, 0.0, 100, 100) <= 1e-300);  // may be a clamped denormal-scale value
    CHECK(run(0.0, 0.0, 0.0, 0, 0) == 0.5);
}

TEST_CASE("active implementation matches the platform") {
    const kernel::Impl& impl = kernel::active_impl();
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        const char* forced = std::getenv("UTSIM_KERNEL");
        if (forced == nullptr) CHECK(std::strcmp(impl.name, "avx2") == 0);
        return;
    }
#endif
    CHECK(std::strcmp(impl.name, "scalar") == 0);
}

TEST_SUITE_END();
