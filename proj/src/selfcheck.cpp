#include "utsim/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "utsim/attacker.hpp"
#include "utsim/rng.hpp"
#include "utsim/sim_core.hpp"
#include "utsim/stats.hpp"

namespace utsim::selfcheck {

namespace {

std::uint64_t choose_u64(std::uint32_t n, std::uint32_t k) {
    if (k > n) return 0;
    std::uint64_t result = 1;
    for (std::uint32_t i = 0; i < k; ++i) {
        result = result * (n - i) / (i + 1);
    }
    return result;
}

bool close_rel(double a, double b, double tol) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) <= tol * std::max(scale, 1e-300);
}

}  // namespace

// For every integer 1 <= t <= s <= 12, the chance that a fixed element lands
// in a uniform t-subset of an s-set is 1 - C(s-1,t)/C(s,t) = t/s. Verified
// with zero tolerance by exact integer cross-multiplication, and the
// implementation must return the correctly rounded double t/s.
SuiteResult check_trap_exposure_closed_form() {
    SuiteResult result{"trap-exposure closed form", true, ""};
    int cases = 0;
    for (std::uint32_t s = 1; s <= 12; ++s) {
        for (std::uint32_t t = 1; t <= s; ++t) {
            const std::uint64_t with = choose_u64(s, t);        // all t-subsets
            const std::uint64_t without = choose_u64(s - 1, t); // those missing the element
            // t/s == 1 - without/with  <=>  t*with == s*(with - without)
            if (t * with != static_cast<std::uint64_t>(s) * (with - without)) {
                result.passed = false;
                result.detail = "identity fails at t=" + std::to_string(t) +
                                " s=" + std::to_string(s);
                return result;
            }
            const double impl = pr_in_challenge_given_trap(static_cast<double>(t), s);
            const double expected = static_cast<double>(t) / static_cast<double>(s);
            if (impl != expected) {
                result.passed = false;
                result.detail = "implementation mismatch at t=" + std::to_string(t) +
                                " s=" + std::to_string(s);
                return result;
            }
            ++cases;
        }
    }
    result.detail = std::to_string(cases) + " (t, s) pairs, exact";
    return result;
}

namespace {

// Reference grader on bitmask-encoded 4-image challenges, written directly
// from the protocol rules and sharing no code with grade_rule.
struct MaskOutcome {
    bool passed;
    unsigned correct_mask;
    unsigned added_mask;
    unsigned removed_mask;
};

MaskOutcome reference_grade(unsigned member_mask, unsigned ne_mask, unsigned trap_mask,
                            unsigned pick_mask) {
    MaskOutcome out{true, 0, 0, 0};
    for (unsigned i = 0; i < 4; ++i) {
        const unsigned bit = 1u << i;
        const bool correct = ((pick_mask & bit) != 0) == ((member_mask & bit) != 0);
        if (correct) out.correct_mask |= bit;
        if (!correct && (ne_mask & bit) == 0) out.passed = false;
    }
    for (unsigned i = 0; i < 4; ++i) {
        const unsigned bit = 1u << i;
        if (out.passed && (ne_mask & bit) && !(out.correct_mask & bit)) out.added_mask |= bit;
        if ((trap_mask & bit) && (out.correct_mask & bit)) out.removed_mask |= bit;
    }
    return out;
}

unsigned popcount4(unsigned m) { return static_cast<unsigned>(__builtin_popcount(m & 0xF)); }

}  // namespace

SuiteResult check_grading_rule() {
    SuiteResult result{"grading rule vs enumeration", true, ""};
    const std::vector<ImageId> images{0, 1, 2, 3};
    long cases = 0;

    // Exhaustive sweep: every class assignment x trap placement (none or one
    // image) x ungraded subset of size <= 2 disjoint from the trap x answer.
    for (unsigned member_mask = 0; member_mask < 16; ++member_mask) {
        const auto in_target = [member_mask](ImageId id) {
            return (member_mask & (1u << id)) != 0;
        };
        for (unsigned trap_mask = 0; trap_mask < 16; ++trap_mask) {
            if (popcount4(trap_mask) > 1) continue;
            for (unsigned ne_mask = 0; ne_mask < 16; ++ne_mask) {
                if (popcount4(ne_mask) > 2 || (ne_mask & trap_mask) != 0) continue;
                for (unsigned pick_mask = 0; pick_mask < 16; ++pick_mask) {
                    std::vector<ImageId> ungraded, traps;
                    std::vector<bool> picks(4);
                    for (unsigned i = 0; i < 4; ++i) {
                        if (ne_mask & (1u << i)) ungraded.push_back(i);
                        if (trap_mask & (1u << i)) traps.push_back(i);
                        picks[i] = (pick_mask & (1u << i)) != 0;
                    }
                    const GradeOutcome got = grade_rule(images, in_target, ungraded, traps, picks);
                    const MaskOutcome want =
                        reference_grade(member_mask, ne_mask, trap_mask, pick_mask);
                    unsigned got_correct = 0, got_added = 0, got_removed = 0;
                    for (unsigned i = 0; i < 4; ++i)
                        if (got.per_image_correct[i]) got_correct |= 1u << i;
                    for (ImageId id : got.traps_added) got_added |= 1u << id;
                    for (ImageId id : got.traps_removed) got_removed |= 1u << id;
                    if (got.passed != want.passed || got_correct != want.correct_mask ||
                        got_added != want.added_mask || got_removed != want.removed_mask) {
                        result.passed = false;
                        std::ostringstream os;
                        os << "mismatch at member=" << member_mask << " trap=" << trap_mask
                           << " ne=" << ne_mask << " pick=" << pick_mask;
                        result.detail = os.str();
                        return result;
                    }
                    ++cases;
                }
            }
        }
    }

    // Live-server cross-check: random answers against a 4-image server,
    // verifying outcome and trap-set side effects challenge by challenge.
    ImagePool pool{6, 6};
    ServerConfig cfg;
    cfg.challenge_size = 4;
    cfg.ne_min = 0;
    cfg.ne_max = 2;
    cfg.trap_per_challenge_min = 1;
    cfg.trap_per_challenge_max = 1;
    cfg.m_per_challenge_min = 1;
    cfg.m_per_challenge_max = 3;
    cfg.rng_seed = 0x5e1fc0dedULL;
    Server server(pool, cfg);
    Rng answers(0xa75e11edULL);
    for (int i = 0; i < 700; ++i) {
        const Challenge ch = server.generate_challenge();
        std::vector<ImageId> ti_before = server.trap_set();
        AnswerVector answer;
        answer.images = ch.images;
        answer.picks.resize(4);
        unsigned member_mask = 0, ne_mask = 0, trap_mask = 0, pick_mask = 0;
        for (unsigned j = 0; j < 4; ++j) {
            const ImageId id = ch.images[j];
            answer.picks[j] = answers.bernoulli(0.5);
            if (pool.in_target(id)) member_mask |= 1u << j;
            if (ch.is_ungraded(id)) ne_mask |= 1u << j;
            if (ch.is_trap(id)) trap_mask |= 1u << j;
            if (answer.picks[j]) pick_mask |= 1u << j;
        }
        const GradeOutcome got = server.grade_answer(ch, answer);
        const MaskOutcome want = reference_grade(member_mask, ne_mask, trap_mask, pick_mask);
        // Expected trap set after the grade.
        std::vector<ImageId> expected_ti = ti_before;
        for (unsigned j = 0; j < 4; ++j) {
            const ImageId id = ch.images[j];
            if (want.removed_mask & (1u << j))
                expected_ti.erase(std::find(expected_ti.begin(), expected_ti.end(), id));
            if (want.added_mask & (1u << j)) expected_ti.push_back(id);
        }
        std::sort(expected_ti.begin(), expected_ti.end());
        if (got.passed != want.passed || server.trap_set() != expected_ti) {
            result.passed = false;
            result.detail = "live-server mismatch at challenge " + std::to_string(ch.index);
            return result;
        }
        ++cases;
    }

    result.detail = std::to_string(cases) + " cases, exact";
    return result;
}

SuiteResult check_stats_kernels() {
    SuiteResult result{"stats kernels vs reference", true, ""};
    const auto fail = [&result](const std::string& what) {
        result.passed = false;
        result.detail = what;
        return result;
    };

    // Frozen high-precision values (40-digit evaluation of the same
    // definitions).
    if (stats::binomial_pmf(0, 5, 0.0) != 1.0) return fail("pmf(0,5,0)");
    if (!close_rel(stats::binomial_pmf(5, 10, 0.5), 0.24609375, 1e-12)) return fail("pmf(5,10,0.5)");
    if (!close_rel(stats::binomial_pmf(4, 20, 0.1), 0.08977882814987170, 1e-10))
        return fail("pmf(4,20,0.1)");
    if (stats::chisq1_sf(0.0) != 1.0) return fail("sf(0)");
    if (std::abs(stats::chisq1_sf(3.841458820694124) - 0.05) > 1e-6) return fail("sf at 0.05 quantile");
    if (std::abs(stats::chisq1_sf(6.634896601021213) - 0.01) > 1e-6) return fail("sf at 0.01 quantile");

    const auto hi = stats::pearson_chi2_1dof(5, 20, 0.011);
    if (!close_rel(hi.statistic, 105.01149002665686, 1e-6)) return fail("pearson(5,20,0.011) statistic");
    if (!(hi.p_value < 1e-20)) return fail("pearson(5,20,0.011) p-value");
    const auto lo = stats::pearson_chi2_1dof(0, 20, 0.011);
    if (!close_rel(lo.statistic, 0.22244691607684530, 1e-6)) return fail("pearson(0,20,0.011) statistic");
    if (std::abs(lo.p_value - 0.63718178270028387) > 1e-6) return fail("pearson(0,20,0.011) p-value");
    const auto perfect = stats::pearson_chi2_1dof(11, 100, 0.11);
    if (perfect.statistic != 0.0 || perfect.p_value != 1.0) return fail("pearson perfect fit");

    // pmf rows must sum to 1.
    for (const double p : {0.011, 0.1, 0.5, 0.8236, 0.97}) {
        for (const std::int64_t n : {0, 1, 2, 7, 23, 101, 200}) {
            double sum = 0.0;
            for (std::int64_t k = 0; k <= n; ++k) sum += stats::binomial_pmf(k, n, p);
            if (std::abs(sum - 1.0) > 1e-9)
                return fail("pmf row sum, n=" + std::to_string(n) + " p=" + std::to_string(p));
        }
    }
    result.detail = "reference values and row sums";
    return result;
}

std::vector<SuiteResult> run_all() {
    return {check_trap_exposure_closed_form(), check_grading_rule(), check_stats_kernels()};
}

}  // namespace utsim::selfcheck
