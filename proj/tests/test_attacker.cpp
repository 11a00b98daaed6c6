#include <cmath>
#include <doctest.h>

#include "utsim/attacker.hpp"
#include "utsim/selfcheck.hpp"
#include "utsim/sim_core.hpp"
#include "utsim/stats.hpp"

using namespace utsim;

namespace {

constexpr ImagePool kPool{200, 1800};

bool in_target(ImageId id) { return kPool.in_target(id); }

LearnerConfig default_learner() { return LearnerConfig{}; }

Learner make_learner(LearnerConfig cfg = default_learner(), double accuracy = 0.8236,
                     std::uint64_t seed = 1) {
    return Learner(cfg, 22, kPool.size(), accuracy, seed, &in_target);
}

ChallengeView view_of(std::uint64_t index, std::vector<ImageId> images) {
    return ChallengeView{index, std::move(images)};
}

}  // namespace

TEST_SUITE_BEGIN("attacker");

TEST_CASE("baseline bot labels") {
    SUBCASE("perfect accuracy never misclassifies") {
        BaselineBot bot(1.0, 5);
        for (ImageId id = 0; id < 500; ++id) CHECK(bot.classify(id, in_target(id)) == in_target(id));
    }
    SUBCASE("labels are memoized") {
        BaselineBot bot(0.5, 5);
        for (ImageId id = 0; id < 200; ++id) {
            const bool first = bot.classify(id, in_target(id));
            for (int again = 0; again < 3; ++again) CHECK(bot.classify(id, in_target(id)) == first);
        }
        CHECK(bot.labels_assigned() == 200);
    }
    SUBCASE("empirical accuracy tracks the configured one") {
        BaselineBot bot(0.8236, 99);
        const int n = 100000;
        int correct = 0;
        for (ImageId id = 0; id < n; ++id)
            correct += bot.classify(id, (id % 2) == 0) == ((id % 2) == 0) ? 1 : 0;
        const double acc = static_cast<double>(correct) / n;
        const double se = std::sqrt(0.8236 * (1.0 - 0.8236) / n);
        CHECK(std::abs(acc - 0.8236) <= 3.0 * se);
        // Implied full-challenge pass rate of the unmodified scheme.
        CHECK(std::pow(acc, 22.0) == doctest::Approx(0.014).epsilon(0.25));
    }
}

TEST_CASE("trap appearance probability closed form") {
    CHECK(pr_in_challenge_given_trap(1.0, 10) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(pr_in_challenge_given_trap(2.0, 10) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(pr_in_challenge_given_trap(1.5, 1) == 1.0);  // expected draw covers the whole set
    CHECK(pr_in_challenge_given_trap(3.0, 3) == 1.0);
    CHECK_THROWS_AS(pr_in_challenge_given_trap(1.5, 0), std::domain_error);
    CHECK_THROWS_AS(pr_in_challenge_given_trap(0.0, 4), std::domain_error);
    const auto suite = selfcheck::check_trap_exposure_closed_form();
    INFO(suite.detail);
    CHECK(suite.passed);
}

TEST_CASE("posterior") {
    SUBCASE("equal likelihoods return the prior") {
        const auto post = posterior_trap(3, 9, {0.2, 0.2, 0.37});
        REQUIRE(post.has_value());
        CHECK(*post == doctest::Approx(0.37).epsilon(1e-12));
    }
    SUBCASE("impossible under the trap hypothesis") {
        const auto post = posterior_trap(3, 5, {1.0, 0.022, 0.5});
        REQUIRE(post.has_value());
        CHECK(*post == 0.0);
    }
    SUBCASE("indeterminate when impossible under both hypotheses") {
        // p_trap = 1 with a miss and a degenerate non-trap probability.
        const PosteriorParams params{1.0, 1.0, 0.5};
        CHECK(!posterior_trap(3, 5, params).has_value());
    }
    SUBCASE("frozen reference scenario") {
        // Direct evaluation of the two-hypothesis form with exact pmfs.
        const auto post = posterior_trap(4, 20, {0.1, 0.022, 0.5});
        REQUIRE(post.has_value());
        CHECK(*post == doctest::Approx(0.99122184763666913).epsilon(1e-6));
    }
    SUBCASE("no evidence at n = 0") {
        const auto post = posterior_trap(0, 0, {0.1, 0.022, 0.25});
        REQUIRE(post.has_value());
        CHECK(*post == 0.25);
    }
    SUBCASE("monotone in the appearance count when p_trap > p_nontrap") {
        for (const double prior : {0.001, 0.2, 0.5}) {
            double prev = -1.0;
            for (std::uint64_t k = 0; k <= 40; ++k) {
                const auto post = posterior_trap(k, 40, {0.15, 0.011, prior});
                REQUIRE(post.has_value());
                CHECK(*post >= prev);
                prev = *post;
            }
        }
    }
}

TEST_CASE("chi-square trap flag") {
    SUBCASE("appearances at expectation do not flag") {
        CHECK(!chisq_trap_flag(0, 20, 0.011, 0.05, true, true));
        CHECK(!chisq_trap_flag(2, 200, 0.011, 0.05, true, true));  // near expectation, below
    }
    SUBCASE("strong excess flags when every containing challenge failed") {
        CHECK(chisq_trap_flag(5, 20, 0.011, 0.05, true, true));
    }
    SUBCASE("a containing passed challenge suppresses the flag") {
        CHECK(!chisq_trap_flag(5, 20, 0.011, 0.05, true, false));
    }
    SUBCASE("no passed challenge yet suppresses the flag") {
        CHECK(!chisq_trap_flag(5, 20, 0.011, 0.05, false, true));
    }
    SUBCASE("one-sided guard ignores deficits") {
        // A significant *shortfall* must not flag.
        CHECK(stats::pearson_chi2_1dof(0, 600, 0.011).p_value < 0.05);
        CHECK(!chisq_trap_flag(0, 600, 0.011, 0.05, true, true));
    }
}

TEST_CASE("observe_and_answer tracker bookkeeping") {
    Learner learner = make_learner();
    const auto view1 = view_of(1, {0, 1, 2});

    SUBCASE("first sighting initializes the record") {
        learner.observe_and_answer(view1);
        const ImageRecord* rec = learner.record(0);
        REQUIRE(rec != nullptr);
        CHECK(rec->total_appearances == 1);
        CHECK(rec->appearances_since_pass == 0);  // no passed challenge yet
        CHECK(!rec->last_pass_index.has_value());
    }

    SUBCASE("answers equal the baseline bot when nothing is learned") {
        Learner twin = make_learner();
        BaselineBot reference(0.8236, 1);
        const AnswerVector ans = twin.observe_and_answer(view1);
        for (std::size_t i = 0; i < ans.images.size(); ++i)
            CHECK(ans.picks[i] == reference.classify(ans.images[i], in_target(ans.images[i])));
    }

    SUBCASE("a passed challenge anchors the tracker") {
        const AnswerVector ans = learner.observe_and_answer(view1);
        learner.record_outcome(view1, ans, true);
        const ImageRecord* rec = learner.record(1);
        REQUIRE(rec->last_pass_index.has_value());
        CHECK(*rec->last_pass_index == 1);
        CHECK(rec->appearances_since_pass == 0);
        CHECK(rec->answer_at_last_pass == ans.picks[1]);

        const auto view2 = view_of(2, {1, 5, 6});
        const AnswerVector ans2 = learner.observe_and_answer(view2);
        learner.record_outcome(view2, ans2, false);
        CHECK(learner.record(1)->appearances_since_pass == 1);
        CHECK(*learner.record(1)->last_pass_index == 1);  // failed challenge: no update
        CHECK(!learner.record(5)->last_pass_index.has_value());
    }
}

TEST_CASE("learned classification overrides the baseline") {
    Learner learner = make_learner();
    // Anchor image 7 in a passed challenge, then present it in consecutive
    // failed challenges; the appearance streak drives the posterior past the
    // threshold and the answer flips.
    const auto view1 = view_of(1, {7, 8, 9});
    const AnswerVector ans1 = learner.observe_and_answer(view1);
    learner.record_outcome(view1, ans1, true);
    const bool original = ans1.picks[0];

    bool flipped = false;
    for (std::uint64_t h = 2; h <= 12 && !flipped; ++h) {
        const auto view = view_of(h, {7, 100 + static_cast<ImageId>(h)});
        const AnswerVector ans = learner.observe_and_answer(view);
        const DetectionReport report = learner.record_outcome(view, ans, false);
        for (const ImageId id : report.newly_flagged) flipped = flipped || id == 7;
    }
    REQUIRE(flipped);
    const ImageRecord* rec = learner.record(7);
    REQUIRE(rec->learned_class.has_value());
    CHECK(*rec->learned_class == !original);

    // The learned class drives the next answer regardless of the baseline.
    const auto view_next = view_of(13, {7});
    const AnswerVector next = learner.observe_and_answer(view_next);
    CHECK(next.picks[0] == !original);
}

TEST_CASE("confirmation keeps the learned class for good") {
    Learner learner = make_learner();
    const auto view1 = view_of(1, {7, 8});
    learner.record_outcome(view1, learner.observe_and_answer(view1), true);
    for (std::uint64_t h = 2; h <= 9; ++h) {
        const auto view = view_of(h, {7});
        learner.record_outcome(view, learner.observe_and_answer(view), false);
    }
    REQUIRE(learner.record(7)->learned_class.has_value());
    const bool learned = *learner.record(7)->learned_class;

    const auto view_pass = view_of(10, {7, 11});
    const DetectionReport report =
        learner.record_outcome(view_pass, learner.observe_and_answer(view_pass), true);
    REQUIRE(report.newly_confirmed == std::vector<ImageId>{7});
    CHECK(learner.record(7)->confirmed);
    CHECK(learner.confirmed_count() == 1);
    CHECK(*learner.record(7)->learned_class == learned);

    // Long quiet stretches no longer touch confirmed knowledge.
    const auto view_late = view_of(500, {7});
    const AnswerVector late = learner.observe_and_answer(view_late);
    CHECK(late.picks[0] == learned);
    learner.record_outcome(view_late, late, false);
    CHECK(learner.record(7)->learned_class.has_value());
}

TEST_CASE("an unconfirmed flag is withdrawn when the evidence fades") {
    Learner learner = make_learner();
    const auto view1 = view_of(1, {7, 8});
    learner.record_outcome(view1, learner.observe_and_answer(view1), true);
    for (std::uint64_t h = 2; h <= 9; ++h) {
        const auto view = view_of(h, {7});
        learner.record_outcome(view, learner.observe_and_answer(view), false);
    }
    REQUIRE(learner.record(7)->learned_class.has_value());

    // A long absence makes the streak statistically unremarkable again.
    const auto view_far = view_of(2000, {7});
    const DetectionReport report =
        learner.record_outcome(view_far, learner.observe_and_answer(view_far), false);
    CHECK(report.newly_cleared == std::vector<ImageId>{7});
    CHECK(!learner.record(7)->learned_class.has_value());
}

TEST_CASE("trap-set size estimate") {
    Learner learner = make_learner();
    SUBCASE("floor with nothing flagged") { CHECK(learner.estimate_ti_size() == 1); }
    SUBCASE("count plus one") {
        // Drive three images above the membership threshold.
        const auto view1 = view_of(1, {1, 2, 3, 4});
        learner.record_outcome(view1, learner.observe_and_answer(view1), true);
        for (std::uint64_t h = 2; h <= 12; ++h) {
            const auto view = view_of(h, {1, 2, 3});
            learner.record_outcome(view, learner.observe_and_answer(view), false);
        }
        CHECK(learner.estimate_ti_size() == 4);
        // The belief is damped toward the estimate and floored at 2.
        CHECK(learner.belief().ti_size_estimate >= 2);
    }
}

TEST_CASE("pool size estimation") {
    SUBCASE("known pool is a passthrough") {
        Learner learner = make_learner();
        CHECK(learner.estimate_pool_size() == 2000);
    }
    SUBCASE("insufficient data") {
        LearnerConfig cfg;
        cfg.pool_knowledge = PoolKnowledge::estimated;
        Learner learner = make_learner(cfg);
        const auto view = view_of(1, {1, 2, 3});
        learner.record_outcome(view, learner.observe_and_answer(view), false);
        CHECK_THROWS_AS(learner.estimate_pool_size(), InsufficientDataError);
    }
    SUBCASE("capture-recapture formula on crafted halves") {
        LearnerConfig cfg;
        cfg.pool_knowledge = PoolKnowledge::estimated;
        Learner learner = make_learner(cfg);
        // First half: images 0..59 in challenges 1..2; second half: 40..99
        // in challenges 3..4. s1 = 60, s2 = 60, overlap = 20 -> 180.
        std::vector<ImageId> a(30), b(30), c(30), d(30);
        for (ImageId i = 0; i < 30; ++i) {
            a[i] = i;
            b[i] = 30 + i;
            c[i] = 40 + i;
            d[i] = 70 + i;
        }
        for (std::uint64_t h = 1; h <= 4; ++h) {
            const std::vector<ImageId>& imgs = h == 1 ? a : h == 2 ? b : h == 3 ? c : d;
            const auto view = view_of(h, imgs);
            learner.record_outcome(view, learner.observe_and_answer(view), false);
        }
        CHECK(learner.estimate_pool_size() == 180);
    }
}

TEST_CASE("learning disabled reduces to the baseline bot") {
    LearnerConfig cfg;
    cfg.knowledge_threshold = 1.5;  // unreachable
    Learner learner = make_learner(cfg, 0.8236, 77);
    BaselineBot reference(0.8236, 77);
    Rng stream(31);
    for (std::uint64_t h = 1; h <= 2000; ++h) {
        std::vector<ImageId> images;
        while (images.size() < 22) {
            const auto id = static_cast<ImageId>(stream.below(2000));
            bool dup = false;
            for (const ImageId other : images) dup = dup || other == id;
            if (!dup) images.push_back(id);
        }
        const auto view = view_of(h, images);
        const AnswerVector ans = learner.observe_and_answer(view);
        for (std::size_t i = 0; i < ans.images.size(); ++i)
            REQUIRE(ans.picks[i] ==
                    reference.classify(ans.images[i], in_target(ans.images[i])));
        learner.record_outcome(view, ans, stream.bernoulli(0.05));
    }
    CHECK(learner.flags_ever() == 0);
}

TEST_SUITE_END();
