#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "utsim/posterior.hpp"
#include "utsim/rng.hpp"
#include "utsim/sim_core.hpp"

// Solver side: a baseline classifier of configurable accuracy, a per-image
// observation tracker, the Bayes and Pearson trap detectors, a trap-set-size
// estimator, and the learning solver that overrides the baseline with learned
// classifications. The only inputs that ever reach this module are the public
// challenge view and the pass/fail bit.

namespace utsim {

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Abstract classifier: per image, its fixed label is correct with probability
// `per_image_accuracy`, drawn once on first encounter and memoized. A label
// never changes afterwards, so a misclassified image stays misclassified.
class BaselineBot {
  public:
    BaselineBot(double per_image_accuracy, std::uint64_t seed);

    bool classify(ImageId id, bool truly_in_target);

    double per_image_accuracy() const { return accuracy_; }
    // Empirical accuracy of the labels assigned so far (harness metric).
    std::uint64_t labels_assigned() const { return assigned_; }
    std::uint64_t labels_correct() const { return correct_; }

  private:
    double accuracy_;
    Rng rng_;
    std::unordered_map<ImageId, bool> labels_;
    std::uint64_t assigned_ = 0;
    std::uint64_t correct_ = 0;
};

// Eq.-style closed form for the probability that a given trap image lands in
// a challenge: min(1, expected_traps / ti_size_estimate). Equals
// 1 - C(s-1, t)/C(s, t) = t/s for integer draws; returns exactly 1 once the
// expected draw covers the whole estimated trap set. Throws std::domain_error
// if ti_size_estimate < 1 or expected_traps <= 0.
double pr_in_challenge_given_trap(double expected_traps, std::uint32_t ti_size_estimate);

// Pearson-based trap flag: true iff the appearance count is chi-square
// significant (1 dof) at `alpha` against Binomial(n, p0), the observed rate
// exceeds p0 (one-sided), the image has appeared in a passed challenge, and
// every challenge containing it since then failed.
bool chisq_trap_flag(std::uint64_t appearances, std::uint64_t trials, double p0, double alpha,
                     bool seen_in_passed_challenge, bool all_failed_since,
                     bool continuity_correction = false);

// Per-image observation state.
struct ImageRecord {
    ImageId image = 0;
    std::optional<std::uint64_t> last_pass_index;  // latest passed challenge containing the image
    bool answer_at_last_pass = false;              // valid when last_pass_index is set
    std::uint32_t appearances_since_pass = 0;      // counts challenges after last_pass_index
    std::uint32_t total_appearances = 0;
    std::uint64_t first_seen = 0;
    std::uint64_t last_seen = 0;
    std::optional<bool> learned_class;
    bool confirmed = false;    // flipped answer has since appeared in a passed challenge
    double posterior = 0.0;    // last computed Pr(trap)
};

struct AttackerBelief {
    // Estimated trap-set size. Starts (and is effectively floored) at 2: the
    // update rule ceil(mean(previous, estimate)) never drops below 2, and a
    // start of 1 would force the trap-appearance model to probability 1,
    // where a single missed challenge makes every real trap look impossible.
    std::uint32_t ti_size_estimate = 2;
    std::uint32_t pool_size_estimate = 1;
    double prior_trap = 1e-3;  // ti_size_estimate / pool_size_estimate, clamped
    double expected_traps_per_challenge = 1.5;

    void refresh_prior();
};

enum class Detector { bayes, chisq, both };
enum class PoolKnowledge { known, estimated };

struct LearnerConfig {
    Detector detector = Detector::bayes;
    // Posterior level at which an image is declared a trap (symbol KTh_TI).
    // Values above 1 are unreachable and disable learning entirely.
    double knowledge_threshold = 0.9;
    // Posterior level counting an image into the trap-set-size estimate.
    double ti_membership_threshold = 0.9;
    double chisq_alpha = 0.05;
    bool chisq_continuity_correction = false;
    PoolKnowledge pool_knowledge = PoolKnowledge::known;
    double expected_traps_per_challenge = 1.5;
    std::uint32_t sweep_interval = 100;  // full posterior refresh cadence

    void validate() const;
};

struct DetectionReport {
    std::vector<ImageId> newly_flagged;    // learned_class set this challenge
    std::vector<ImageId> newly_cleared;    // unconfirmed flag withdrawn
    std::vector<ImageId> newly_confirmed;  // flipped answer seen in a passed challenge
};

class Learner {
  public:
    // `in_target` is the baseline classifier's ground-truth oracle (the stand-in
    // for looking at the actual image); the learner itself never consults it.
    Learner(LearnerConfig config, std::uint32_t challenge_size, std::uint32_t true_pool_size,
            double baseline_accuracy, std::uint64_t bot_seed,
            std::function<bool(ImageId)> in_target);

    // Registers the challenge in the tracker and answers it: learned class
    // when present, baseline label otherwise.
    AnswerVector observe_and_answer(const ChallengeView& view);

    // Feeds back the grading result, runs the configured detector over the
    // challenge's images, periodically refreshes all posteriors, and updates
    // the trap-set-size belief.
    DetectionReport record_outcome(const ChallengeView& view, const AnswerVector& answer,
                                   bool passed);

    // Count of unconfirmed images at or above ti_membership_threshold, plus
    // one (the floor keeps the estimate positive and non-degenerate).
    std::uint32_t estimate_ti_size() const;

    // Lincoln-Petersen capture-recapture over the two halves of the
    // observation history; passthrough of the true size when the pool is
    // known. Throws InsufficientDataError before enough distinct images (or
    // any overlap) exist.
    std::uint32_t estimate_pool_size() const;

    const AttackerBelief& belief() const { return belief_; }
    const LearnerConfig& config() const { return config_; }
    const BaselineBot& bot() const { return bot_; }
    const ImageRecord* record(ImageId id) const;
    std::uint64_t confirmed_count() const { return confirmed_count_; }
    std::uint64_t distinct_images_seen() const { return records_.size(); }
    std::uint64_t flags_ever() const { return flag_events_; }
    std::uint64_t distinct_images_ever_flagged() const { return ever_flagged_; }

  private:
    ImageRecord& touch(ImageId id, std::uint64_t now);
    void store_posterior(ImageRecord& rec, double value);
    void sweep_posteriors(std::uint64_t now);
    PosteriorParams current_params() const;

    LearnerConfig config_;
    std::uint32_t challenge_size_;
    std::uint32_t true_pool_size_;
    AttackerBelief belief_;
    BaselineBot bot_;
    std::function<bool(ImageId)> in_target_;

    std::unordered_map<ImageId, std::uint32_t> index_;
    std::vector<ImageRecord> records_;  // insertion-ordered
    std::uint32_t above_membership_threshold_ = 0;
    std::uint64_t confirmed_count_ = 0;
    std::uint64_t flag_events_ = 0;
    std::uint64_t ever_flagged_ = 0;
    std::vector<bool> was_flagged_;  // parallel to records_

    // Scratch for the batched sweep.
    std::vector<std::uint32_t> sweep_k_, sweep_n_;
    std::vector<std::uint32_t> sweep_idx_;
    std::vector<double> sweep_out_;
};

}  // namespace utsim
