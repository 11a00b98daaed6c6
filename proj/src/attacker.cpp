#include "utsim/attacker.hpp"

#include <algorithm>
#include <cmath>

#include "utsim/stats.hpp"

namespace utsim {

BaselineBot::BaselineBot(double per_image_accuracy, std::uint64_t seed)
    : accuracy_(per_image_accuracy), rng_(seed) {
    if (!(per_image_accuracy > 0.0 && per_image_accuracy <= 1.0))
        throw ConfigError("baseline accuracy must be in (0, 1]");
}

bool BaselineBot::classify(ImageId id, bool truly_in_target) {
    const auto it = labels_.find(id);
    if (it != labels_.end()) return it->second;
    const bool correct = rng_.bernoulli(accuracy_);
    const bool label = correct ? truly_in_target : !truly_in_target;
    labels_.emplace(id, label);
    ++assigned_;
    if (correct) ++correct_;
    return label;
}

double pr_in_challenge_given_trap(double expected_traps, std::uint32_t ti_size_estimate) {
    if (ti_size_estimate < 1) throw std::domain_error("pr_in_challenge_given_trap: estimate < 1");
    if (!(expected_traps > 0.0)) throw std::domain_error("pr_in_challenge_given_trap: expected_traps <= 0");
    if (expected_traps >= static_cast<double>(ti_size_estimate)) return 1.0;
    return expected_traps / static_cast<double>(ti_size_estimate);
}

bool chisq_trap_flag(std::uint64_t appearances, std::uint64_t trials, double p0, double alpha,
                     bool seen_in_passed_challenge, bool all_failed_since,
                     bool continuity_correction) {
    if (!seen_in_passed_challenge || !all_failed_since) return false;
    if (trials == 0) return false;
    const double observed_rate = static_cast<double>(appearances) / static_cast<double>(trials);
    if (!(observed_rate > p0)) return false;
    const auto o = static_cast<std::int64_t>(appearances);
    const auto t = static_cast<std::int64_t>(trials);
    const auto result = continuity_correction ? stats::pearson_chi2_1dof_corrected(o, t, p0)
                                              : stats::pearson_chi2_1dof(o, t, p0);
    return result.p_value < alpha;
}

void AttackerBelief::refresh_prior() {
    const double raw = static_cast<double>(ti_size_estimate) / static_cast<double>(pool_size_estimate);
    prior_trap = std::clamp(raw, 1e-6, 0.5);
}

void LearnerConfig::validate() const {
    if (!(knowledge_threshold > 0.0)) throw ConfigError("knowledge_threshold must be positive");
    if (!(ti_membership_threshold > 0.0)) throw ConfigError("ti_membership_threshold must be positive");
    if (!(chisq_alpha > 0.0 && chisq_alpha < 1.0)) throw ConfigError("chisq_alpha must be in (0, 1)");
    if (!(expected_traps_per_challenge > 0.0))
        throw ConfigError("expected_traps_per_challenge must be positive");
    if (sweep_interval == 0) throw ConfigError("sweep_interval must be positive");
}

Learner::Learner(LearnerConfig config, std::uint32_t challenge_size, std::uint32_t true_pool_size,
                 double baseline_accuracy, std::uint64_t bot_seed,
                 std::function<bool(ImageId)> in_target)
    : config_(config),
      challenge_size_(challenge_size),
      true_pool_size_(true_pool_size),
      bot_(baseline_accuracy, bot_seed),
      in_target_(std::move(in_target)) {
    config_.validate();
    belief_.expected_traps_per_challenge = config_.expected_traps_per_challenge;
    belief_.pool_size_estimate = config_.pool_knowledge == PoolKnowledge::known
                                     ? true_pool_size
                                     : 2 * challenge_size_;  // placeholder until estimable
    belief_.refresh_prior();
}

const ImageRecord* Learner::record(ImageId id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

ImageRecord& Learner::touch(ImageId id, std::uint64_t now) {
    const auto it = index_.find(id);
    if (it != index_.end()) return records_[it->second];
    index_.emplace(id, static_cast<std::uint32_t>(records_.size()));
    ImageRecord rec;
    rec.image = id;
    rec.first_seen = now;
    rec.last_seen = now;
    records_.push_back(rec);
    was_flagged_.push_back(false);
    return records_.back();
}

AnswerVector Learner::observe_and_answer(const ChallengeView& view) {
    AnswerVector answer;
    answer.images = view.images;
    answer.picks.resize(view.images.size());
    for (std::size_t i = 0; i < view.images.size(); ++i) {
        const ImageId id = view.images[i];
        ImageRecord& rec = touch(id, view.index);
        ++rec.total_appearances;
        rec.last_seen = view.index;
        if (rec.last_pass_index) ++rec.appearances_since_pass;
        answer.picks[i] =
            rec.learned_class ? *rec.learned_class : bot_.classify(id, in_target_(id));
    }
    return answer;
}

void Learner::store_posterior(ImageRecord& rec, double value) {
    const bool was = !rec.confirmed && rec.posterior >= config_.ti_membership_threshold;
    rec.posterior = value;
    const bool is = !rec.confirmed && rec.posterior >= config_.ti_membership_threshold;
    if (was && !is) --above_membership_threshold_;
    if (!was && is) ++above_membership_threshold_;
}

PosteriorParams Learner::current_params() const {
    return {pr_in_challenge_given_trap(belief_.expected_traps_per_challenge,
                                       belief_.ti_size_estimate),
            static_cast<double>(challenge_size_) / static_cast<double>(belief_.pool_size_estimate),
            belief_.prior_trap};
}

void Learner::sweep_posteriors(std::uint64_t now) {
    const PosteriorParams params = current_params();
    const bool batchable = params.p_trap > 0.0 && params.p_trap < 1.0 && params.p_nontrap > 0.0 &&
                           params.p_nontrap < 1.0;
    sweep_k_.clear();
    sweep_n_.clear();
    sweep_idx_.clear();
    for (std::uint32_t i = 0; i < records_.size(); ++i) {
        const ImageRecord& rec = records_[i];
        if (!rec.last_pass_index || rec.confirmed) continue;
        const std::uint64_t n = now - *rec.last_pass_index;
        if (n == 0) continue;
        sweep_idx_.push_back(i);
        sweep_k_.push_back(rec.appearances_since_pass);
        sweep_n_.push_back(static_cast<std::uint32_t>(n));
    }
    if (sweep_idx_.empty()) return;
    if (batchable) {
        sweep_out_.resize(sweep_idx_.size());
        kernel::posterior_batch(sweep_k_.data(), sweep_n_.data(), sweep_idx_.size(), params,
                                sweep_out_.data());
        for (std::size_t j = 0; j < sweep_idx_.size(); ++j)
            store_posterior(records_[sweep_idx_[j]], sweep_out_[j]);
    } else {
        for (std::size_t j = 0; j < sweep_idx_.size(); ++j) {
            const auto post = posterior_trap(sweep_k_[j], sweep_n_[j], params);
            if (post) store_posterior(records_[sweep_idx_[j]], *post);
        }
    }
}

DetectionReport Learner::record_outcome(const ChallengeView& view, const AnswerVector& answer,
                                        bool passed) {
    DetectionReport report;
    if (answer.images.size() != view.images.size())
        throw GradeError("answer does not match the observed challenge");

    if (passed) {
        for (std::size_t i = 0; i < view.images.size(); ++i) {
            ImageRecord& rec = records_[index_.at(view.images[i])];
            rec.last_pass_index = view.index;
            rec.answer_at_last_pass = answer.picks[i];
            rec.appearances_since_pass = 0;
            if (rec.learned_class && !rec.confirmed) {
                // The flipped answer just went through a passed challenge, so
                // the image is assumed out of the trap set and the learned
                // label is kept for good.
                if (!rec.confirmed && rec.posterior >= config_.ti_membership_threshold)
                    --above_membership_threshold_;
                rec.confirmed = true;
                ++confirmed_count_;
                report.newly_confirmed.push_back(rec.image);
            }
        }
    }

    // Detector pass over this challenge's images. On a passed challenge the
    // fresh tracker state carries no evidence (n == 0) and nothing fires.
    const PosteriorParams params = current_params();
    for (const ImageId id : view.images) {
        ImageRecord& rec = records_[index_.at(id)];
        if (!rec.last_pass_index || rec.confirmed) continue;
        const std::uint64_t n = view.index - *rec.last_pass_index;
        const std::uint32_t k = rec.appearances_since_pass;

        const auto post = posterior_trap(k, n, params);
        if (post) store_posterior(rec, *post);

        bool flagged = false;
        if (config_.detector != Detector::chisq) {
            flagged = post && *post >= config_.knowledge_threshold;
        }
        if (!flagged && config_.detector != Detector::bayes) {
            // Challenges containing the image since its last pass have all
            // failed, by the tracker's own bookkeeping: a containing pass
            // would have reset last_pass_index.
            flagged = n > 0 && chisq_trap_flag(k, n, params.p_nontrap, config_.chisq_alpha,
                                               /*seen_in_passed_challenge=*/true,
                                               /*all_failed_since=*/true,
                                               config_.chisq_continuity_correction);
        }

        if (flagged && !rec.learned_class) {
            rec.learned_class = !rec.answer_at_last_pass;
            ++flag_events_;
            if (!was_flagged_[index_.at(id)]) {
                was_flagged_[index_.at(id)] = true;
                ++ever_flagged_;
            }
            report.newly_flagged.push_back(id);
        } else if (!flagged && rec.learned_class) {
            // Unconfirmed knowledge is only as good as the current evidence;
            // withdraw the flip when the detector no longer supports it.
            rec.learned_class.reset();
            report.newly_cleared.push_back(id);
        }
    }

    if (view.index % config_.sweep_interval == 0) {
        if (config_.pool_knowledge == PoolKnowledge::estimated) {
            try {
                belief_.pool_size_estimate = std::max(1u, estimate_pool_size());
            } catch (const InsufficientDataError&) {
                // keep the previous estimate
            }
        }
        sweep_posteriors(view.index);
    }

    // Damped trap-set-size update: ceil of the mean of the previous belief
    // and the fresh estimate.
    const std::uint32_t estimate = estimate_ti_size();
    belief_.ti_size_estimate = (belief_.ti_size_estimate + estimate + 1) / 2;
    belief_.refresh_prior();
    return report;
}

std::uint32_t Learner::estimate_ti_size() const {
    return std::max(1u, above_membership_threshold_ + 1);
}

std::uint32_t Learner::estimate_pool_size() const {
    if (config_.pool_knowledge == PoolKnowledge::known) return true_pool_size_;
    if (records_.size() < 2ull * challenge_size_)
        throw InsufficientDataError("too few distinct images observed");
    std::uint64_t newest = 0;
    for (const ImageRecord& rec : records_) newest = std::max(newest, rec.last_seen);
    const std::uint64_t half = newest / 2;
    std::uint64_t first_half = 0, second_half = 0, overlap = 0;
    for (const ImageRecord& rec : records_) {
        const bool a = rec.first_seen <= half;
        const bool b = rec.last_seen > half;
        first_half += a;
        second_half += b;
        overlap += a && b;
    }
    if (overlap == 0) throw InsufficientDataError("observation halves do not overlap");
    const double estimate = static_cast<double>(first_half) * static_cast<double>(second_half) /
                            static_cast<double>(overlap);
    return static_cast<std::uint32_t>(std::llround(estimate));
}

}  // namespace utsim
