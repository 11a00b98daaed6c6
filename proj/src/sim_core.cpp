#include "utsim/sim_core.hpp"

#include <algorithm>
#include <cassert>
#include <string>

namespace utsim {

namespace {

bool sorted_contains(const std::vector<ImageId>& v, ImageId id) {
    return std::binary_search(v.begin(), v.end(), id);
}

}  // namespace

void ServerConfig::validate(const ImagePool& pool) const {
    if (challenge_size == 0) throw ConfigError("challenge_size must be positive");
    if (!(ne_min <= ne_max && ne_max < challenge_size))
        throw ConfigError("require ne_min <= ne_max < challenge_size");
    if (trap_per_challenge_min > trap_per_challenge_max)
        throw ConfigError("require trap_per_challenge_min <= trap_per_challenge_max");
    if (trap_per_challenge_max > challenge_size - ne_max)
        throw ConfigError("a challenge cannot hold the trap and ungraded sets disjointly");
    if (m_per_challenge_min > m_per_challenge_max)
        throw ConfigError("require m_per_challenge_min <= m_per_challenge_max");
    if (m_per_challenge_max > challenge_size)
        throw ConfigError("m_per_challenge_max exceeds challenge_size");
    if (pool.m_size < m_per_challenge_max)
        throw ConfigError("target class smaller than m_per_challenge_max");
    if (pool.size() < challenge_size)
        throw ConfigError("image pool smaller than one challenge");
}

bool Challenge::is_ungraded(ImageId id) const { return sorted_contains(ungraded, id); }
bool Challenge::is_trap(ImageId id) const { return sorted_contains(traps, id); }

bool AnswerVector::pick_for(ImageId id) const {
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i] == id) return picks[i];
    }
    throw GradeError("answer has no entry for image " + std::to_string(id));
}

GradeOutcome grade_rule(const std::vector<ImageId>& images,
                        const std::function<bool(ImageId)>& in_target,
                        const std::vector<ImageId>& ungraded,
                        const std::vector<ImageId>& traps,
                        const std::vector<bool>& picks) {
    assert(images.size() == picks.size());
    GradeOutcome out;
    out.per_image_correct.resize(images.size());
    out.passed = true;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const bool correct = picks[i] == in_target(images[i]);
        out.per_image_correct[i] = correct;
        if (!correct && !sorted_contains(ungraded, images[i])) out.passed = false;
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        const ImageId id = images[i];
        if (out.passed && !out.per_image_correct[i] && sorted_contains(ungraded, id))
            out.traps_added.push_back(id);
        if (out.per_image_correct[i] && sorted_contains(traps, id))
            out.traps_removed.push_back(id);
    }
    std::sort(out.traps_added.begin(), out.traps_added.end());
    std::sort(out.traps_removed.begin(), out.traps_removed.end());
    return out;
}

Server::Server(ImagePool pool, ServerConfig config)
    : pool_(pool), config_(config), rng_(config.rng_seed), picked_stamp_(pool.size(), 0) {
    config_.validate(pool_);
}

bool Server::in_trap_set(ImageId id) const { return sorted_contains(trap_set_, id); }

bool Server::is_current_trap(ImageId id) const { return in_trap_set(id); }

void Server::set_trap_set_for_test(std::vector<ImageId> traps) {
    std::sort(traps.begin(), traps.end());
    traps.erase(std::unique(traps.begin(), traps.end()), traps.end());
    for (ImageId id : traps) {
        if (id >= pool_.size()) throw ConfigError("trap id outside the image pool");
    }
    trap_set_ = std::move(traps);
}

// Rejection-samples `count` distinct ids from [lo, hi) that are neither in
// the trap set nor already picked this challenge. The trap set stays tiny
// relative to the pool, so rejection terminates fast.
void Server::sample_class(std::uint32_t count, ImageId lo, ImageId hi, std::vector<ImageId>& out) {
    const std::uint64_t range = hi - lo;
    for (std::uint32_t taken = 0; taken < count;) {
        const ImageId id = lo + static_cast<ImageId>(rng_.below(range));
        if (picked_stamp_[id] == stamp_ || in_trap_set(id)) continue;
        picked_stamp_[id] = stamp_;
        out.push_back(id);
        ++taken;
    }
}

Challenge Server::generate_challenge() {
    ++stamp_;
    Challenge ch;
    ch.index = ++counter_;

    // 1. Trap slots.
    std::uint32_t trap_count = 0;
    if (!trap_set_.empty() && config_.trap_per_challenge_max > 0) {
        const auto draw = static_cast<std::uint32_t>(
            rng_.uniform_int(config_.trap_per_challenge_min, config_.trap_per_challenge_max));
        trap_count = std::min<std::uint32_t>(draw, static_cast<std::uint32_t>(trap_set_.size()));
        // Partial Fisher-Yates over trap-set positions.
        std::vector<std::uint32_t> pos(trap_set_.size());
        for (std::uint32_t i = 0; i < pos.size(); ++i) pos[i] = i;
        for (std::uint32_t i = 0; i < trap_count; ++i) {
            const auto j = i + static_cast<std::uint32_t>(rng_.below(pos.size() - i));
            std::swap(pos[i], pos[j]);
            ch.traps.push_back(trap_set_[pos[i]]);
        }
        std::sort(ch.traps.begin(), ch.traps.end());
        for (ImageId id : ch.traps) picked_stamp_[id] = stamp_;
    }

    // 2./3. Fill the remaining slots from the pool minus the trap set.
    const std::uint32_t slots = config_.challenge_size - trap_count;
    std::uint32_t trap_in_m = 0;
    for (ImageId id : trap_set_)
        if (pool_.in_target(id)) ++trap_in_m;
    const std::uint32_t avail_m = pool_.m_size - trap_in_m;
    const std::uint32_t avail_nm =
        pool_.nm_size - (static_cast<std::uint32_t>(trap_set_.size()) - trap_in_m);

    auto m_count = static_cast<std::uint32_t>(
        rng_.uniform_int(config_.m_per_challenge_min, config_.m_per_challenge_max));
    m_count = std::min({m_count, avail_m, slots});
    if (slots - m_count > avail_nm) {
        if (slots - avail_nm > avail_m)
            throw ConfigError("image pool exhausted by the trap set");
        m_count = slots - avail_nm;
    }

    ch.images = ch.traps;  // shuffled below
    sample_class(m_count, 0, pool_.m_size, ch.images);
    sample_class(slots - m_count, pool_.m_size, pool_.size(), ch.images);

    // 4. Shuffle so position reveals nothing.
    for (std::size_t i = ch.images.size(); i > 1; --i) {
        const std::size_t j = rng_.below(i);
        std::swap(ch.images[i - 1], ch.images[j]);
    }

    // 5. Ungraded subset, drawn from the non-trap images only: presented
    // traps are always graded.
    const auto ne_count =
        static_cast<std::uint32_t>(rng_.uniform_int(config_.ne_min, config_.ne_max));
    if (ne_count > 0) {
        std::vector<ImageId> non_trap;
        non_trap.reserve(slots);
        for (ImageId id : ch.images)
            if (!ch.is_trap(id)) non_trap.push_back(id);
        for (std::uint32_t i = 0; i < ne_count; ++i) {
            const auto j = i + static_cast<std::uint32_t>(rng_.below(non_trap.size() - i));
            std::swap(non_trap[i], non_trap[j]);
            ch.ungraded.push_back(non_trap[i]);
        }
        std::sort(ch.ungraded.begin(), ch.ungraded.end());
    }
    return ch;
}

GradeOutcome Server::grade_answer(const Challenge& challenge, const AnswerVector& answer) {
    if (challenge.index == 0 || challenge.index > counter_)
        throw GradeError("challenge was not produced by this server");
    if (challenge.index <= graded_through_)
        throw GradeError("challenge " + std::to_string(challenge.index) + " already graded");
    if (answer.images != challenge.images || answer.picks.size() != answer.images.size())
        throw GradeError("answer domain does not match the challenge");
    graded_through_ = challenge.index;

    GradeOutcome out = grade_rule(
        challenge.images, [this](ImageId id) { return pool_.in_target(id); },
        challenge.ungraded, challenge.traps, answer.picks);

    // Apply trap-set side effects. Insertion of an id already present cannot
    // occur (non-trap slots are drawn outside TI), but stays a no-op anyway.
    for (ImageId id : out.traps_removed) {
        const auto it = std::lower_bound(trap_set_.begin(), trap_set_.end(), id);
        if (it != trap_set_.end() && *it == id) trap_set_.erase(it);
    }
    for (ImageId id : out.traps_added) {
        const auto it = std::lower_bound(trap_set_.begin(), trap_set_.end(), id);
        if (it == trap_set_.end() || *it != id) trap_set_.insert(it, id);
    }
    return out;
}

}  // namespace utsim
