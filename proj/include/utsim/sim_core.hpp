#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "utsim/rng.hpp"

// Server side of the simulated challenge/response protocol: an image pool
// split into a target and a non-target class, challenge generation with a
// random ungraded subset and injected trap images, grading, and trap-set
// maintenance.

namespace utsim {

using ImageId = std::uint32_t;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GradeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ground-truth universe of labeled image identities. Ids are dense and stable:
// [0, m_size) is the target class, [m_size, m_size + nm_size) the non-target
// class.
struct ImagePool {
    std::uint32_t m_size = 200;
    std::uint32_t nm_size = 1800;

    std::uint32_t size() const { return m_size + nm_size; }
    bool in_target(ImageId id) const { return id < m_size; }
};

struct ServerConfig {
    std::uint32_t challenge_size = 22;
    std::uint32_t ne_min = 0;  // bounds of the per-challenge ungraded subset
    std::uint32_t ne_max = 8;
    std::uint32_t trap_per_challenge_min = 1;  // 0/0 disables trap injection
    std::uint32_t trap_per_challenge_max = 2;
    std::uint32_t m_per_challenge_min = 4;  // target-class images per challenge
    std::uint32_t m_per_challenge_max = 8;
    std::uint64_t rng_seed = 0;

    // Throws ConfigError when the invariants cannot hold jointly with `pool`.
    void validate(const ImagePool& pool) const;
};

// What the solver is allowed to see: the challenge number and the ordered
// image list, nothing else. Keep this type free of grading secrets.
struct ChallengeView {
    std::uint64_t index = 0;  // 1-based challenge counter
    std::vector<ImageId> images;
};

struct Challenge {
    std::uint64_t index = 0;
    std::vector<ImageId> images;    // ordered, no duplicates
    std::vector<ImageId> ungraded;  // server secret (symbol NE); sorted
    std::vector<ImageId> traps;     // server secret; sorted; disjoint from ungraded

    ChallengeView view() const { return {index, images}; }
    bool is_ungraded(ImageId id) const;
    bool is_trap(ImageId id) const;
};

// picks[i] answers images[i]: true = "this image is in the target class".
struct AnswerVector {
    std::vector<ImageId> images;
    std::vector<bool> picks;

    bool pick_for(ImageId id) const;
};

struct GradeOutcome {
    bool passed = false;
    // Server-internal; surfaced to the harness for metrics, never to the
    // solver. Ordered as the challenge's image list.
    std::vector<bool> per_image_correct;
    std::vector<ImageId> traps_added;
    std::vector<ImageId> traps_removed;
};

// The grading rule as a pure function, shared by Server::grade_answer and
// exercised directly by the exhaustive small-challenge tests.
//
//   correct(x)    = pick(x) == in_target(x)
//   passed        = all images outside `ungraded` are correct
//   traps_added   = misclassified ungraded images, only when passed
//   traps_removed = correctly answered presented traps, passed or not
GradeOutcome grade_rule(const std::vector<ImageId>& images,
                        const std::function<bool(ImageId)>& in_target,
                        const std::vector<ImageId>& ungraded,
                        const std::vector<ImageId>& traps,
                        const std::vector<bool>& picks);

class Server {
  public:
    // Throws ConfigError if pool/config invariants cannot hold.
    Server(ImagePool pool, ServerConfig config);

    // Draw order per challenge (fixed so transcripts replay exactly):
    //   1. trap count in [trap_min, trap_max], clamped to |TI| (skipped
    //      entirely while TI is empty), then the trap sample from TI
    //   2. target-class count in [m_min, m_max] (clamped to availability),
    //      then the target-class sample from M \ TI
    //   3. the non-target sample from MN \ TI
    //   4. a full shuffle of the image list
    //   5. ungraded-set size in [ne_min, ne_max], then the ungraded sample
    //      from the non-trap images
    Challenge generate_challenge();

    // Grades a challenge generated by this server and applies trap-set
    // updates. Throws GradeError on a repeated grade or a mismatched answer
    // domain.
    GradeOutcome grade_answer(const Challenge& challenge, const AnswerVector& answer);

    const ImagePool& pool() const { return pool_; }
    const ServerConfig& config() const { return config_; }
    std::uint64_t challenge_counter() const { return counter_; }

    // Ground-truth access for the harness and tests only.
    const std::vector<ImageId>& trap_set() const { return trap_set_; }
    bool is_current_trap(ImageId id) const;
    void set_trap_set_for_test(std::vector<ImageId> traps);

  private:
    void sample_class(std::uint32_t count, ImageId lo, ImageId hi, std::vector<ImageId>& out);
    bool in_trap_set(ImageId id) const;

    ImagePool pool_;
    ServerConfig config_;
    std::vector<ImageId> trap_set_;  // sorted (symbol TI)
    std::uint64_t counter_ = 0;
    std::uint64_t graded_through_ = 0;
    Rng rng_;
    // Per-challenge duplicate-rejection scratch, stamped to avoid clearing.
    std::vector<std::uint64_t> picked_stamp_;
    std::uint64_t stamp_ = 0;
};

}  // namespace utsim
