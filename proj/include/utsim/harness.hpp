#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "utsim/attacker.hpp"
#include "utsim/sim_core.hpp"

// Experiment driver: runs server and learner against each other for a fixed
// number of challenges, aggregates per-block statistics, and scores the
// detector against server ground truth (which only this layer may see).

namespace utsim {

struct BlockStats {
    std::uint32_t block_index = 0;
    std::uint32_t challenges = 0;
    std::uint32_t successes = 0;
    double success_rate = 0.0;
    std::uint32_t true_ti_size_end = 0;   // server trap-set size at block end
    std::uint32_t ti_estimate_end = 0;    // learner's estimate at block end
    std::uint32_t flags_true_positive = 0;
    std::uint32_t flags_false_positive = 0;
    std::uint64_t confirmed_cumulative = 0;
};

struct RunConfig {
    std::uint64_t total_challenges = 70000;
    std::uint32_t block_size = 5000;
    std::uint32_t replicates = 5;
    std::uint64_t master_seed = 42;
    // Recorded in output metadata, wired to nothing.
    std::int64_t mr = 5;
    std::uint32_t pool_m = 200;
    std::uint32_t pool_nm = 1800;
    double baseline_accuracy = 0.8236;
    ServerConfig server;    // rng_seed is derived per replicate and ignored here
    LearnerConfig learner;

    void validate() const;  // throws ConfigError
};

struct ReplicateResult {
    std::uint32_t replicate_index = 0;
    std::vector<BlockStats> blocks;
    std::uint64_t total_passes = 0;
    std::uint64_t flag_events = 0;
    // Flags on true trap-set members whose learned class contradicts the
    // image's real class. The learning rule makes this impossible, so any
    // nonzero count marks a defect.
    std::uint64_t flip_violations = 0;
    double realized_label_accuracy = 0.0;  // measured over the baseline label table
    double realized_beta = 0.0;            // label accuracy ^ challenge_size
    std::uint64_t server_seed = 0;
    std::uint64_t bot_seed = 0;
};

struct AggregateBlock {
    std::uint32_t block_index = 0;
    double mean_success_rate = 0.0;
    double stddev_success_rate = 0.0;
    double mean_true_ti_size = 0.0;
    double mean_ti_estimate = 0.0;
};

using BlockCallback = std::function<void(std::uint32_t replicate, const BlockStats&)>;

// Runs one replicate; seeds are derived from (master_seed, replicate_index)
// so adding replicates never perturbs existing ones.
ReplicateResult run_replicate(const RunConfig& config, std::uint32_t replicate_index,
                              const BlockCallback& on_block = nullptr);

// All replicates, optionally in parallel (each replicate owns its state).
// Results are ordered by replicate index either way.
std::vector<ReplicateResult> run_all(const RunConfig& config, bool parallel = true,
                                     const BlockCallback& on_block = nullptr);

// Element-wise mean/stddev across replicates (population stddev). Throws
// ConfigError when block counts disagree.
std::vector<AggregateBlock> aggregate(const std::vector<ReplicateResult>& replicates);

// CSV: one row per (replicate, block), fixed header, '\n' endings, 6
// fractional digits on rates.
void write_csv(std::ostream& os, const std::vector<ReplicateResult>& replicates);
std::string csv_string(const std::vector<ReplicateResult>& replicates);

// JSON sidecar with the fully resolved config, derived seeds, and realized
// per-replicate metrics.
void write_metadata(std::ostream& os, const RunConfig& config,
                    const std::vector<ReplicateResult>& replicates);

// Spearman rank correlation with average ranks on ties.
double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace utsim
