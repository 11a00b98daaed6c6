#include "utsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace utsim {

void RunConfig::validate() const {
    if (total_challenges == 0) throw ConfigError("total_challenges must be positive");
    if (block_size == 0) throw ConfigError("block_size must be positive");
    if (total_challenges % block_size != 0)
        throw ConfigError("block_size must divide total_challenges");
    if (total_challenges >= (1ull << 31))
        throw ConfigError("total_challenges must stay below 2^31");
    if (replicates == 0) throw ConfigError("replicates must be >= 1");
    if (!(baseline_accuracy > 0.0 && baseline_accuracy <= 1.0))
        throw ConfigError("baseline_accuracy must be in (0, 1]");
    const ImagePool pool{pool_m, pool_nm};
    server.validate(pool);
    learner.validate();
}

ReplicateResult run_replicate(const RunConfig& config, std::uint32_t replicate_index,
                              const BlockCallback& on_block) {
    config.validate();
    ReplicateResult result;
    result.replicate_index = replicate_index;
    result.server_seed = derive_seed(config.master_seed, replicate_index, 0);
    result.bot_seed = derive_seed(config.master_seed, replicate_index, 1);

    const ImagePool pool{config.pool_m, config.pool_nm};
    ServerConfig server_config = config.server;
    server_config.rng_seed = result.server_seed;
    Server server(pool, server_config);
    Learner learner(config.learner, server_config.challenge_size, pool.size(),
                    config.baseline_accuracy, result.bot_seed,
                    [pool](ImageId id) { return pool.in_target(id); });

    const auto block_count = static_cast<std::uint32_t>(config.total_challenges / config.block_size);
    result.blocks.reserve(block_count);
    BlockStats block;
    block.block_index = 0;
    block.challenges = config.block_size;

    for (std::uint64_t h = 1; h <= config.total_challenges; ++h) {
        const Challenge challenge = server.generate_challenge();
        const ChallengeView view = challenge.view();
        const AnswerVector answer = learner.observe_and_answer(view);
        const GradeOutcome outcome = server.grade_answer(challenge, answer);
        const DetectionReport report = learner.record_outcome(view, answer, outcome.passed);

        if (outcome.passed) {
            ++block.successes;
            ++result.total_passes;
        }
        // Score fresh flags against ground truth the learner cannot see.
        for (const ImageId id : report.newly_flagged) {
            ++result.flag_events;
            if (server.is_current_trap(id)) {
                ++block.flags_true_positive;
                const ImageRecord* rec = learner.record(id);
                if (rec == nullptr || !rec->learned_class ||
                    *rec->learned_class != pool.in_target(id))
                    ++result.flip_violations;
            } else {
                ++block.flags_false_positive;
            }
        }

        if (h % config.block_size == 0) {
            block.success_rate =
                static_cast<double>(block.successes) / static_cast<double>(block.challenges);
            block.true_ti_size_end = static_cast<std::uint32_t>(server.trap_set().size());
            block.ti_estimate_end = learner.belief().ti_size_estimate;
            block.confirmed_cumulative = learner.confirmed_count();
            if (on_block) on_block(replicate_index, block);
            result.blocks.push_back(block);
            block = BlockStats{};
            block.block_index = result.blocks.back().block_index + 1;
            block.challenges = config.block_size;
        }
    }

    const auto assigned = learner.bot().labels_assigned();
    result.realized_label_accuracy =
        assigned == 0 ? 0.0
                      : static_cast<double>(learner.bot().labels_correct()) /
                            static_cast<double>(assigned);
    result.realized_beta = std::pow(result.realized_label_accuracy,
                                    static_cast<double>(server_config.challenge_size));
    return result;
}

std::vector<ReplicateResult> run_all(const RunConfig& config, bool parallel,
                                     const BlockCallback& on_block) {
    config.validate();
    std::vector<ReplicateResult> results(config.replicates);
    if (!parallel || config.replicates == 1) {
        for (std::uint32_t r = 0; r < config.replicates; ++r)
            results[r] = run_replicate(config, r, on_block);
        return results;
    }
    const unsigned workers =
        std::min<unsigned>(config.replicates, std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> threads;
    threads.reserve(workers);
    std::atomic<std::uint32_t> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (;;) {
                const std::uint32_t r = next.fetch_add(1);
                if (r >= config.replicates) return;
                try {
                    results[r] = run_replicate(config, r, on_block);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

std::vector<AggregateBlock> aggregate(const std::vector<ReplicateResult>& replicates) {
    if (replicates.empty()) throw ConfigError("aggregate: no replicates");
    const std::size_t blocks = replicates.front().blocks.size();
    for (const auto& rep : replicates) {
        if (rep.blocks.size() != blocks)
            throw ConfigError("aggregate: replicates disagree on block count");
    }
    std::vector<AggregateBlock> out(blocks);
    const auto n = static_cast<double>(replicates.size());
    for (std::size_t b = 0; b < blocks; ++b) {
        AggregateBlock& agg = out[b];
        agg.block_index = replicates.front().blocks[b].block_index;
        double sum = 0.0, sum_sq = 0.0;
        for (const auto& rep : replicates) {
            const double rate = rep.blocks[b].success_rate;
            sum += rate;
            sum_sq += rate * rate;
            agg.mean_true_ti_size += rep.blocks[b].true_ti_size_end;
            agg.mean_ti_estimate += rep.blocks[b].ti_estimate_end;
        }
        agg.mean_success_rate = sum / n;
        agg.stddev_success_rate = std::sqrt(std::max(0.0, sum_sq / n - agg.mean_success_rate * agg.mean_success_rate));
        agg.mean_true_ti_size /= n;
        agg.mean_ti_estimate /= n;
    }
    return out;
}

void write_csv(std::ostream& os, const std::vector<ReplicateResult>& replicates) {
    os << "replicate,block_index,challenges,successes,success_rate,true_ti_size_end,"
          "eTIs_end,flags_tp,flags_fp,confirmed_cum\n";
    char rate[32];
    for (const auto& rep : replicates) {
        for (const auto& block : rep.blocks) {
            std::snprintf(rate, sizeof(rate), "%.6f", block.success_rate);
            os << rep.replicate_index << ',' << block.block_index << ',' << block.challenges
               << ',' << block.successes << ',' << rate << ',' << block.true_ti_size_end << ','
               << block.ti_estimate_end << ',' << block.flags_true_positive << ','
               << block.flags_false_positive << ',' << block.confirmed_cumulative << '\n';
        }
    }
}

std::string csv_string(const std::vector<ReplicateResult>& replicates) {
    std::ostringstream os;
    write_csv(os, replicates);
    return os.str();
}

namespace {

const char* detector_name(Detector d) {
    switch (d) {
        case Detector::bayes: return "bayes";
        case Detector::chisq: return "chisq";
        case Detector::both: return "both";
    }
    return "bayes";
}

}  // namespace

void write_metadata(std::ostream& os, const RunConfig& config,
                    const std::vector<ReplicateResult>& replicates) {
    nlohmann::ordered_json meta;
    nlohmann::ordered_json cfg;
    cfg["total_challenges"] = config.total_challenges;
    cfg["block_size"] = config.block_size;
    cfg["replicates"] = config.replicates;
    cfg["master_seed"] = config.master_seed;
    cfg["mr"] = config.mr;
    cfg["pool_m"] = config.pool_m;
    cfg["pool_nm"] = config.pool_nm;
    cfg["baseline_accuracy"] = config.baseline_accuracy;
    cfg["challenge_size"] = config.server.challenge_size;
    cfg["ne_min"] = config.server.ne_min;
    cfg["ne_max"] = config.server.ne_max;
    cfg["trap_per_challenge_min"] = config.server.trap_per_challenge_min;
    cfg["trap_per_challenge_max"] = config.server.trap_per_challenge_max;
    cfg["m_per_challenge_min"] = config.server.m_per_challenge_min;
    cfg["m_per_challenge_max"] = config.server.m_per_challenge_max;
    cfg["detector"] = detector_name(config.learner.detector);
    cfg["knowledge_threshold"] = config.learner.knowledge_threshold;
    cfg["ti_membership_threshold"] = config.learner.ti_membership_threshold;
    cfg["chisq_alpha"] = config.learner.chisq_alpha;
    cfg["chisq_continuity_correction"] = config.learner.chisq_continuity_correction;
    cfg["pool_knowledge"] =
        config.learner.pool_knowledge == PoolKnowledge::known ? "known" : "estimated";
    cfg["expected_traps_per_challenge"] = config.learner.expected_traps_per_challenge;
    cfg["sweep_interval"] = config.learner.sweep_interval;
    meta["config"] = cfg;

    nlohmann::ordered_json reps = nlohmann::ordered_json::array();
    for (const auto& rep : replicates) {
        nlohmann::ordered_json r;
        r["replicate"] = rep.replicate_index;
        r["server_seed"] = rep.server_seed;
        r["bot_seed"] = rep.bot_seed;
        r["total_passes"] = rep.total_passes;
        r["flag_events"] = rep.flag_events;
        r["flip_violations"] = rep.flip_violations;
        r["realized_label_accuracy"] = rep.realized_label_accuracy;
        r["realized_beta"] = rep.realized_beta;
        reps.push_back(std::move(r));
    }
    meta["replicates"] = reps;
    os << meta.dump(2) << '\n';
}

double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: need two same-length series");
    const auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> rank(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
            i = j + 1;
        }
        return rank;
    };
    const std::vector<double> rx = ranks(x);
    const std::vector<double> ry = ranks(y);
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

}  // namespace utsim
