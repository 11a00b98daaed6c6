#include "utsim/config_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace utsim {

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    return out;
}

std::uint32_t parse_u32(const std::string& key, const std::string& value) {
    const std::uint64_t v = parse_u64(key, value);
    if (v > 0xffffffffULL) throw ConfigError(key + ": value out of range");
    return static_cast<std::uint32_t>(v);
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    return out;
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

Detector parse_detector(const std::string& value) {
    if (value == "bayes") return Detector::bayes;
    if (value == "chisq") return Detector::chisq;
    if (value == "both") return Detector::both;
    throw ConfigError("detector: expected bayes|chisq|both, got '" + value + "'");
}

PoolKnowledge parse_pool_knowledge(const std::string& value) {
    if (value == "known") return PoolKnowledge::known;
    if (value == "estimated") return PoolKnowledge::estimated;
    throw ConfigError("pool_knowledge: expected known|estimated, got '" + value + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "total_challenges", "block_size", "replicates", "master_seed", "mr",
        "pool_m", "pool_nm", "baseline_accuracy",
        "challenge_size", "ne_min", "ne_max",
        "trap_per_challenge_min", "trap_per_challenge_max",
        "m_per_challenge_min", "m_per_challenge_max",
        "detector", "knowledge_threshold", "ti_membership_threshold",
        "chisq_alpha", "chisq_continuity_correction", "pool_knowledge",
        "expected_traps_per_challenge", "sweep_interval",
    };
    return keys;
}

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "total_challenges") c.total_challenges = parse_u64(key, value);
    else if (key == "block_size") c.block_size = parse_u32(key, value);
    else if (key == "replicates") c.replicates = parse_u32(key, value);
    else if (key == "master_seed") c.master_seed = parse_u64(key, value);
    else if (key == "mr") c.mr = parse_i64(key, value);
    else if (key == "pool_m") c.pool_m = parse_u32(key, value);
    else if (key == "pool_nm") c.pool_nm = parse_u32(key, value);
    else if (key == "baseline_accuracy") c.baseline_accuracy = parse_f64(key, value);
    else if (key == "challenge_size") c.server.challenge_size = parse_u32(key, value);
    else if (key == "ne_min") c.server.ne_min = parse_u32(key, value);
    else if (key == "ne_max") c.server.ne_max = parse_u32(key, value);
    else if (key == "trap_per_challenge_min") c.server.trap_per_challenge_min = parse_u32(key, value);
    else if (key == "trap_per_challenge_max") c.server.trap_per_challenge_max = parse_u32(key, value);
    else if (key == "m_per_challenge_min") c.server.m_per_challenge_min = parse_u32(key, value);
    else if (key == "m_per_challenge_max") c.server.m_per_challenge_max = parse_u32(key, value);
    else if (key == "detector") c.learner.detector = parse_detector(value);
    else if (key == "knowledge_threshold") c.learner.knowledge_threshold = parse_f64(key, value);
    else if (key == "ti_membership_threshold") c.learner.ti_membership_threshold = parse_f64(key, value);
    else if (key == "chisq_alpha") c.learner.chisq_alpha = parse_f64(key, value);
    else if (key == "chisq_continuity_correction")
        c.learner.chisq_continuity_correction = parse_bool(key, value);
    else if (key == "pool_knowledge") c.learner.pool_knowledge = parse_pool_knowledge(value);
    else if (key == "expected_traps_per_challenge")
        c.learner.expected_traps_per_challenge = parse_f64(key, value);
    else if (key == "sweep_interval") c.learner.sweep_interval = parse_u32(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
}

LoadedConfig parse_config_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

    LoadedConfig loaded;
    for (const auto& [key, value] : doc.items()) {
        if (value.is_array()) {
            if (loaded.sweep)
                throw ConfigError("more than one sweep axis declared ('" + loaded.sweep->key +
                                  "' and '" + key + "')");
            SweepAxis axis;
            axis.key = key;
            for (const auto& item : value) {
                axis.values.push_back(item.is_string() ? item.get<std::string>() : item.dump());
            }
            loaded.sweep = std::move(axis);
            continue;
        }
        const std::string text_value =
            value.is_string() ? value.get<std::string>() : value.dump();
        apply_override(loaded.run, key, text_value);
    }
    // Surface unknown sweep keys immediately rather than at run time.
    if (loaded.sweep) {
        RunConfig probe = loaded.run;
        if (!loaded.sweep->values.empty())
            apply_override(probe, loaded.sweep->key, loaded.sweep->values.front());
        else
            throw ConfigError("sweep axis '" + loaded.sweep->key + "' has an empty value list");
    }
    return loaded;
}

LoadedConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_json(buffer.str());
}

}  // namespace utsim
