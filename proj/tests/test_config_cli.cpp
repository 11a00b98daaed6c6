#include <doctest.h>

#include "utsim/config_io.hpp"

using namespace utsim;

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults survive an empty config") {
    const LoadedConfig loaded = parse_config_json("{}");
    CHECK(loaded.run.total_challenges == 70000);
    CHECK(loaded.run.block_size == 5000);
    CHECK(loaded.run.replicates == 5);
    CHECK(loaded.run.pool_m == 200);
    CHECK(loaded.run.pool_nm == 1800);
    CHECK(loaded.run.baseline_accuracy == doctest::Approx(0.8236));
    CHECK(loaded.run.server.challenge_size == 22);
    CHECK(loaded.run.server.ne_max == 8);
    CHECK(loaded.run.learner.detector == Detector::bayes);
    CHECK(loaded.run.learner.knowledge_threshold == doctest::Approx(0.9));
    CHECK(!loaded.sweep.has_value());
}

TEST_CASE("file keys are applied") {
    const LoadedConfig loaded = parse_config_json(R"({
        "total_challenges": 1000,
        "block_size": 500,
        "detector": "chisq",
        "pool_knowledge": "estimated",
        "baseline_accuracy": 0.9,
        "mr": 7
    })");
    CHECK(loaded.run.total_challenges == 1000);
    CHECK(loaded.run.block_size == 500);
    CHECK(loaded.run.learner.detector == Detector::chisq);
    CHECK(loaded.run.learner.pool_knowledge == PoolKnowledge::estimated);
    CHECK(loaded.run.baseline_accuracy == doctest::Approx(0.9));
    CHECK(loaded.run.mr == 7);
}

TEST_CASE("overrides apply last-wins") {
    LoadedConfig loaded = parse_config_json(R"({"total_challenges": 1000})");
    apply_override(loaded.run, "total_challenges", "2000");
    apply_override(loaded.run, "total_challenges", "3000");
    CHECK(loaded.run.total_challenges == 3000);
}

TEST_CASE("unknown keys and bad values are config errors") {
    RunConfig config;
    CHECK_THROWS_AS(apply_override(config, "no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(apply_override(config, "total_challenges", "soon"), ConfigError);
    CHECK_THROWS_AS(apply_override(config, "baseline_accuracy", "often"), ConfigError);
    CHECK_THROWS_AS(apply_override(config, "detector", "psychic"), ConfigError);
    CHECK_THROWS_AS(parse_config_json("not json"), ConfigError);
    CHECK_THROWS_AS(parse_config_json("[1,2]"), ConfigError);
}

TEST_CASE("sweep axis detection") {
    SUBCASE("one list-valued key") {
        const LoadedConfig loaded =
            parse_config_json(R"({"baseline_accuracy": [0.80, 0.8236, 0.85]})");
        REQUIRE(loaded.sweep.has_value());
        CHECK(loaded.sweep->key == "baseline_accuracy");
        REQUIRE(loaded.sweep->values.size() == 3);
        CHECK(loaded.sweep->values[0] == "0.8");
    }
    SUBCASE("string-valued axes keep their spelling") {
        const LoadedConfig loaded = parse_config_json(R"({"detector": ["bayes", "chisq"]})");
        REQUIRE(loaded.sweep.has_value());
        CHECK(loaded.sweep->values == std::vector<std::string>{"bayes", "chisq"});
    }
    SUBCASE("two axes are rejected") {
        CHECK_THROWS_AS(parse_config_json(R"({"ne_max": [1, 2], "pool_m": [10, 20]})"),
                        ConfigError);
    }
    SUBCASE("an empty axis is rejected") {
        CHECK_THROWS_AS(parse_config_json(R"({"detector": []})"), ConfigError);
    }
}

TEST_SUITE_END();
