// Command-line front end: `run` executes a configured experiment and writes
// results.csv + metadata.json, `sweep` repeats it over one config axis,
// `selftest` runs the embedded verification suites.
//
// Exit codes: 0 success, 1 runtime or selftest failure, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "utsim/config_io.hpp"
#include "utsim/harness.hpp"
#include "utsim/selfcheck.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value, applied in order
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::uint32_t> replicates;
    bool quiet = false;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file (flat keys)");
    cmd->add_option("--set", opts.overrides, "KEY=VALUE override, repeatable, last wins");
    cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", opts.seed, "master seed (overrides config)");
    cmd->add_option("--replicates", opts.replicates, "replicate count (overrides config)");
    cmd->add_flag("--quiet", opts.quiet, "suppress per-block progress output");
}

// Resolution order: defaults, config file, --set in order, then the named
// flags (--seed/--replicates) last.
utsim::LoadedConfig resolve_config(const CommonOpts& opts) {
    utsim::LoadedConfig loaded;
    if (!opts.config_path.empty()) loaded = utsim::load_config_file(opts.config_path);
    for (const std::string& item : opts.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw utsim::ConfigError("--set expects KEY=VALUE, got '" + item + "'");
        utsim::apply_override(loaded.run, item.substr(0, eq), item.substr(eq + 1));
    }
    if (opts.seed) loaded.run.master_seed = *opts.seed;
    if (opts.replicates) loaded.run.replicates = *opts.replicates;
    return loaded;
}

utsim::BlockCallback progress_printer(bool quiet, std::uint32_t blocks_per_replicate) {
    if (quiet) return nullptr;
    return [blocks_per_replicate](std::uint32_t replicate, const utsim::BlockStats& block) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "replicate %u block %u/%u success_rate %.4f ti %u eTIs %u confirmed %llu",
                      replicate, block.block_index + 1, blocks_per_replicate, block.success_rate,
                      block.true_ti_size_end, block.ti_estimate_end,
                      static_cast<unsigned long long>(block.confirmed_cumulative));
        std::printf("%s\n", line);
    };
}

void write_outputs(const fs::path& dir, const utsim::RunConfig& config,
                   const std::vector<utsim::ReplicateResult>& results) {
    fs::create_directories(dir);
    {
        std::ofstream csv(dir / "results.csv", std::ios::binary);
        if (!csv) throw std::runtime_error("cannot write " + (dir / "results.csv").string());
        utsim::write_csv(csv, results);
    }
    {
        std::ofstream meta(dir / "metadata.json", std::ios::binary);
        if (!meta) throw std::runtime_error("cannot write " + (dir / "metadata.json").string());
        utsim::write_metadata(meta, config, results);
    }
}

int cmd_run(const CommonOpts& opts) {
    const utsim::LoadedConfig loaded = resolve_config(opts);
    if (loaded.sweep)
        throw utsim::ConfigError("config declares a sweep axis ('" + loaded.sweep->key +
                                 "'); use the sweep subcommand");
    loaded.run.validate();
    const auto blocks =
        static_cast<std::uint32_t>(loaded.run.total_challenges / loaded.run.block_size);
    const auto results =
        utsim::run_all(loaded.run, /*parallel=*/true, progress_printer(opts.quiet, blocks));
    write_outputs(opts.out_dir, loaded.run, results);
    if (!opts.quiet) {
        const auto agg = utsim::aggregate(results);
        std::printf("final block mean success_rate %.6f (stddev %.6f) over %u replicates\n",
                    agg.back().mean_success_rate, agg.back().stddev_success_rate,
                    loaded.run.replicates);
    }
    return kExitOk;
}

int cmd_sweep(const CommonOpts& opts) {
    const utsim::LoadedConfig loaded = resolve_config(opts);
    if (!loaded.sweep)
        throw utsim::ConfigError("sweep requires a config with exactly one list-valued key");
    if (loaded.sweep->values.empty())
        throw utsim::ConfigError("sweep axis '" + loaded.sweep->key + "' has no values");

    const fs::path base(opts.out_dir);
    fs::create_directories(base);
    std::ofstream summary(base / "sweep_summary.csv", std::ios::binary);
    if (!summary) throw std::runtime_error("cannot write sweep_summary.csv");
    summary << "key,value,final_block_mean_success_rate,final_block_stddev,"
               "mean_realized_beta\n";

    for (const std::string& value : loaded.sweep->values) {
        utsim::RunConfig config = loaded.run;
        utsim::apply_override(config, loaded.sweep->key, value);
        config.validate();
        const auto blocks =
            static_cast<std::uint32_t>(config.total_challenges / config.block_size);
        if (!opts.quiet) std::printf("== %s = %s ==\n", loaded.sweep->key.c_str(), value.c_str());
        const auto results =
            utsim::run_all(config, /*parallel=*/true, progress_printer(opts.quiet, blocks));
        write_outputs(base / (loaded.sweep->key + "=" + value), config, results);

        const auto agg = utsim::aggregate(results);
        double beta = 0.0;
        for (const auto& rep : results) beta += rep.realized_beta;
        beta /= static_cast<double>(results.size());
        char row[256];
        std::snprintf(row, sizeof(row), "%s,%s,%.6f,%.6f,%.6f\n", loaded.sweep->key.c_str(),
                      value.c_str(), agg.back().mean_success_rate,
                      agg.back().stddev_success_rate, beta);
        summary << row;
    }
    return kExitOk;
}

int cmd_selftest(bool quiet) {
    bool all_passed = true;
    for (const auto& suite : utsim::selfcheck::run_all()) {
        all_passed = all_passed && suite.passed;
        if (!quiet || !suite.passed)
            std::printf("[%s] %s: %s\n", suite.passed ? "PASS" : "FAIL", suite.name.c_str(),
                        suite.detail.c_str());
    }
    return all_passed ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator of an uncertainty-and-trap hardened image CAPTCHA and of the "
                 "learning attack that uses its pass/fail feedback as an oracle"};
    app.require_subcommand(1);

    CommonOpts run_opts;
    CLI::App* run_cmd = app.add_subcommand("run", "execute one experiment, write CSV + metadata");
    add_common_flags(run_cmd, run_opts);

    CommonOpts sweep_opts;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "run once per value of the config's list-valued key");
    add_common_flags(sweep_cmd, sweep_opts);

    bool selftest_quiet = false;
    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "run the embedded verification suites");
    selftest_cmd->add_flag("--quiet", selftest_quiet, "print failures only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run_opts);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts);
        if (selftest_cmd->parsed()) return cmd_selftest(selftest_quiet);
    } catch (const utsim::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitConfig;
}
