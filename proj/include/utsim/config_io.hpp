#pragma once

#include <optional>
#include <string>
#include <vector>

#include "utsim/harness.hpp"

// Config file and override handling for the CLI. The file format is flat
// JSON whose keys mirror the run/server/learner config fields; a key whose
// value is an array declares a sweep axis (exactly one allowed, only for
// `sweep`). Overrides are `key=value` strings applied after the file,
// last one wins.

namespace utsim {

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;  // unparsed; applied as overrides
};

struct LoadedConfig {
    RunConfig run;
    std::optional<SweepAxis> sweep;
};

// Returns the list of recognized flat config keys.
const std::vector<std::string>& config_keys();

// Applies one key=value pair. Throws ConfigError on unknown keys or
// unparsable values.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Parses flat JSON text. Array values become the sweep axis; more than one
// array is a ConfigError.
LoadedConfig parse_config_json(const std::string& text);

// Reads and parses a config file; ConfigError when unreadable.
LoadedConfig load_config_file(const std::string& path);

}  // namespace utsim
