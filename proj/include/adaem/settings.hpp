#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "adaem/sim.hpp"

namespace adaem {

// ---------------------------------------------------------------------------
// Flat key=value configuration over ExperimentSpec. Every key has a default,
// so an empty file (or no file at all) runs the default scenario. '#' starts
// a comment, blank lines are skipped, later assignments win.
//
// Precedence, lowest to highest: built-in defaults, config file, environment
// variables (ADAEM_<KEY> with the key uppercased), command-line flags.
// ---------------------------------------------------------------------------

inline constexpr const char* kEnvPrefix = "ADAEM_";

// Set one key on the experiment parameters. Unknown keys and unparseable
// values raise ConfigError messages that name the key.
void apply_setting(ExperimentSpec& spec, std::string_view key, std::string_view value);

// Parse settings text on top of `base`. `origin` labels error messages
// (typically the file path). Does not validate the result; callers run
// spec.validate() once all layers are applied.
ExperimentSpec parse_settings(const std::string& text, const std::string& origin,
                              ExperimentSpec base = {});

// Read and parse a config file. Missing or unreadable file raises ParseError.
ExperimentSpec load_settings_file(const std::string& path, ExperimentSpec base = {});

// Apply ADAEM_* environment overrides in place; returns the keys that were
// set in the environment, in canonical key order.
std::vector<std::string> apply_env_overrides(ExperimentSpec& spec);

// Every recognized key, in the order render_settings emits them.
std::vector<std::string> setting_keys();

// Serialize every setting as parseable `key = value` lines.
// parse_settings(render_settings(s)) reproduces s; used for run snapshots.
std::string render_settings(const ExperimentSpec& spec);

// The default configuration with a one-line description per key. Valid as a
// starter config file.
std::string default_settings_reference();

} // namespace adaem
