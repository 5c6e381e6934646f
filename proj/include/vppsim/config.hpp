#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "vppsim/simloop.hpp"

namespace vppsim {

// Simulation config file (TOML). Tables: [case], [reference], [controller],
// [simulation], [powerflow], [thresholds]; see presets/*.toml for commented
// examples. Relative case paths resolve against base_dir. Unknown keys and
// out-of-range values throw ConfigError naming the field. The case file is
// loaded as part of parsing.
SimConfig parse_sim_config(std::string_view text, const std::filesystem::path& base_dir);

// Reads a config file. A run manifest is accepted too: its [config] table
// holds the snapshot of the config that produced the run.
SimConfig load_sim_config(const std::filesystem::path& path);

// Canonical text of cfg; parse_sim_config(serialize_sim_config(cfg)) gives
// back an equal config. With a prefix such as "config", every table is
// nested under it.
std::string serialize_sim_config(const SimConfig& cfg, std::string_view table_prefix = "");

}  // namespace vppsim
