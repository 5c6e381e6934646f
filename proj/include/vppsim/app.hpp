#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vppsim/ergodic.hpp"
#include "vppsim/network.hpp"
#include "vppsim/powerflow.hpp"
#include "vppsim/simloop.hpp"

// Command implementations behind the vppsim executable.
namespace vppsim::app {

inline constexpr const char* kVersion = "0.1.0";

// Bad flags or arguments; the executable exits with 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The command ran but its outcome is a failure (failed runs, too many
// non-converged power flows, invalid case); exit 1.
class RunFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulateOverrides {
  std::optional<std::string> controller;
  std::optional<double> xc0;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> horizon;
  std::optional<std::uint64_t> seed;
};

// Throws ConfigError for values that do not validate.
void apply_overrides(SimConfig& cfg, const SimulateOverrides& o);

struct SimulateOutcome {
  EnsembleResult result;
  double wall_seconds = 0.0;
  std::size_t nonconverged_steps = 0;
  std::size_t total_steps = 0;
};

// Writes manifest.toml first, then trace_run<id>.csv per run,
// ensemble_mean.csv, ensemble_std.csv, agents_mean.csv,
// agents_tail_by_run.csv, .dat mirrors of the ensemble and agent tables,
// agents_run<id>.csv when per-agent series are kept, and figure_map.txt.
// The manifest is rewritten at the end with the wall-clock duration.
SimulateOutcome simulate_to_dir(const SimConfig& cfg, const std::filesystem::path& out_dir, int threads);

// Reads an output directory written by simulate_to_dir.
Arm load_arm(const std::filesystem::path& dir);

// DER group per agent, in agent order.
std::vector<std::string> agent_groups(const Network& net);

// Report for two arm directories; thresholds and burn-in (unless given) come
// from arm a's manifest.
std::vector<ReportRow> ergodicity_for_dirs(const std::filesystem::path& a, const std::filesystem::path& b,
                                           std::optional<std::size_t> burn_in = std::nullopt);

const std::vector<std::string>& figure_ids();

struct ReproduceOptions {
  std::filesystem::path presets_dir;
  std::filesystem::path out_dir;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> horizon;
  int threads = 0;
};

// Runs {pi, lag} x x_c(0) in {0, 300} with paired seeds into
// <out>/<controller>_xc0_<value>/ and writes ergodicity_<controller>.csv
// for each controller plus figure_map.txt.
void reproduce(const std::string& figure_id, const ReproduceOptions& opts, std::ostream& log);

// Bus table (id, vm, va_deg, p_inj, q_inj) followed by a '#' summary line.
std::string powerflow_csv(const Network& net, const PowerFlowSolution& sol);

// Parses an IFS description (TOML, affine maps) and returns the estimate as
// metric,value CSV.
std::string check_contraction(const std::filesystem::path& spec, ContractionEstimate* out = nullptr);

// "<n> buses, <m> branches, <k> DERs"
std::string case_info(const Network& net);

}  // namespace vppsim::app
