#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vppsim/control.hpp"
#include "vppsim/ensemble.hpp"
#include "vppsim/network.hpp"
#include "vppsim/powerflow.hpp"

namespace vppsim {

enum class ReferenceMode { FixedR, RPlusInitialLosses };

std::string_view to_string(ReferenceMode mode);
ReferenceMode reference_mode_from_string(std::string_view name);

// Pass/fail thresholds for the ensemble diagnostics.
struct Thresholds {
  double regulation_band = 0.05;      // |mean p_hat - r| / r in the tail window
  double gap_se_factor = 2.0;         // cross-arm gap of tail averages, in standard errors
  double ks_max = 0.1;                // KS distance of pooled tail samples of pi
  double fairness_sigma_factor = 3.0; // within-group gap, in per-agent sigmas

  bool operator==(const Thresholds&) const = default;
};

struct SimConfig {
  std::shared_ptr<const Network> network;

  // Where the network came from; kept for manifests and config snapshots.
  std::string case_path;
  std::string case_format = "auto";
  std::string der_annotations;
  std::string preset;

  ReferenceMode reference_mode = ReferenceMode::FixedR;
  double r_base = 0.0;  // MW

  std::size_t horizon = 2000;
  std::size_t runs = 1;
  std::uint64_t seed = 1;
  std::size_t burn_in = 1000;  // tail window starts at this row index

  ControllerParams controller = ControllerParams::lag(0.02, 0.01, 0.99);
  Eigen::VectorXd xc0 = Eigen::VectorXd::Zero(1);

  // "all_off", "all_on", or tokens of bits / "<bit>*<count>", e.g. "0*60 1*60".
  std::string initial_commitment = "all_off";

  // RNG lane per agent; empty means lane = agent id. Agents sharing a lane
  // draw identical uniforms (common random numbers).
  std::vector<std::uint32_t> noise_lanes;

  // Keep every n-th row of per-agent outputs; 0 keeps none.
  std::size_t agent_thin = 0;

  PowerFlowOptions powerflow;
  Thresholds thresholds;

  // Throws ConfigError naming the offending field.
  void validate() const;
  Commitment resolve_initial_commitment() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Expands an initial-commitment spec for n DERs; throws ConfigError.
Commitment parse_commitment_spec(const std::string& spec, std::size_t n);

// Per-run time series; row j holds step k = j + 1.
struct SimulationTrace {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  double r = 0.0;        // resolved reference, MW
  double p0 = 0.0;       // p(0) = sum P(0)
  double losses0 = 0.0;  // losses of the initial power flow
  std::size_t burn_in = 0;

  std::vector<double> pi;
  std::vector<double> e;
  std::vector<double> p;
  std::vector<double> p_hat;
  std::vector<double> losses;
  std::vector<double> xc;  // first controller state component after the step
  std::vector<std::uint8_t> nonconverged;
  std::size_t nonconverged_count = 0;

  // Aggregate DER output per group; sums to p at every row.
  std::vector<std::string> group_names;
  std::vector<std::vector<double>> group_power;

  // Per-agent averages of y_i over all rows and over rows >= burn_in.
  std::vector<double> agent_mean;
  std::vector<double> agent_tail_mean;

  // Per-agent outputs y_i at rows 0, thin, 2*thin, ... (empty when thin = 0).
  std::size_t agent_thin = 0;
  std::vector<std::vector<double>> agent_output;

  std::size_t length() const { return pi.size(); }
  bool operator==(const SimulationTrace&) const = default;
};

// Everything a run needs that does not change between steps.
struct LoopContext {
  const Network* network = nullptr;
  std::vector<DerAgent> agents;
  std::vector<std::size_t> agent_group;  // index into group_names
  std::vector<std::string> group_names;
  double r = 0.0;
  PowerFlowOptions powerflow;
};

LoopContext make_loop_context(const Network& net, double r, const PowerFlowOptions& pf,
                              const std::vector<std::uint32_t>& noise_lanes = {});

struct LoopState {
  ControllerState controller;
  FilterState filter;
  std::vector<double> agent_output;  // P(k-1) per agent, MW
  double losses = 0.0;               // losses of the power flow that produced P(k-1)
};

struct TraceRow {
  double pi = 0.0;
  double e = 0.0;
  double p = 0.0;
  double p_hat = 0.0;
  double losses = 0.0;
  double xc = 0.0;
  bool nonconverged = false;
  std::vector<double> agent_output;  // the y_i(k) summed into p(k)
  bool operator==(const TraceRow&) const = default;
};

struct StepResult {
  LoopState next;
  TraceRow row;
  Commitment commitment;  // u(k)
};

// One pass of the closed loop at step k >= 1:
//   p(k) = sum P(k-1); p_hat(k) = F(p(k)); e(k) = r - p_hat(k);
//   pi(k) = C(e(k)); u(k) = S(pi(k)); P(k) = power-flow(u(k)).
// A non-converged power flow is flagged and P(k-1) is carried forward.
StepResult step(const LoopContext& ctx, const LoopState& st, std::uint64_t k, const RngStream& rng,
                PowerFlowSolver& solver);

// Initial power flow for u(0), reference resolution, then steps 1..horizon.
SimulationTrace run(const SimConfig& cfg, std::size_t run_id);

struct EnsembleStats {
  std::size_t runs = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> mean;  // [series][row]
  std::vector<std::vector<double>> std;   // sample std across runs, 0 when runs == 1

  const std::vector<double>& mean_of(const std::string& name) const;
  const std::vector<double>& std_of(const std::string& name) const;
  bool operator==(const EnsembleStats&) const = default;
};

struct EnsembleResult {
  EnsembleStats stats;
  std::vector<SimulationTrace> traces;  // successful runs, in run-id order
  std::vector<std::string> errors;      // "run <id>: <message>" for failed runs
};

// Reduction in run-id order; identical for any execution order of the runs.
EnsembleStats compute_stats(const std::vector<SimulationTrace>& traces);

// Runs in parallel with OpenMP (threads = 0 uses the runtime default).
EnsembleResult run_ensemble(const SimConfig& cfg, int threads = 0);

// Serial reference implementation of run_ensemble.
EnsembleResult run_ensemble_serial(const SimConfig& cfg);

}  // namespace vppsim
