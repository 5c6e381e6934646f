#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vppsim/network.hpp"
#include "vppsim/simloop.hpp"

namespace vppsim {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All writers use shortest round-trip number text, so parsing returns the
// exact doubles that were written.

// k, pi, e, p, p_hat, losses, nonconverged, xc, then p_<group> per group.
std::string format_trace_csv(const SimulationTrace& tr);
// Inverse of format_trace_csv for the series it carries.
SimulationTrace parse_trace_csv(std::string_view text);

// k, then one column per ensemble series (mean or std).
std::string format_stats_csv(const EnsembleStats& stats, bool std_dev);

// agent, gen, bus, group, mean_output, tail_mean_output, tail_std_across_runs.
std::string format_agents_csv(const Network& net, const std::vector<SimulationTrace>& traces);

// run, then the tail mean of every agent for that run.
std::string format_agent_tails_csv(const std::vector<SimulationTrace>& traces);
// Fills agent_tail_mean of the trace with the matching run_id.
void apply_agent_tails_csv(std::string_view text, std::vector<SimulationTrace>& traces);

// Thinned per-agent outputs: k, then one column per agent.
std::string format_agent_series_csv(const SimulationTrace& tr);

// gnuplot-ready mirror: header commented with '#', whitespace separated.
std::string csv_to_dat(std::string_view csv);

void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace vppsim
