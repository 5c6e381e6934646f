#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "vppsim/casefmt.hpp"
#include "vppsim/network.hpp"
#include "vppsim/powerflow.hpp"

#ifndef VPPSIM_PRESETS_DIR
#define VPPSIM_PRESETS_DIR "presets"
#endif

namespace testing {

inline std::filesystem::path preset(const std::string& name) { return std::filesystem::path(VPPSIM_PRESETS_DIR) / name; }

// Slack V = 1 at bus 1, PQ load at bus 2, one lossless line x = 0.1.
inline std::string two_bus_text(double p_load_mw) {
  return "system = { name = \"two\", base_mva = 100.0 }\n"
         "bus = [ { id = 1, kind = \"slack\" }, { id = 2, kind = \"pq\", p_load = " +
         std::to_string(p_load_mw) +
         " } ]\n"
         "branch = [ { from = 1, to = 2, r = 0.0, x = 0.1 } ]\n"
         "gen = []\n";
}

inline vppsim::Network two_bus(double p_load_mw = 100.0) { return vppsim::parse_native_case(two_bus_text(p_load_mw)); }

struct GsResult {
  std::vector<std::complex<double>> v;
  bool converged = false;
};

// Gauss-Seidel oracle for small slack + PQ networks. Builds its own dense
// admittance matrix from the branch list and treats every generator as a
// fixed P injection (DERs per the commitment).
inline GsResult gauss_seidel(const vppsim::Network& net, const vppsim::Commitment& commit, double tol = 1e-13,
                             int max_iter = 200000) {
  using C = std::complex<double>;
  const std::size_t n = net.buses.size();
  std::vector<std::vector<C>> y(n, std::vector<C>(n, C(0.0, 0.0)));
  for (const auto& br : net.branches) {
    if (!br.in_service) continue;
    const C ys = 1.0 / C(br.r, br.x);
    const C half(0.0, br.b_charging / 2.0);
    const double t = br.tap;
    y[br.from_bus][br.from_bus] += (ys + half) / (t * t);
    y[br.to_bus][br.to_bus] += ys + half;
    y[br.from_bus][br.to_bus] -= ys / t;
    y[br.to_bus][br.from_bus] -= ys / t;
  }
  for (std::size_t i = 0; i < n; ++i) y[i][i] += C(net.buses[i].shunt_g, net.buses[i].shunt_b);

  std::vector<C> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = -C(net.buses[i].p_load, net.buses[i].q_load);
  for (const auto& g : net.gens) {
    if (!g.in_service) continue;
    const bool on = g.is_der ? commit.on[*g.agent_id] != 0 : true;
    if (on) s[g.bus] += C(g.p_out, 0.0);
  }
  for (auto& x : s) x /= net.base_mva;

  GsResult res;
  res.v.assign(n, C(1.0, 0.0));
  res.v[net.slack_index] = C(net.buses[net.slack_index].v_set, 0.0);
  for (int it = 0; it < max_iter; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == net.slack_index) continue;
      C sum(0.0, 0.0);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) sum += y[i][j] * res.v[j];
      const C next = (std::conj(s[i]) / std::conj(res.v[i]) - sum) / y[i][i];
      change = std::max(change, std::abs(next - res.v[i]));
      res.v[i] = next;
    }
    if (change < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// Active power delivered by the slack plus every generator elsewhere.
inline double total_generation(const vppsim::Network& net, const vppsim::PowerFlowSolution& sol) {
  double g = sol.p_inj[net.slack_index] + net.buses[net.slack_index].p_load;
  for (std::size_t k = 0; k < net.gens.size(); ++k)
    if (net.gens[k].bus != net.slack_index) g += sol.p_gen[k];
  return g;
}

inline double total_load(const vppsim::Network& net) {
  double l = 0.0;
  for (const auto& b : net.buses) l += b.p_load;
  return l;
}

}  // namespace testing
