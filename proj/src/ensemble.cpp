#include "vppsim/ensemble.hpp"

#include <cmath>
#include <sstream>

namespace vppsim {

std::vector<DerAgent> make_agents(const Network& net) {
  std::vector<DerAgent> agents;
  agents.reserve(net.ders.size());
  for (std::size_t a = 0; a < net.ders.size(); ++a) {
    DerAgent ag;
    ag.id = a;
    ag.gen_index = net.ders[a].gen;
    ag.prob = net.ders[a].prob;
    ag.group = net.ders[a].group;
    ag.noise_lane = static_cast<std::uint32_t>(a);
    agents.push_back(std::move(ag));
  }
  return agents;
}

Commitment sample_commitment(std::span<const DerAgent> agents, double pi, const RngStream& rng, std::uint64_t step) {
  Commitment u;
  u.on.resize(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const double p = eval_prob(agents[i].prob, pi);
    u.on[i] = rng.uniform(step, agents[i].noise_lane) < p ? 1 : 0;
  }
  return u;
}

std::size_t select_map(const Ifs& sys, const IfsState& state, double pi, double u) {
  if (sys.maps.size() != sys.probs.size() || sys.maps.empty()) {
    throw ProbabilityMassError("IFS needs a non-empty, equal number of maps and probabilities");
  }
  std::vector<double> p(sys.probs.size());
  double total = 0.0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    p[m] = sys.probs[m](state, pi);
    if (!(p[m] >= 0.0)) {
      std::ostringstream msg;
      msg << "probability of map " << m << " is " << p[m];
      throw ProbabilityMassError(msg.str());
    }
    total += p[m];
  }
  if (!(std::abs(total - 1.0) <= 1e-12)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "map probabilities sum to " << total << ", not 1";
    throw ProbabilityMassError(msg.str());
  }
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t m = 0; m < p.size(); ++m) {
    if (p[m] > 0.0) last_positive = m;
    cumulative += p[m];
    if (u < cumulative) return m;
  }
  return last_positive;  // u landed in the rounding gap just below 1
}

IfsState ifs_step(const Ifs& sys, const IfsState& state, double pi, const RngStream& rng, std::uint64_t step) {
  const std::size_t m = select_map(sys, state, pi, rng.uniform(step, 0));
  return sys.maps[m](state);
}

IfsState AffineMap::operator()(const IfsState& x) const {
  IfsState y(b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size() && j < x.size(); ++j) y[i] += a[i][j] * x[j];
  }
  return y;
}

}  // namespace vppsim
