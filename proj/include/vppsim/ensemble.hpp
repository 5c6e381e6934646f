#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vppsim/network.hpp"
#include "vppsim/powerflow.hpp"
#include "vppsim/prob.hpp"
#include "vppsim/rng.hpp"

namespace vppsim {

// Binary-state DER agent; state 1 means committed.
struct DerAgent {
  std::size_t id = 0;
  std::size_t gen_index = 0;
  std::uint8_t state = 0;
  ProbFunction prob;
  std::string group;
  // Which RNG lane feeds this agent. Defaults to the agent id; agents that
  // share a lane receive identical uniforms.
  std::uint32_t noise_lane = 0;
};

// One agent per DER annotation, in generator order.
std::vector<DerAgent> make_agents(const Network& net);

// u(k+1): independent Bernoulli(eval_prob(prob_i, pi)) draws, one per agent,
// keyed by (rng, step, agent lane).
Commitment sample_commitment(std::span<const DerAgent> agents, double pi, const RngStream& rng, std::uint64_t step);

// Iterated function system with place-dependent probabilities on R^n.
using IfsState = std::vector<double>;
using IfsMap = std::function<IfsState(const IfsState&)>;
using IfsProb = std::function<double(const IfsState&, double pi)>;

struct Ifs {
  std::vector<IfsMap> maps;
  std::vector<IfsProb> probs;
};

class ProbabilityMassError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Index of the map picked by inverse-CDF sampling with uniform u in [0, 1).
// Throws ProbabilityMassError when probabilities are negative or do not sum
// to one within 1e-12.
std::size_t select_map(const Ifs& sys, const IfsState& state, double pi, double u);

IfsState ifs_step(const Ifs& sys, const IfsState& state, double pi, const RngStream& rng, std::uint64_t step);

// x -> A x + b with A row-major.
struct AffineMap {
  std::vector<std::vector<double>> a;
  std::vector<double> b;

  IfsState operator()(const IfsState& x) const;
};

}  // namespace vppsim
