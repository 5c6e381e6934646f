#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vppsim/prob.hpp"

namespace vppsim {

enum class BusKind { Slack, PV, PQ };

// Loads are in MW / MVAr, shunts in per-unit (at V = 1 p.u.).
struct Bus {
  int id = 0;  // external bus number
  BusKind kind = BusKind::PQ;
  double p_load = 0.0;
  double q_load = 0.0;
  double v_set = 1.0;
  double shunt_g = 0.0;
  double shunt_b = 0.0;

  bool operator==(const Bus&) const = default;
};

// Series impedance and charging in per-unit; from/to are dense bus indices.
struct Branch {
  std::size_t from_bus = 0;
  std::size_t to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;
  double tap = 1.0;
  bool in_service = true;

  bool operator==(const Branch&) const = default;
};

struct Generator {
  std::size_t bus = 0;
  double p_out = 0.0;  // MW when committed
  double q_min = 0.0;
  double q_max = 0.0;
  bool in_service = true;
  bool is_der = false;
  std::optional<std::size_t> agent_id;  // index into Network::ders

  bool operator==(const Generator&) const = default;
};

// Agent annotation for a DER generator.
struct DerSpec {
  std::size_t gen = 0;
  std::string group;
  ProbFunction prob;

  bool operator==(const DerSpec&) const = default;
};

struct Network {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> gens;
  std::vector<DerSpec> ders;  // ordered by generator index
  std::size_t slack_index = 0;

  bool operator==(const Network&) const = default;

  std::size_t der_count() const { return ders.size(); }
  std::optional<std::size_t> bus_index(int external_id) const;
};

// Returns one human-readable line per violated invariant; empty means valid.
std::vector<std::string> validate(const Network& net);

// Recomputes slack_index and links gens <-> ders (is_der, agent_id) from the
// ders list. Used by builders before validation.
void link_ders(Network& net);

const char* to_string(BusKind kind);

}  // namespace vppsim
