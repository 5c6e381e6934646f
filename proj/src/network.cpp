#include "vppsim/network.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace vppsim {

std::optional<std::size_t> Network::bus_index(int external_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == external_id) return i;
  }
  return std::nullopt;
}

const char* to_string(BusKind kind) {
  switch (kind) {
    case BusKind::Slack:
      return "slack";
    case BusKind::PV:
      return "pv";
    case BusKind::PQ:
      return "pq";
  }
  return "pq";
}

void link_ders(Network& net) {
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    if (net.buses[i].kind == BusKind::Slack) {
      net.slack_index = i;
      break;
    }
  }
  for (auto& g : net.gens) {
    g.is_der = false;
    g.agent_id.reset();
  }
  for (std::size_t a = 0; a < net.ders.size(); ++a) {
    const auto gi = net.ders[a].gen;
    if (gi < net.gens.size()) {
      net.gens[gi].is_der = true;
      net.gens[gi].agent_id = a;
    }
  }
}

std::vector<std::string> validate(const Network& net) {
  std::vector<std::string> out;
  auto fail = [&out](const std::string& msg) { out.push_back(msg); };

  if (!(net.base_mva > 0.0) || !std::isfinite(net.base_mva)) fail("system: base_mva must be > 0");
  if (net.buses.empty()) fail("bus: network has no buses");

  std::size_t slack_count = 0;
  std::set<int> ids;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    std::ostringstream where;
    where << "bus[" << i << "] (id " << b.id << "): ";
    if (!ids.insert(b.id).second) fail(where.str() + "duplicate bus id");
    if (b.kind == BusKind::Slack) ++slack_count;
    if (b.kind != BusKind::PQ && !(b.v_set > 0.0)) fail(where.str() + "v_set must be > 0 on slack/PV buses");
    for (double v : {b.p_load, b.q_load, b.v_set, b.shunt_g, b.shunt_b}) {
      if (!std::isfinite(v)) {
        fail(where.str() + "non-finite value");
        break;
      }
    }
  }
  if (slack_count != 1) {
    std::ostringstream m;
    m << "bus: expected exactly one slack bus, found " << slack_count;
    fail(m.str());
  } else if (net.slack_index >= net.buses.size() || net.buses[net.slack_index].kind != BusKind::Slack) {
    fail("system: slack_index does not point at the slack bus");
  }

  for (std::size_t i = 0; i < net.branches.size(); ++i) {
    const Branch& br = net.branches[i];
    std::ostringstream where;
    where << "branch[" << i << "]: ";
    if (br.from_bus >= net.buses.size() || br.to_bus >= net.buses.size()) fail(where.str() + "endpoint refers to a missing bus");
    if (br.r == 0.0 && br.x == 0.0) fail(where.str() + "zero series impedance (r = x = 0)");
    if (!(br.tap > 0.0)) fail(where.str() + "tap must be > 0");
    if (!std::isfinite(br.r) || !std::isfinite(br.x) || !std::isfinite(br.b_charging)) fail(where.str() + "non-finite value");
  }

  for (std::size_t i = 0; i < net.gens.size(); ++i) {
    const Generator& g = net.gens[i];
    std::ostringstream where;
    where << "gen[" << i << "]: ";
    if (g.bus >= net.buses.size()) fail(where.str() + "bus refers to a missing bus");
    if (g.q_min > g.q_max) fail(where.str() + "q_min > q_max");
    if (!std::isfinite(g.p_out)) fail(where.str() + "non-finite p_out");
    if (g.is_der && !g.agent_id) fail(where.str() + "DER generator without agent id");
    if (g.agent_id && (*g.agent_id >= net.ders.size() || net.ders[*g.agent_id].gen != i))
      fail(where.str() + "agent id does not match the der list");
    if (!g.is_der && g.agent_id) fail(where.str() + "agent id set on a conventional generator");
  }

  for (std::size_t a = 0; a < net.ders.size(); ++a) {
    const DerSpec& d = net.ders[a];
    std::ostringstream where;
    where << "der[" << a << "]: ";
    if (d.gen >= net.gens.size()) {
      fail(where.str() + "gen index out of range");
      continue;
    }
    if (!net.gens[d.gen].is_der) fail(where.str() + "generator is not flagged as DER");
    if (a > 0 && net.ders[a - 1].gen >= d.gen) fail(where.str() + "der entries must be ordered by strictly increasing gen index");
    if (d.prob.kind == ProbKind::Constant && !(d.prob.value >= 0.0 && d.prob.value <= 1.0))
      fail(where.str() + "constant probability outside [0, 1]");
    if (!std::isfinite(d.prob.xi) || !std::isfinite(d.prob.x0)) fail(where.str() + "non-finite probability parameter");
  }
  return out;
}

}  // namespace vppsim
