#include "vppsim/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace vppsim {

std::size_t Commitment::count() const {
  return static_cast<std::size_t>(std::count(on.begin(), on.end(), std::uint8_t{1}));
}

Commitment Commitment::from_bits(std::string_view bits) {
  Commitment c;
  c.on.reserve(bits.size());
  for (char ch : bits) {
    if (ch != '0' && ch != '1') throw std::invalid_argument("commitment bitstring may contain only '0' and '1'");
    c.on.push_back(ch == '1' ? 1 : 0);
  }
  return c;
}

std::string Commitment::to_bits() const {
  std::string s;
  s.reserve(on.size());
  for (auto b : on) s.push_back(b ? '1' : '0');
  return s;
}

const char* to_string(PowerFlowStatus status) {
  switch (status) {
    case PowerFlowStatus::Converged:
      return "converged";
    case PowerFlowStatus::MaxIterations:
      return "max_iterations";
    case PowerFlowStatus::SingularJacobian:
      return "singular_jacobian";
  }
  return "unknown";
}

SparseComplex build_ybus(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  std::vector<Eigen::Triplet<Complex>> t;
  t.reserve(net.branches.size() * 4 + net.buses.size());
  for (std::size_t k = 0; k < net.branches.size(); ++k) {
    const Branch& br = net.branches[k];
    if (!br.in_service) continue;
    if (br.r == 0.0 && br.x == 0.0) {
      std::ostringstream m;
      m << "branch " << k << " has zero series impedance";
      throw SingularBranchError(m.str());
    }
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex half_charge(0.0, br.b_charging / 2.0);
    const double tap = br.tap;
    const auto f = static_cast<Eigen::Index>(br.from_bus);
    const auto to = static_cast<Eigen::Index>(br.to_bus);
    t.emplace_back(f, f, (ys + half_charge) / (tap * tap));
    t.emplace_back(to, to, ys + half_charge);
    t.emplace_back(f, to, -ys / tap);
    t.emplace_back(to, f, -ys / tap);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& b = net.buses[static_cast<std::size_t>(i)];
    // Explicit diagonal keeps the sparsity pattern stable even for unloaded buses.
    t.emplace_back(i, i, Complex(b.shunt_g, b.shunt_b));
  }
  SparseComplex y(n, n);
  y.setFromTriplets(t.begin(), t.end());
  y.makeCompressed();
  return y;
}

PowerFlowSolver::PowerFlowSolver(const Network& net) : net_(&net), ybus_(build_ybus(net)) {
  const std::size_t n = net.buses.size();

  // PV buses without an in-service conventional generator hold no voltage.
  std::vector<bool> has_conventional(n, false);
  for (const auto& g : net.gens) {
    if (g.in_service && !g.is_der) has_conventional[g.bus] = true;
  }
  angle_var_.assign(n, -1);
  magnitude_var_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == net.slack_index) continue;
    angle_var_[i] = static_cast<int>(pvpq_.size());
    pvpq_.push_back(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i == net.slack_index) continue;
    const bool pv = net.buses[i].kind == BusKind::PV && has_conventional[i];
    if (!pv) {
      magnitude_var_[i] = static_cast<int>(pvpq_.size() + pq_.size());
      pq_.push_back(i);
    }
  }

  const double base = net.base_mva;
  s_fixed_ = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    s_fixed_[static_cast<Eigen::Index>(i)] = -Complex(net.buses[i].p_load, net.buses[i].q_load) / base;
  }
  for (std::size_t k = 0; k < net.gens.size(); ++k) {
    const auto& g = net.gens[k];
    if (g.is_der) {
      der_gens_.push_back(k);
    } else if (g.in_service) {
      s_fixed_[static_cast<Eigen::Index>(g.bus)] += Complex(g.p_out / base, 0.0);
    }
  }
}

void PowerFlowSolver::mismatch(const Eigen::VectorXcd& v, const Eigen::VectorXcd& s_spec, Eigen::VectorXd& f,
                               Eigen::VectorXcd& s_calc) const {
  const Eigen::VectorXcd current = ybus_ * v;
  s_calc = v.cwiseProduct(current.conjugate());
  f.resize(static_cast<Eigen::Index>(pvpq_.size() + pq_.size()));
  Eigen::Index r = 0;
  for (std::size_t i : pvpq_) f[r++] = (s_calc[static_cast<Eigen::Index>(i)] - s_spec[static_cast<Eigen::Index>(i)]).real();
  for (std::size_t i : pq_) f[r++] = (s_calc[static_cast<Eigen::Index>(i)] - s_spec[static_cast<Eigen::Index>(i)]).imag();
}

void PowerFlowSolver::jacobian(const Eigen::VectorXcd& v, const Eigen::VectorXcd& s_calc) {
  const auto dim = static_cast<Eigen::Index>(pvpq_.size() + pq_.size());
  triplets_.clear();

  // Rows: dP for pvpq buses, then dQ for pq buses.
  // Columns: angle for pvpq buses, then magnitude for pq buses.
  auto stamp = [&](std::size_t i, std::size_t k, Complex ds_dang, Complex ds_dmag) {
    const int ca = angle_var_[k];
    const int cm = magnitude_var_[k];
    const int rp = angle_var_[i];
    const int rq = magnitude_var_[i];
    if (rp >= 0) {
      if (ca >= 0) triplets_.emplace_back(rp, ca, ds_dang.real());
      if (cm >= 0) triplets_.emplace_back(rp, cm, ds_dmag.real());
    }
    if (rq >= 0) {
      if (ca >= 0) triplets_.emplace_back(rq, ca, ds_dang.imag());
      if (cm >= 0) triplets_.emplace_back(rq, cm, ds_dmag.imag());
    }
  };

  const Eigen::VectorXcd current = ybus_ * v;
  for (Eigen::Index k = 0; k < ybus_.outerSize(); ++k) {
    const Complex vk = v[k];
    const Complex vk_unit = vk / std::abs(vk);
    for (SparseComplex::InnerIterator it(ybus_, k); it; ++it) {
      const Eigen::Index i = it.row();
      const Complex y = it.value();
      const Complex vi = v[i];
      if (i == k) {
        const Complex ds_dang = Complex(0.0, 1.0) * (s_calc[i] - vi * std::conj(y * vi));
        const Complex ds_dmag = vk_unit * std::conj(current[i]) + vi * std::conj(y * vk_unit);
        stamp(static_cast<std::size_t>(i), static_cast<std::size_t>(k), ds_dang, ds_dmag);
      } else {
        const Complex ds_dang = Complex(0.0, -1.0) * vi * std::conj(y * vk);
        const Complex ds_dmag = vi * std::conj(y * vk_unit);
        stamp(static_cast<std::size_t>(i), static_cast<std::size_t>(k), ds_dang, ds_dmag);
      }
    }
  }
  jac_.resize(dim, dim);
  jac_.setFromTriplets(triplets_.begin(), triplets_.end());
  jac_.makeCompressed();
}

PowerFlowSolution PowerFlowSolver::solve(const Commitment& commit, const PowerFlowOptions& opts) {
  const Network& net = *net_;
  if (commit.size() != der_gens_.size()) {
    std::ostringstream m;
    m << "commitment has " << commit.size() << " bits but the network has " << der_gens_.size() << " DER generators";
    throw CommitmentSizeError(m.str());
  }
  const std::size_t n = net.buses.size();
  const double base = net.base_mva;

  Eigen::VectorXcd s_spec = s_fixed_;
  for (std::size_t a = 0; a < der_gens_.size(); ++a) {
    const auto& g = net.gens[der_gens_[a]];
    if (commit.on[a] && g.in_service) s_spec[static_cast<Eigen::Index>(g.bus)] += Complex(g.p_out / base, 0.0);
  }

  Eigen::VectorXcd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const bool holds_voltage = magnitude_var_[i] < 0;  // slack or active PV
    v[static_cast<Eigen::Index>(i)] = Complex(holds_voltage ? net.buses[i].v_set : 1.0, 0.0);
  }

  Eigen::VectorXd f;
  Eigen::VectorXcd s_calc;
  mismatch(v, s_spec, f, s_calc);
  double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;

  Eigen::VectorXcd best_v = v;
  double best_norm = norm;
  int iterations = 0;
  PowerFlowStatus status = PowerFlowStatus::MaxIterations;

  while (true) {
    if (norm <= opts.tolerance) {
      status = PowerFlowStatus::Converged;
      break;
    }
    if (iterations >= opts.max_iterations || !std::isfinite(norm)) break;

    jacobian(v, s_calc);
    if (!pattern_ready_) {
      lu_.analyzePattern(jac_);
      pattern_ready_ = true;
    }
    lu_.factorize(jac_);
    if (lu_.info() != Eigen::Success) {
      status = PowerFlowStatus::SingularJacobian;
      break;
    }
    const Eigen::VectorXd dx = lu_.solve(-f);
    ++iterations;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      double mag = std::abs(v[ii]);
      double ang = std::arg(v[ii]);
      if (angle_var_[i] >= 0) ang += dx[angle_var_[i]];
      if (magnitude_var_[i] >= 0) mag += dx[magnitude_var_[i]];
      v[ii] = std::polar(mag, ang);
    }
    mismatch(v, s_spec, f, s_calc);
    norm = f.lpNorm<Eigen::Infinity>();
    if (norm < best_norm) {
      best_norm = norm;
      best_v = v;
    }
  }

  if (status != PowerFlowStatus::Converged && !(norm <= best_norm)) {
    v = best_v;
    mismatch(v, s_spec, f, s_calc);
    norm = best_norm;
  }

  PowerFlowSolution sol;
  sol.status = status;
  sol.converged = status == PowerFlowStatus::Converged;
  sol.iterations = iterations;
  sol.max_mismatch = norm;
  sol.v_mag.resize(n);
  sol.v_ang.resize(n);
  sol.p_inj.resize(n);
  sol.q_inj.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    sol.v_mag[i] = std::abs(v[ii]);
    sol.v_ang[i] = std::arg(v[ii]);
    sol.p_inj[i] = s_calc[ii].real() * base;
    sol.q_inj[i] = s_calc[ii].imag() * base;
  }

  // Generator outputs: DERs follow the commitment, conventional units their
  // set-point, and the first conventional unit at the slack absorbs the residual.
  sol.p_gen.assign(net.gens.size(), 0.0);
  std::ptrdiff_t slack_gen = -1;
  double slack_bus_other = 0.0;
  for (std::size_t k = 0; k < net.gens.size(); ++k) {
    const auto& g = net.gens[k];
    if (!g.in_service) continue;
    if (g.is_der) {
      sol.p_gen[k] = commit.on[*g.agent_id] ? g.p_out : 0.0;
    } else {
      sol.p_gen[k] = g.p_out;
    }
    if (g.bus == net.slack_index) {
      if (!g.is_der && slack_gen < 0) {
        slack_gen = static_cast<std::ptrdiff_t>(k);
      } else {
        slack_bus_other += sol.p_gen[k];
      }
    }
  }
  if (slack_gen >= 0) {
    sol.p_gen[static_cast<std::size_t>(slack_gen)] =
        sol.p_inj[net.slack_index] + net.buses[net.slack_index].p_load - slack_bus_other;
  }

  double losses = 0.0;
  for (const auto& br : net.branches) {
    if (!br.in_service) continue;
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex half_charge(0.0, br.b_charging / 2.0);
    const Complex vf = v[static_cast<Eigen::Index>(br.from_bus)];
    const Complex vt = v[static_cast<Eigen::Index>(br.to_bus)];
    const Complex i_from = (ys + half_charge) / (br.tap * br.tap) * vf - ys / br.tap * vt;
    const Complex i_to = -ys / br.tap * vf + (ys + half_charge) * vt;
    losses += (vf * std::conj(i_from) + vt * std::conj(i_to)).real();
  }
  sol.losses = losses * base;
  return sol;
}

PowerFlowSolution solve_power_flow(const Network& net, const Commitment& commit, const PowerFlowOptions& opts) {
  PowerFlowSolver solver(net);
  return solver.solve(commit, opts);
}

double total_der_output(const PowerFlowSolution& sol, const Network& net) {
  double p = 0.0;
  for (std::size_t k = 0; k < net.gens.size(); ++k) {
    if (net.gens[k].is_der) p += sol.p_gen[k];
  }
  return p;
}

}  // namespace vppsim
