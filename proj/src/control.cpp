#include "vppsim/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace vppsim {

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::PI:
      return "pi";
    case ControllerKind::Lag:
      return "lag";
    case ControllerKind::LinearSS:
      return "linear_ss";
  }
  return "lag";
}

ControllerKind controller_kind_from_string(std::string_view name) {
  if (name == "pi") return ControllerKind::PI;
  if (name == "lag") return ControllerKind::Lag;
  if (name == "linear_ss") return ControllerKind::LinearSS;
  throw std::invalid_argument("controller.kind: unknown controller '" + std::string(name) +
                              "' (expected pi, lag or linear_ss)");
}

ControllerParams ControllerParams::pi(double kp, double ki) {
  ControllerParams p;
  p.kind = ControllerKind::PI;
  p.kp = kp;
  p.ki = ki;
  p.leak = 1.0;
  return p;
}

ControllerParams ControllerParams::lag(double kp, double ki, double leak) {
  ControllerParams p;
  p.kind = ControllerKind::Lag;
  p.kp = kp;
  p.ki = ki;
  p.leak = leak;
  return p;
}

ControllerParams ControllerParams::linear_ss(Eigen::MatrixXd a, Eigen::VectorXd b, Eigen::RowVectorXd c, double d) {
  ControllerParams p;
  p.kind = ControllerKind::LinearSS;
  p.a = std::move(a);
  p.b = std::move(b);
  p.c = std::move(c);
  p.d = d;
  return p;
}

std::size_t ControllerParams::state_dim() const {
  return kind == ControllerKind::LinearSS ? static_cast<std::size_t>(a.rows()) : 1;
}

Eigen::MatrixXd ControllerParams::transition() const {
  switch (kind) {
    case ControllerKind::PI:
      return Eigen::MatrixXd::Constant(1, 1, 1.0);
    case ControllerKind::Lag:
      return Eigen::MatrixXd::Constant(1, 1, leak);
    case ControllerKind::LinearSS:
      return a;
  }
  return a;
}

void ControllerParams::validate() const {
  if (!std::isfinite(kp) || !std::isfinite(ki)) throw std::invalid_argument("controller: gains must be finite");
  if (kind == ControllerKind::Lag && !(leak > 0.0 && leak < 1.0))
    throw std::invalid_argument("controller.leak: must satisfy 0 < leak < 1 for the lag controller");
  if (kind == ControllerKind::LinearSS) {
    const auto n = a.rows();
    if (n < 1 || a.cols() != n) throw std::invalid_argument("controller.a: must be a non-empty square matrix");
    if (b.size() != n) throw std::invalid_argument("controller.b: length must match controller.a");
    if (c.size() != n) throw std::invalid_argument("controller.c: length must match controller.a");
  }
  if (pi_min && pi_max && *pi_min > *pi_max) throw std::invalid_argument("controller: pi_min > pi_max");
}

ControllerState ControllerState::initial(const ControllerParams& params, double xc0) {
  return initial(params, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(params.state_dim()), xc0));
}

ControllerState ControllerState::initial(const ControllerParams& params, const Eigen::VectorXd& xc0) {
  if (static_cast<std::size_t>(xc0.size()) != params.state_dim())
    throw std::invalid_argument("controller: initial state has the wrong dimension");
  return {params, xc0};
}

ControllerOutput controller_step(const ControllerState& st, double e) {
  const ControllerParams& p = st.params;
  ControllerOutput out{st, 0.0};
  switch (p.kind) {
    case ControllerKind::PI:
    case ControllerKind::Lag: {
      const double leak = p.kind == ControllerKind::PI ? 1.0 : p.leak;
      const double carried = leak * st.xc[0];
      out.pi = p.kp * e + p.ki * (carried + e);
      out.next.xc[0] = carried + e;
      break;
    }
    case ControllerKind::LinearSS:
      out.next.xc = p.a * st.xc + p.b * e;
      out.pi = p.c.dot(out.next.xc) + p.d * e;
      break;
  }
  if (p.pi_min && p.pi_max) out.pi = std::clamp(out.pi, *p.pi_min, *p.pi_max);
  return out;
}

FilterOutput filter_step(const FilterState& st, double p, double losses) {
  FilterOutput out;
  out.p_hat = (p + st.p_prev) / 2.0 + losses;
  out.next.p_prev = p;
  out.next.losses_current = losses;
  return out;
}

IncrementalProbe incremental_iss_probe(const ControllerParams& params, std::span<const double> input,
                                       const Eigen::VectorXd& x0_a, const Eigen::VectorXd& x0_b,
                                       std::size_t horizon) {
  if (horizon < 1) throw std::invalid_argument("incremental_iss_probe: horizon must be >= 1");
  if (input.size() < horizon) throw std::invalid_argument("incremental_iss_probe: input shorter than horizon");

  IncrementalProbe probe;
  probe.difference.reserve(horizon + 1);
  probe.trajectory_gap.reserve(horizon + 1);

  const Eigen::MatrixXd transition = params.transition();
  Eigen::VectorXd d = x0_a - x0_b;
  ControllerState a = ControllerState::initial(params, x0_a);
  ControllerState b = ControllerState::initial(params, x0_b);
  probe.difference.push_back(d.norm());
  probe.trajectory_gap.push_back((a.xc - b.xc).norm());
  for (std::size_t k = 0; k < horizon; ++k) {
    a = controller_step(a, input[k]).next;
    b = controller_step(b, input[k]).next;
    d = transition * d;
    probe.difference.push_back(d.norm());
    probe.trajectory_gap.push_back((a.xc - b.xc).norm());
  }
  return probe;
}

std::string_view to_string(StabilityVerdict v) {
  switch (v) {
    case StabilityVerdict::AsymptoticallyStable:
      return "asymptotically_stable";
    case StabilityVerdict::MarginallyStable:
      return "marginally_stable";
    case StabilityVerdict::Unstable:
      return "unstable";
  }
  return "unstable";
}

StabilityReport is_marginally_unstable(const ControllerParams& params, double tol) {
  StabilityReport rep;
  const Eigen::MatrixXd a = params.transition();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, /*computeEigenvectors=*/false);
  const Eigen::VectorXcd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    // Snap rounding noise so that e.g. a pole at exactly 1 has arg 0, not -0.
    double re = ev[i].real();
    double im = ev[i].imag();
    if (std::abs(re) < 1e-15) re = 0.0;
    if (std::abs(im) < 1e-15) im = 0.0;
    rep.poles.emplace_back(re, im);
  }
  std::sort(rep.poles.begin(), rep.poles.end(), [](const auto& x, const auto& y) {
    if (std::arg(x) != std::arg(y)) return std::arg(x) < std::arg(y);
    return std::abs(x) < std::abs(y);
  });

  bool unit = false;
  bool outside = false;
  for (const auto& z : rep.poles) {
    const double m = std::abs(z);
    if (m > 1.0 + tol) {
      outside = true;
    } else if (std::abs(m - 1.0) <= tol) {
      unit = true;
      rep.unit_circle_angles.push_back(rationalize(std::arg(z) / std::numbers::pi, 1e-9));
    }
  }
  rep.verdict = outside ? StabilityVerdict::Unstable
                        : (unit ? StabilityVerdict::MarginallyStable : StabilityVerdict::AsymptoticallyStable);
  return rep;
}

}  // namespace vppsim
