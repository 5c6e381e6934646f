#include "vppsim/prob.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vppsim {

namespace {

// 0.95 / (1 + exp(-xi*pi - x0)); exp overflow saturates to 0, underflow to 0.95.
double swing(double xi, double x0, double pi) {
  return 0.95 / (1.0 + std::exp(-xi * pi - x0));
}

}  // namespace

double eval_prob(const ProbFunction& f, double pi) {
  switch (f.kind) {
    case ProbKind::Type1:
      return 0.02 + swing(f.xi, f.x0, pi);
    case ProbKind::Type2:
      return 0.98 - swing(f.xi, f.x0, pi);
    case ProbKind::Constant:
      return f.value;
  }
  return f.value;
}

std::string_view to_string(ProbKind kind) {
  switch (kind) {
    case ProbKind::Type1:
      return "type1";
    case ProbKind::Type2:
      return "type2";
    case ProbKind::Constant:
      return "constant";
  }
  return "constant";
}

ProbKind prob_kind_from_string(std::string_view name) {
  if (name == "type1") return ProbKind::Type1;
  if (name == "type2") return ProbKind::Type2;
  if (name == "constant") return ProbKind::Constant;
  throw std::invalid_argument("unknown probability function kind '" + std::string(name) +
                              "' (expected type1, type2 or constant)");
}

}  // namespace vppsim
