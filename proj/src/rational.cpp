#include "vppsim/rational.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>

namespace vppsim {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("rational arithmetic overflow");
  return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("rational arithmetic overflow");
  return r;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = checked_mul(num, -1);
    den = checked_mul(den, -1);
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

Rational Rational::operator-() const { return Rational(checked_mul(num_, -1), den_); }

Rational operator+(const Rational& a, const Rational& b) {
  const std::int64_t l = std::lcm(a.den_, b.den_);
  return Rational(checked_add(checked_mul(a.num_, l / a.den_), checked_mul(b.num_, l / b.den_)), l);
}

Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }

Rational gcd(const Rational& a, const Rational& b) {
  if (a.is_zero()) return Rational(std::llabs(b.num()), b.den());
  if (b.is_zero()) return Rational(std::llabs(a.num()), a.den());
  const std::int64_t g = std::gcd(checked_mul(a.num(), b.den()), checked_mul(b.num(), a.den()));
  return Rational(g, checked_mul(a.den(), b.den()));
}

Rational Rational::parse(const std::string& text) {
  const auto slash = text.find('/');
  std::size_t used = 0;
  if (slash != std::string::npos) {
    const std::string n = text.substr(0, slash);
    const std::string d = text.substr(slash + 1);
    const std::int64_t num = std::stoll(n, &used);
    if (used != n.size()) throw std::invalid_argument("bad rational '" + text + "'");
    const std::int64_t den = std::stoll(d, &used);
    if (used != d.size()) throw std::invalid_argument("bad rational '" + text + "'");
    return Rational(num, den);
  }
  const auto dot = text.find('.');
  if (dot == std::string::npos) {
    const std::int64_t num = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument("bad rational '" + text + "'");
    return Rational(num);
  }
  // Exact decimal: digits after the point set the power-of-ten denominator.
  std::string digits = text.substr(0, dot) + text.substr(dot + 1);
  if (digits.empty() || digits == "-" || digits == "+") throw std::invalid_argument("bad rational '" + text + "'");
  const std::size_t frac = text.size() - dot - 1;
  std::int64_t den = 1;
  for (std::size_t i = 0; i < frac; ++i) den = checked_mul(den, 10);
  const std::int64_t num = std::stoll(digits, &used);
  if (used != digits.size()) throw std::invalid_argument("bad rational '" + text + "'");
  return Rational(num, den);
}

std::string Rational::to_string() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

std::optional<Rational> rationalize(double x, double tol, std::int64_t max_den) {
  if (!std::isfinite(x)) return std::nullopt;
  // Continued-fraction convergents h/k.
  std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(x));
  std::int64_t k_prev = 0, k = 1;
  double frac = x - std::floor(x);
  for (int iter = 0; iter < 64; ++iter) {
    if (std::abs(static_cast<double>(h) / static_cast<double>(k) - x) <= tol) return Rational(h, k);
    if (frac < 1e-15) break;
    const double inv = 1.0 / frac;
    const auto a = static_cast<std::int64_t>(std::floor(inv));
    frac = inv - std::floor(inv);
    const std::int64_t h_next = a * h + h_prev;
    const std::int64_t k_next = a * k + k_prev;
    if (k_next > max_den) break;
    h_prev = h;
    k_prev = k;
    h = h_next;
    k = k_next;
  }
  if (std::abs(static_cast<double>(h) / static_cast<double>(k) - x) <= tol) return Rational(h, k);
  return std::nullopt;
}

}  // namespace vppsim
