#include "tsa/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tsa/error.hpp"

namespace tsa::chaos {

namespace {

void check_unit(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error("tent map input " + std::to_string(x) + " outside [0, 1]");
}

}  // namespace

double SearchBox::diagonal() const {
  double s = 0.0;
  for (std::size_t d = 0; d < dims(); ++d) s += (upper[d] - lower[d]) * (upper[d] - lower[d]);
  return std::sqrt(s);
}

void SearchBox::validate() const {
  if (lower.empty() || lower.size() != upper.size())
    throw ConfigError("search box bounds must be non-empty and of equal length");
  for (std::size_t d = 0; d < dims(); ++d)
    if (!(lower[d] < upper[d]) || !std::isfinite(lower[d]) || !std::isfinite(upper[d]))
      throw ConfigError("degenerate search box in dimension " + std::to_string(d));
}

std::vector<double> SearchBox::clamp(std::vector<double> p) const {
  for (std::size_t d = 0; d < dims(); ++d) p[d] = std::clamp(p[d], lower[d], upper[d]);
  return p;
}

bool SearchBox::contains(const std::vector<double>& p) const {
  if (p.size() != dims()) return false;
  for (std::size_t d = 0; d < dims(); ++d)
    if (!(p[d] >= lower[d] && p[d] <= upper[d])) return false;
  return true;
}

bool near_trap(double y) {
  return std::any_of(kTrapValues.begin(), kTrapValues.end(),
                     [y](double t) { return std::abs(y - t) <= kTrapTolerance; });
}

double tent_step(double x) {
  check_unit(x);
  return x <= 0.5 ? 2.0 * x : 2.0 * (1.0 - x);
}

double improved_tent_step(double x, Rng& rng) {
  const double y = tent_step(x);
  if (!near_trap(y)) return y;
  for (;;) {
    const double z = (y + uniform_open(rng)) / 2.0;
    if (!near_trap(z)) return z;
  }
}

std::vector<UnitPoint> orbit(const UnitPoint& x0, int n, bool improved, Rng& rng) {
  if (n < 1) throw std::invalid_argument("orbit needs at least one step");
  for (double x : x0) check_unit(x);
  std::vector<UnitPoint> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  out.push_back(x0);
  for (int k = 0; k < n; ++k) {
    UnitPoint next = out.back();
    for (double& x : next) x = improved ? improved_tent_step(x, rng) : tent_step(x);
    out.push_back(std::move(next));
  }
  return out;
}

UnitPoint encode(const std::vector<double>& p, const SearchBox& box) {
  box.validate();
  if (p.size() != box.dims()) throw std::invalid_argument("encode: dimension mismatch");
  UnitPoint u(p.size());
  for (std::size_t d = 0; d < p.size(); ++d)
    u[d] = std::clamp((p[d] - box.lower[d]) / (box.upper[d] - box.lower[d]), 0.0, 1.0);
  return u;
}

std::vector<double> decode(const UnitPoint& u, const SearchBox& box) {
  box.validate();
  if (u.size() != box.dims()) throw std::invalid_argument("decode: dimension mismatch");
  std::vector<double> p(u.size());
  for (std::size_t d = 0; d < u.size(); ++d)
    p[d] = box.lower[d] + u[d] * (box.upper[d] - box.lower[d]);
  return box.clamp(std::move(p));
}

}  // namespace tsa::chaos
