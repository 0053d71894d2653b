#pragma once

// Tent map, a perturbed variant that cannot settle on short cycles or fixed
// points, and the carrier mapping between a search box and the unit cube.

#include <array>
#include <vector>

#include "tsa/rng.hpp"

namespace tsa::chaos {

using UnitPoint = std::vector<double>;

struct SearchBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dims() const { return lower.size(); }
  double diagonal() const;
  void validate() const;
  std::vector<double> clamp(std::vector<double> p) const;
  bool contains(const std::vector<double>& p) const;
};

/// Values the perturbed map refuses to land on: the short-cycle points
/// {0.2, 0.4, 0.6, 0.8} and the dyadic points {0, 0.25, 0.5, 0.75} through
/// which the plain map collapses to 0.
inline constexpr std::array<double, 8> kTrapValues = {0.0, 0.2, 0.25, 0.4, 0.5, 0.6, 0.75, 0.8};
inline constexpr double kTrapTolerance = 1e-12;

bool near_trap(double y);

/// 2x on [0, 1/2], 2(1 - x) on (1/2, 1].
double tent_step(double x);

/// Tent step; a result within kTrapTolerance of a trap value is replaced by
/// (y + u) / 2 with u uniform on (0, 1), redrawing u until the result is
/// itself off the trap set.
double improved_tent_step(double x, Rng& rng);

/// x0 followed by n iterates (n + 1 points), each coordinate iterated
/// independently.
std::vector<UnitPoint> orbit(const UnitPoint& x0, int n, bool improved, Rng& rng);

UnitPoint encode(const std::vector<double>& p, const SearchBox& box);
std::vector<double> decode(const UnitPoint& u, const SearchBox& box);

}  // namespace tsa::chaos
