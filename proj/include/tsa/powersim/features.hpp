#pragma once

#include <array>
#include <string>
#include <vector>

#include "tsa/powersim/swing.hpp"

namespace tsa::powersim {

inline constexpr std::size_t kFeatureCount = 33;
using FeatureVector33 = std::array<double, kFeatureCount>;

/// Tz1 .. Tz33
std::vector<std::string> feature_names();

/// Snapshot quantities at one grid point, COI frame for angles and energies.
struct InstantFeatures {
  double impact = 0.0;           // sum of kinetic energies
  double max_ke = 0.0;
  double mean_ke = 0.0;
  double swing = 0.0;            // max_ij |delta_i - delta_j|
  double coi_dev_angle = 0.0;    // delta~ of argmax |delta~|
  double coi_dev_speed = 0.0;    // omega~ of the same machine
  double lead_ke = 0.0;          // kinetic energy of argmax delta
  double max_ke_angle = 0.0;     // delta~ of argmax kinetic energy
};

InstantFeatures instant_features(const Trajectory& traj, std::size_t index);

/// Samples t_0, t_cl and t_cl + 3/6/9 cycles of f0. Throws DataError if the
/// record ends before t_cl + 9 cycles.
FeatureVector33 extract_features(const Trajectory& traj, double f0);
FeatureVector33 extract_features(const Trajectory& traj, const PowerCase& c);

}  // namespace tsa::powersim
