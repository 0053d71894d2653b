#include "tsa/powersim/features.hpp"

#include <cmath>
#include <string>

#include "tsa/error.hpp"

namespace tsa::powersim {

using Eigen::Index;

std::vector<std::string> feature_names() {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= kFeatureCount; ++i) out.push_back("Tz" + std::to_string(i));
  return out;
}

namespace {

// Largest key; exact ties go to the largest tie-break value so the choice
// does not depend on generator order.
Index argmax(const Vector& key, const Vector& tie) {
  Index best = 0;
  for (Index i = 1; i < key.size(); ++i)
    if (key(i) > key(best) || (key(i) == key(best) && tie(i) > tie(best))) best = i;
  return best;
}

}  // namespace

InstantFeatures instant_features(const Trajectory& traj, std::size_t index) {
  const CoiState coi = coi_frame(traj, index);
  const Vector delta = traj.delta.row(static_cast<Index>(index)).transpose();
  const Vector ke = 0.5 * traj.m.cwiseProduct(coi.omega.cwiseAbs2());

  InstantFeatures f;
  f.impact = ke.sum();
  f.max_ke = ke.maxCoeff();
  f.mean_ke = ke.mean();
  f.swing = delta.maxCoeff() - delta.minCoeff();
  const Index dev = argmax(coi.delta.cwiseAbs(), coi.delta);
  f.coi_dev_angle = coi.delta(dev);
  f.coi_dev_speed = coi.omega(dev);
  f.lead_ke = ke(argmax(delta, ke));
  f.max_ke_angle = coi.delta(argmax(ke, coi.delta));
  return f;
}

FeatureVector33 extract_features(const Trajectory& traj, double f0) {
  if (traj.samples() == 0) throw DataError("empty trajectory");
  if (!(f0 > 0.0)) throw ConfigError("f0 must be positive");
  const double cycle = 1.0 / f0;
  const double t_last = traj.t_clear + 9.0 * cycle;
  const auto last = static_cast<std::size_t>(std::round((t_last - traj.t0) / traj.dt));
  if (last >= traj.samples())
    throw DataError("trajectory ends before t_cl + 9 cycles");

  FeatureVector33 z{};
  const Vector acc_power = traj.pm - traj.pe.row(0).transpose();
  const Vector accel = acc_power.cwiseQuotient(traj.m);
  const Vector delta0 = traj.delta.row(0).transpose();
  const Index a = argmax(accel, delta0);
  z[0] = traj.pm.mean();
  z[1] = accel(a);
  z[2] = delta0(a);
  z[3] = acc_power.mean();

  auto at = [&](double cycles) {
    return instant_features(traj, traj.index_at(traj.t_clear + cycles * cycle));
  };
  const InstantFeatures c0 = at(0.0), c3 = at(3.0), c6 = at(6.0), c9 = at(9.0);

  z[4] = c0.impact;
  z[5] = c0.coi_dev_angle;
  z[6] = c0.lead_ke;
  z[7] = c0.max_ke_angle;
  z[8] = c0.max_ke;
  z[9] = c0.mean_ke;
  z[10] = c0.swing;
  z[11] = c0.coi_dev_speed;

  z[12] = c3.impact;
  z[13] = c3.max_ke;
  z[14] = c3.mean_ke;
  z[15] = c3.coi_dev_angle;
  z[16] = c3.swing;
  z[17] = c3.lead_ke;
  z[18] = c3.coi_dev_speed;

  z[19] = c6.impact;
  z[20] = c6.max_ke;
  z[21] = c6.mean_ke;
  z[22] = c6.lead_ke;
  z[23] = c6.coi_dev_angle;
  z[24] = c6.swing;
  z[25] = c6.coi_dev_speed;

  z[26] = c9.impact;
  z[27] = c9.lead_ke;
  z[28] = c9.max_ke;
  z[29] = c9.mean_ke;
  z[30] = c9.coi_dev_angle;
  z[31] = c9.swing;
  z[32] = c9.coi_dev_speed;

  for (double v : z)
    if (!std::isfinite(v)) throw NumericalError("non-finite feature value");
  return z;
}

FeatureVector33 extract_features(const Trajectory& traj, const PowerCase& c) {
  return extract_features(traj, c.f0);
}

}  // namespace tsa::powersim
