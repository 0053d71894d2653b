#pragma once

#include <vector>

#include "tsa/dataset.hpp"
#include "tsa/powersim/network.hpp"
#include "tsa/powersim/power_flow.hpp"

namespace tsa::powersim {

/// Equilibrium of the classical model at the solved pre-fault power flow.
struct OperatingPoint {
  PowerCase solved;
  Vector e;       // |E'_i|
  Vector delta0;  // rad, same reference as the slack bus angle
  Vector pm;      // = P_ei(0)
  Vector m;       // 2 H_i / omega_s
};

OperatingPoint initial_conditions(const PowerCase& c, const PowerFlowOptions& opts = {});

/// P_ei = E_i^2 G_ii + sum_{j != i} E_i E_j (G_ij cos d_ij + B_ij sin d_ij)
Vector electrical_power(const CMatrix& yred, const Vector& e, const Vector& delta);

struct Trajectory {
  double dt = 0.0;
  double t0 = 0.0;
  double t_clear = 0.0;
  double f0 = 60.0;
  int clear_index = 0;
  std::vector<double> time;
  Matrix delta;  // samples x generators
  Matrix omega;  // speed deviation, rad/s
  Matrix pe;     // pe(k) uses the network in force on [t_k, t_k + dt)
  Vector m;
  Vector pm;
  bool diverged = false;

  std::size_t samples() const { return time.size(); }
  std::size_t generators() const { return static_cast<std::size_t>(m.size()); }
  /// Nearest grid index; throws DataError past the end of the record.
  std::size_t index_at(double t) const;
};

/// A reduced network held for `steps` RK4 steps.
struct Segment {
  CMatrix yred;
  int steps = 0;
};

/// Classical RK4 through consecutive segments starting at t = 0.
Trajectory integrate(const Vector& m, const Vector& pm, const Vector& e, const Vector& delta0,
                     const Vector& omega0, const std::vector<Segment>& segments, double dt);

/// Three-phase fault at fault_bus (bus id) applied at t = 0 and cleared at
/// t_clear with the pre-fault topology restored.
Trajectory simulate_fault(const OperatingPoint& op, int fault_bus, double t_clear,
                          double horizon, double dt);
Trajectory simulate_fault(const PowerCase& c, int fault_bus, double t_clear, double horizon,
                          double dt);

/// +1 stable, -1 if any pair separates by more than 2 pi or the run diverged.
int stability_label(const Trajectory& traj);

/// max_ij |delta_i - delta_j| over the whole record.
double max_angle_separation(const Trajectory& traj);

struct CoiState {
  Vector delta;
  Vector omega;
};

CoiState coi_frame(const Trajectory& traj, std::size_t index);
CoiState coi_frame_at(const Trajectory& traj, double t);

}  // namespace tsa::powersim
