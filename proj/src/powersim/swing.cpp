#include "tsa/powersim/swing.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tsa/error.hpp"

namespace tsa::powersim {

using cd = std::complex<double>;
using Eigen::Index;

OperatingPoint initial_conditions(const PowerCase& c, const PowerFlowOptions& opts) {
  PowerFlowResult pf = solve_power_flow(c, opts);
  OperatingPoint op;
  const auto ng = static_cast<Index>(pf.solved.generators.size());
  op.e.resize(ng);
  op.delta0.resize(ng);
  op.pm.resize(ng);
  op.m.resize(ng);
  const double ws = pf.solved.omega_s();
  for (Index g = 0; g < ng; ++g) {
    const auto& gen = pf.solved.generators[static_cast<std::size_t>(g)];
    const auto& bus = pf.solved.buses[pf.solved.bus_index(gen.bus)];
    const cd v = std::polar(bus.vm, bus.va);
    const cd i = std::conj(cd(pf.p_gen(g), pf.q_gen(g)) / v);
    const cd eint = v + cd(0.0, gen.xd_prime) * i;
    op.e(g) = std::abs(eint);
    op.delta0(g) = std::arg(eint);
    op.pm(g) = (eint * std::conj(i)).real();
    op.m(g) = 2.0 * gen.h / ws;
  }
  op.solved = std::move(pf.solved);
  return op;
}

Vector electrical_power(const CMatrix& yred, const Vector& e, const Vector& delta) {
  const Index n = e.size();
  Vector p(n);
  for (Index i = 0; i < n; ++i) {
    double acc = e(i) * e(i) * yred(i, i).real();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = delta(i) - delta(j);
      acc += e(i) * e(j) * (yred(i, j).real() * std::cos(d) + yred(i, j).imag() * std::sin(d));
    }
    p(i) = acc;
  }
  return p;
}

std::size_t Trajectory::index_at(double t) const {
  const double k = std::round((t - t0) / dt);
  if (k < 0.0 || k >= static_cast<double>(time.size()))
    throw DataError("time " + std::to_string(t) + " s lies outside the trajectory");
  return static_cast<std::size_t>(k);
}

Trajectory integrate(const Vector& m, const Vector& pm, const Vector& e, const Vector& delta0,
                     const Vector& omega0, const std::vector<Segment>& segments, double dt) {
  const Index n = m.size();
  if (pm.size() != n || e.size() != n || delta0.size() != n || omega0.size() != n)
    throw ConfigError("integrate: state vectors differ in length");
  if (!(dt > 0.0)) throw ConfigError("integrate: dt must be positive");
  int total = 0;
  for (const auto& s : segments) {
    if (s.steps < 0) throw ConfigError("integrate: negative segment length");
    if (s.yred.rows() != n || s.yred.cols() != n)
      throw ConfigError("integrate: reduced matrix has the wrong size");
    total += s.steps;
  }
  if (segments.empty()) throw ConfigError("integrate: no segments");

  Trajectory tr;
  tr.dt = dt;
  tr.m = m;
  tr.pm = pm;
  const auto rows = static_cast<Index>(total) + 1;
  tr.delta.resize(rows, n);
  tr.omega.resize(rows, n);
  tr.pe.resize(rows, n);
  tr.time.reserve(static_cast<std::size_t>(rows));

  Vector d = delta0, w = omega0;
  auto accel = [&](const CMatrix& y, const Vector& dd) {
    return Vector((pm - electrical_power(y, e, dd)).cwiseQuotient(m));
  };

  Index k = 0;
  auto record = [&](const CMatrix& y) {
    tr.time.push_back(static_cast<double>(k) * dt);
    tr.delta.row(k) = d.transpose();
    tr.omega.row(k) = w.transpose();
    tr.pe.row(k) = electrical_power(y, e, d).transpose();
  };

  for (const auto& seg : segments) {
    const CMatrix& y = seg.yred;
    for (int s = 0; s < seg.steps; ++s) {
      record(y);
      const Vector k1d = w, k1w = accel(y, d);
      const Vector k2d = w + 0.5 * dt * k1w, k2w = accel(y, d + 0.5 * dt * k1d);
      const Vector k3d = w + 0.5 * dt * k2w, k3w = accel(y, d + 0.5 * dt * k2d);
      const Vector k4d = w + dt * k3w, k4w = accel(y, d + dt * k3d);
      d += dt / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
      w += dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
      ++k;
      if (!d.allFinite() || !w.allFinite()) {
        tr.diverged = true;
        tr.delta.conservativeResize(k, n);
        tr.omega.conservativeResize(k, n);
        tr.pe.conservativeResize(k, n);
        return tr;
      }
    }
  }
  record(segments.back().yred);
  if (!tr.pe.row(k).allFinite()) {
    tr.diverged = true;
    tr.time.pop_back();
    tr.delta.conservativeResize(k, n);
    tr.omega.conservativeResize(k, n);
    tr.pe.conservativeResize(k, n);
  }
  return tr;
}

namespace {

int grid_steps(double t, double dt, const char* what) {
  const double r = t / dt;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 * std::max(1.0, r))
    throw ConfigError(std::string("dt does not divide ") + what);
  return static_cast<int>(k);
}

}  // namespace

Trajectory simulate_fault(const OperatingPoint& op, int fault_bus, double t_clear,
                          double horizon, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (t_clear < 0.0) throw ConfigError("t_clear must be non-negative");
  if (!(horizon > t_clear)) throw ConfigError("horizon must exceed t_clear");
  op.solved.bus_index(fault_bus);
  const int n_clear = grid_steps(t_clear, dt, "t_clear");
  const int n_total = grid_steps(horizon, dt, "horizon");

  std::vector<Segment> segs;
  if (n_clear > 0) segs.push_back({reduced_admittance(op.solved, Stage::fault, fault_bus), n_clear});
  segs.push_back({reduced_admittance(op.solved, Stage::postfault), n_total - n_clear});

  const Vector w0 = Vector::Zero(op.m.size());
  Trajectory tr = integrate(op.m, op.pm, op.e, op.delta0, w0, segs, dt);
  tr.t_clear = static_cast<double>(n_clear) * dt;
  tr.clear_index = n_clear;
  tr.f0 = op.solved.f0;
  return tr;
}

Trajectory simulate_fault(const PowerCase& c, int fault_bus, double t_clear, double horizon,
                          double dt) {
  return simulate_fault(initial_conditions(c), fault_bus, t_clear, horizon, dt);
}

double max_angle_separation(const Trajectory& traj) {
  double best = 0.0;
  for (Index k = 0; k < traj.delta.rows(); ++k) {
    const auto row = traj.delta.row(k);
    best = std::max(best, row.maxCoeff() - row.minCoeff());
  }
  return best;
}

int stability_label(const Trajectory& traj) {
  if (traj.diverged) return -1;
  return max_angle_separation(traj) > 2.0 * std::numbers::pi ? -1 : 1;
}

CoiState coi_frame(const Trajectory& traj, std::size_t index) {
  if (index >= static_cast<std::size_t>(traj.delta.rows()))
    throw DataError("coi_frame: index outside the trajectory");
  const auto k = static_cast<Index>(index);
  const Vector d = traj.delta.row(k).transpose();
  const Vector w = traj.omega.row(k).transpose();
  const double mt = traj.m.sum();
  const double dc = traj.m.dot(d) / mt;
  const double wc = traj.m.dot(w) / mt;
  return {d.array() - dc, w.array() - wc};
}

CoiState coi_frame_at(const Trajectory& traj, double t) { return coi_frame(traj, traj.index_at(t)); }

}  // namespace tsa::powersim
