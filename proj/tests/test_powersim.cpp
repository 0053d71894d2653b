#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "tsa/error.hpp"
#include "tsa/powersim/features.hpp"
#include "tsa/powersim/scenarios.hpp"

using namespace tsa;
using namespace tsa::powersim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Two generator buses joined by one reactance, no load.
PowerCase two_bus(double p, double x_line) {
  PowerCase c;
  c.name = "two-bus";
  c.buses = {{1, BusType::slack, 1.0, 0.0}, {2, BusType::pv, 1.0, 0.0}};
  c.branches = {{1, 2, 0.0, x_line, 0.0, 1.0}};
  c.generators = {{1, 500.0, 0.1, 0.0}, {2, 3.0, 0.2, p}};
  return c;
}

}  // namespace

TEST_CASE("bus admittance of a single line") {
  const PowerCase c = two_bus(0.5, 0.5);
  const CMatrix y = bus_admittance(c);
  CHECK(std::abs(y(0, 1) - std::complex<double>(0.0, 2.0)) < 1e-14);
  CHECK(std::abs(y(0, 0) - std::complex<double>(0.0, -2.0)) < 1e-14);
  CHECK(std::abs(y(0, 1) - y(1, 0)) == 0.0);
}

TEST_CASE("off-nominal tap and line charging") {
  PowerCase c = two_bus(0.5, 0.5);
  c.branches[0].tap = 1.1;
  c.branches[0].b = 0.2;
  const CMatrix y = bus_admittance(c);
  const std::complex<double> ys(0.0, -2.0), half_b(0.0, 0.1);
  CHECK(std::abs(y(0, 0) - (ys + half_b) / (1.1 * 1.1)) < 1e-14);
  CHECK(std::abs(y(1, 1) - (ys + half_b)) < 1e-14);
  CHECK(std::abs(y(0, 1) + ys / 1.1) < 1e-14);
}

TEST_CASE("fault stage adds a large shunt and keeps symmetry") {
  const PowerCase solved = solve_power_flow(wscc9()).solved;
  const CMatrix pre = build_admittance(solved, Stage::prefault);
  const CMatrix fault = build_admittance(solved, Stage::fault, 7);
  const auto k = static_cast<Eigen::Index>(solved.bus_index(7));
  CHECK(std::abs(fault(k, k)) > kFaultShunt);
  CHECK((fault - fault.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((pre - pre.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(pre.rows() == 12);
  CHECK((build_admittance(solved, Stage::postfault, 7) - pre).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(build_admittance(solved, Stage::fault, 42), DataError);
}

TEST_CASE("kron reduction basics") {
  Rng rng(1);
  const CMatrix y = oracle::random_network(4, rng);
  CHECK((kron_reduce(y, {0, 1, 2, 3}) - y).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(kron_reduce(y, {0, 7}), ConfigError);

  // Series chain 0 - 1 - 2: eliminating the middle node combines the two.
  const std::complex<double> y1(1.0, -4.0), y2(0.5, -2.0);
  CMatrix chain(3, 3);
  chain << y1, -y1, 0.0, -y1, y1 + y2, -y2, 0.0, -y2, y2;
  const CMatrix r = kron_reduce(chain, {0, 2});
  const std::complex<double> series = y1 * y2 / (y1 + y2);
  CHECK(std::abs(r(0, 1) + series) < 1e-14);
  CHECK(std::abs(r(0, 0) - series) < 1e-14);

  CMatrix floating = CMatrix::Zero(3, 3);
  floating(0, 0) = 1.0;
  CHECK_THROWS_AS(kron_reduce(floating, {0}), NumericalError);
}

TEST_CASE("kron reduction preserves terminal behaviour on random networks") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + trial % 5;
    const CMatrix y = oracle::random_network(n, rng);
    const std::vector<Eigen::Index> keep = {0, static_cast<Eigen::Index>(n - 1), 2};
    const CMatrix r = kron_reduce(y, keep);
    const Eigen::VectorXcd v = Eigen::VectorXcd::Random(3);
    const Eigen::VectorXcd expected = oracle::retained_currents(y, keep, v);
    CHECK((r * v - expected).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + expected.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("power flow balances every bus") {
  const PowerCase base = wscc9();
  const PowerFlowResult pf = solve_power_flow(base);
  CHECK(pf.max_mismatch < 1e-10);
  const CVector s = bus_injections(pf.solved);
  for (std::size_t i = 0; i < base.buses.size(); ++i) {
    const Bus& b = pf.solved.buses[i];
    double p_spec = 0.0, q_spec = 0.0;
    for (const Load& l : base.loads)
      if (l.bus == b.id) {
        p_spec -= l.p;
        q_spec -= l.q;
      }
    for (std::size_t g = 0; g < base.generators.size(); ++g)
      if (base.generators[g].bus == b.id) {
        p_spec += pf.p_gen(static_cast<Eigen::Index>(g));
        q_spec += pf.q_gen(static_cast<Eigen::Index>(g));
      }
    const auto k = static_cast<Eigen::Index>(i);
    CHECK(std::abs(s(k).real() - p_spec) < 1e-6);
    CHECK(std::abs(s(k).imag() - q_spec) < 1e-6);
    if (b.type != BusType::pq) CHECK(b.vm == doctest::Approx(base.buses[i].vm).epsilon(1e-12));
  }
  // Scheduled outputs are kept on pv buses.
  CHECK(pf.p_gen(1) == doctest::Approx(1.63));
  CHECK(pf.p_gen(2) == doctest::Approx(0.85));
}

TEST_CASE("WSCC 9-bus initial conditions") {
  const OperatingPoint op = initial_conditions(wscc9());
  const double e[] = {1.0566, 1.0502, 1.0170};
  const double d[] = {2.2717, 19.7315, 13.1752};
  for (int i = 0; i < 3; ++i) {
    CHECK(op.e(i) == doctest::Approx(e[i]).epsilon(2e-4));
    CHECK(std::abs(op.delta0(i) / kDeg - d[i]) < 0.02);
  }
  CHECK(op.pm(0) == doctest::Approx(0.7164).epsilon(1e-3));
  CHECK(op.pm(1) == doctest::Approx(1.63));
  CHECK(op.pm(2) == doctest::Approx(0.85));
  CHECK(op.m(0) == doctest::Approx(2.0 * 23.64 / (2.0 * std::numbers::pi * 60.0)));
  // P_m equals the network power at the equilibrium.
  const Vector pe = electrical_power(reduced_admittance(op.solved, Stage::prefault), op.e, op.delta0);
  CHECK((pe - op.pm).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("two-machine angle follows the transfer equation") {
  const double p = 0.8;
  const OperatingPoint op = initial_conditions(two_bus(p, 0.5));
  const double x_total = 0.5 + 0.1 + 0.2;
  const double expected = std::asin(p * x_total / (op.e(0) * op.e(1)));
  CHECK(op.delta0(1) - op.delta0(0) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("equilibrium is held when nothing happens") {
  const OperatingPoint op = initial_conditions(wscc9());
  const Trajectory t = simulate_fault(op, 7, 0.0, 2.0, 0.01);
  CHECK(t.samples() == 201);
  CHECK(t.omega.cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index k = 0; k < t.delta.rows(); ++k)
    CHECK((t.delta.row(k).transpose() - op.delta0).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(stability_label(t) == 1);
}

TEST_CASE("time grid checks") {
  const OperatingPoint op = initial_conditions(wscc9());
  CHECK_THROWS_AS(simulate_fault(op, 7, 0.1, 1.0, 0.03), ConfigError);
  CHECK_THROWS_AS(simulate_fault(op, 7, 0.1, 1.0003, 0.01), ConfigError);
  const Trajectory t = simulate_fault(op, 7, 0.1, 1.0, 0.01);
  CHECK(t.clear_index == 10);
  CHECK(t.index_at(0.5) == 50);
  CHECK_THROWS_AS(t.index_at(1.5), DataError);
}

TEST_CASE("lossless energy is conserved") {
  CHECK(oracle::wscc9_lossless_drift(0.1, 0.01, 500) < 1e-6);
  // Larger swings drift more at the same step, shrinking with dt^4.
  const double coarse = oracle::wscc9_lossless_drift(0.5, 0.01, 500);
  const double fine = oracle::wscc9_lossless_drift(0.5, 0.005, 1000);
  CHECK(coarse / fine > 8.0);
}

TEST_CASE("integrator is fourth order") {
  const oracle::TwoMachineSmib s;
  auto final_angle = [&](double dt) {
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    const Trajectory t = s.run(0, steps, dt);
    Vector d = t.delta.row(t.delta.rows() - 1).transpose();
    return d(0) - d(1);
  };
  // Start away from equilibrium through a short fault.
  const oracle::TwoMachineSmib moving{0.1, 1.0, 2.0};
  auto faulted = [&](double dt) {
    const int clear = static_cast<int>(std::lround(0.1 / dt));
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    const Trajectory t = moving.run(clear, steps, dt);
    return t.delta(t.delta.rows() - 1, 0) - t.delta(t.delta.rows() - 1, 1);
  };
  CHECK(final_angle(0.01) == doctest::Approx(s.delta0()).epsilon(1e-12));
  const double ref = faulted(0.0025 / 8.0);
  const double e1 = std::abs(faulted(0.005) - ref);
  const double e2 = std::abs(faulted(0.0025) - ref);
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("equal-area critical clearing time brackets the label flip") {
  const oracle::TwoMachineSmib s;
  const double dt = 0.002;
  const double t_cr = s.critical_time();
  const int total = static_cast<int>(std::lround(6.0 / dt));
  const int k_cr = static_cast<int>(std::floor(t_cr / dt));
  CHECK(stability_label(s.run(k_cr - 1, total, dt)) == 1);
  CHECK(stability_label(s.run(k_cr + 2, total, dt)) == -1);
  int flip = -1;
  for (int k = k_cr - 3; k <= k_cr + 4; ++k)
    if (flip < 0 && stability_label(s.run(k, total, dt)) == -1) flip = k;
  REQUIRE(flip > 0);
  CHECK(std::abs(flip * dt - t_cr) <= dt);
}

TEST_CASE("diverged runs are unstable") {
  Trajectory t;
  t.diverged = true;
  CHECK(stability_label(t) == -1);
}

TEST_CASE("centre-of-inertia frame") {
  Trajectory t;
  t.m = (Vector(2) << 1.0, 1.0).finished();
  t.dt = 0.01;
  t.time = {0.0};
  t.delta = Matrix(1, 2);
  t.delta << 0.0, 1.0;
  t.omega = Matrix(1, 2);
  t.omega << 2.0, 4.0;
  const CoiState c = coi_frame(t, 0);
  CHECK(c.delta(0) == doctest::Approx(-0.5));
  CHECK(c.delta(1) == doctest::Approx(0.5));
  CHECK(c.omega(0) == doctest::Approx(-1.0));

  const Trajectory w = simulate_fault(wscc9(), 7, 0.1, 1.0, 0.005);
  for (std::size_t k : {0u, 20u, 150u}) {
    const CoiState s = coi_frame(w, k);
    CHECK(std::abs(w.m.dot(s.delta)) < 1e-12);
    CHECK(std::abs(w.m.dot(s.omega)) < 1e-12);
  }
  CHECK_THROWS_AS(coi_frame(w, 10000), DataError);
}

TEST_CASE("bus-7 fault matches an independent integration") {
  const OperatingPoint op = initial_conditions(wscc9());
  const double dt = 0.005;
  const Trajectory t = simulate_fault(op, 7, 0.1, 1.0, dt);
  CHECK(stability_label(t) == 1);
  CHECK(max_angle_separation(t) < std::numbers::pi);

  Vector d = op.delta0, w = Vector::Zero(3);
  oracle::rk4_reference(reduced_admittance(op.solved, Stage::fault, 7), op.m, op.pm, op.e, d, w,
                        200, dt / 10.0);
  oracle::rk4_reference(reduced_admittance(op.solved, Stage::postfault, 7), op.m, op.pm, op.e, d, w,
                        1800, dt / 10.0);
  const auto last = t.delta.rows() - 1;
  CHECK((t.delta.row(last).transpose() - d).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((t.omega.row(last).transpose() - w).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("a long fault is unstable") {
  CHECK(stability_label(simulate_fault(wscc9(), 7, 0.4, 3.0, 0.005)) == -1);
}

TEST_CASE("features at an equilibrium") {
  const OperatingPoint op = initial_conditions(wscc9());
  const Trajectory t = simulate_fault(op, 7, 0.0, 0.5, 0.005);
  const auto z = extract_features(t, 60.0);
  CHECK(z[0] == doctest::Approx(op.pm.mean()));
  CHECK(std::abs(z[1]) < 1e-9);
  CHECK(std::abs(z[3]) < 1e-9);
  const double spread = op.delta0.maxCoeff() - op.delta0.minCoeff();
  for (std::size_t i : {10u, 16u, 24u, 31u}) CHECK(z[i] == doctest::Approx(spread));
  for (std::size_t i : {4u, 6u, 8u, 9u, 12u, 13u, 14u, 17u, 19u, 20u, 21u, 22u, 26u, 27u, 28u, 29u})
    CHECK(std::abs(z[i]) < 1e-15);
  CHECK(feature_names().front() == "Tz1");
  CHECK(feature_names().size() == 33);
}

TEST_CASE("features of the symmetric two-machine system") {
  const oracle::TwoMachineSmib s;
  const double dt = 0.001;
  Trajectory t = s.run(100, 400, dt);
  t.t_clear = 0.1;
  t.f0 = 50.0;
  const auto z = extract_features(t, 50.0);
  CHECK(z[0] == doctest::Approx(0.0));
  CHECK(z[1] == doctest::Approx(s.p / s.m));  // no transfer during the fault
  CHECK(z[2] == doctest::Approx(s.delta0()));
  CHECK(z[3] == doctest::Approx(0.0));
  const auto k = t.index_at(0.1);
  const double half = 0.5 * (t.delta(k, 0) - t.delta(k, 1));
  CHECK(z[5] == doctest::Approx(half));
  CHECK(z[7] == doctest::Approx(half));
  CHECK(z[4] == doctest::Approx(2.0 * z[9]));
  CHECK(z[8] == doctest::Approx(z[9]));
  CHECK(z[10] == doctest::Approx(2.0 * half));

  Trajectory short_t = s.run(100, 200, dt);
  short_t.t_clear = 0.1;
  CHECK_THROWS_AS(extract_features(short_t, 50.0), DataError);
}

TEST_CASE("Tz2 is the largest initial acceleration") {
  const OperatingPoint op = initial_conditions(wscc9());
  const Trajectory t = simulate_fault(op, 5, 0.1, 0.5, 0.005);
  const Vector acc = (op.pm - t.pe.row(0).transpose()).cwiseQuotient(op.m);
  Eigen::Index a = 0;
  acc.maxCoeff(&a);
  const auto z = extract_features(t, 60.0);
  CHECK(z[1] == doctest::Approx(acc(a)));
  CHECK(z[2] == doctest::Approx(op.delta0(a)));
}

TEST_CASE("features do not depend on generator order") {
  const PowerCase base = wscc9();
  PowerCase perm = base;
  perm.generators = {base.generators[2], base.generators[0], base.generators[1]};
  for (int bus : {4, 7, 9}) {
    const auto a = extract_features(simulate_fault(base, bus, 0.1, 0.5, 0.005), base);
    const auto b = extract_features(simulate_fault(perm, bus, 0.1, 0.5, 0.005), perm);
    for (std::size_t i = 0; i < kFeatureCount; ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("case json round trip and validation") {
  const PowerCase c = wscc9();
  const PowerCase back = parse_case(case_to_json(c));
  CHECK(case_to_json(back) == case_to_json(c));
  CHECK(back.buses.size() == 9);
  CHECK(back.generators[0].h == 23.64);

  PowerCase no_slack = c;
  no_slack.buses[0].type = BusType::pv;
  CHECK_THROWS_AS(no_slack.validate(), DataError);

  PowerCase pq_gen = c;
  pq_gen.generators[1].bus = 5;
  CHECK_THROWS_AS(pq_gen.validate(), DataError);

  PowerCase island = c;
  island.branches.erase(island.branches.begin());  // bus 1 only connects through 1-4
  CHECK_THROWS_AS(check_connected(island), DataError);

  CHECK_THROWS_AS(parse_case("{\"buses\": 3}"), DataError);
  CHECK_THROWS_AS(parse_case("not json"), DataError);
  CHECK_THROWS_AS(c.bus_index(99), DataError);
}

TEST_CASE("load flow failure is reported") {
  PowerCase c = two_bus(50.0, 0.5);
  CHECK_THROWS_AS(solve_power_flow(c), NumericalError);
}

TEST_CASE("scenario grid is deterministic") {
  ScenarioConfig cfg;
  cfg.load_levels = {0.9, 1.1};
  cfg.dispatches_per_level = 2;
  cfg.fault_buses = {4, 7, 9};
  cfg.horizon = 1.0;
  cfg.seed = 5;
  const GeneratedData a = generate_dataset(wscc9(), cfg, 1);
  const GeneratedData b = generate_dataset(wscc9(), cfg, 3);
  CHECK(a.data.samples() + a.skipped.size() == 12);
  CHECK(format_csv(a.data) == format_csv(b.data));
  CHECK(a.data.feature_names == feature_names());
  REQUIRE(!a.rows.empty());
  CHECK(a.rows.front().fault_bus == 4);
  CHECK(a.rows.front().load_level == 0.9);

  const PowerCase d1 = dispatch_case(wscc9(), cfg, 1, 0);
  const PowerCase d2 = dispatch_case(wscc9(), cfg, 1, 0);
  CHECK(case_to_json(d1) == case_to_json(d2));
  double load = 0.0, base_load = 0.0;
  for (const Load& l : d1.loads) load += l.p;
  for (const Load& l : wscc9().loads) base_load += l.p;
  CHECK(load == doctest::Approx(1.1 * base_load));
  CHECK(case_to_json(dispatch_case(wscc9(), cfg, 1, 1)) != case_to_json(d1));
}

TEST_CASE("scenario config validation") {
  CHECK_THROWS_AS(parse_scenarios("{\"load_levels\": []}"), ConfigError);
  CHECK_THROWS_AS(parse_scenarios("{"), ConfigError);
  ScenarioConfig cfg;
  cfg.load_levels = {1.0};
  cfg.fault_buses = {7};
  CHECK_NOTHROW(cfg.validate());
  cfg.share_low = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
