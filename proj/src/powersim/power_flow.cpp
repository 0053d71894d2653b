#include "tsa/powersim/power_flow.hpp"

#include <cmath>
#include <string>

#include "tsa/error.hpp"

namespace tsa::powersim {

using cd = std::complex<double>;
using Eigen::Index;

namespace {

CVector voltages(const PowerCase& c) {
  CVector v(static_cast<Index>(c.buses.size()));
  for (std::size_t i = 0; i < c.buses.size(); ++i)
    v(static_cast<Index>(i)) = std::polar(c.buses[i].vm, c.buses[i].va);
  return v;
}

}  // namespace

CVector bus_injections(const PowerCase& c) {
  const CVector v = voltages(c);
  const CVector i = bus_admittance(c) * v;
  return v.cwiseProduct(i.conjugate());
}

PowerFlowResult solve_power_flow(const PowerCase& input, const PowerFlowOptions& opts) {
  input.validate();
  check_connected(input);
  PowerCase c = input;
  const Index nb = static_cast<Index>(c.buses.size());
  const CMatrix y = bus_admittance(c);

  Eigen::VectorXd p_spec = Eigen::VectorXd::Zero(nb), q_spec = Eigen::VectorXd::Zero(nb);
  for (const auto& l : c.loads) {
    const auto i = static_cast<Index>(c.bus_index(l.bus));
    p_spec(i) -= l.p;
    q_spec(i) -= l.q;
  }
  for (const auto& g : c.generators) p_spec(static_cast<Index>(c.bus_index(g.bus))) += g.pg;

  std::vector<Index> pvpq, pq;
  for (Index i = 0; i < nb; ++i) {
    const auto t = c.buses[static_cast<std::size_t>(i)].type;
    if (t != BusType::slack) pvpq.push_back(i);
    if (t == BusType::pq) pq.push_back(i);
  }
  const auto npv = static_cast<Index>(pvpq.size());
  const auto npq = static_cast<Index>(pq.size());

  Eigen::VectorXd vm(nb), va(nb);
  for (Index i = 0; i < nb; ++i) {
    vm(i) = c.buses[static_cast<std::size_t>(i)].vm;
    va(i) = c.buses[static_cast<std::size_t>(i)].va;
  }

  auto mismatch = [&](const CVector& v, Eigen::VectorXd& f) {
    const CVector s = v.cwiseProduct((y * v).conjugate());
    f.resize(npv + npq);
    for (Index k = 0; k < npv; ++k) f(k) = s(pvpq[k]).real() - p_spec(pvpq[k]);
    for (Index k = 0; k < npq; ++k) f(npv + k) = s(pq[k]).imag() - q_spec(pq[k]);
  };

  PowerFlowResult out;
  Eigen::VectorXd f;
  int it = 0;
  for (;; ++it) {
    CVector v(nb);
    for (Index i = 0; i < nb; ++i) v(i) = std::polar(vm(i), va(i));
    mismatch(v, f);
    const double norm = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(norm)) throw NumericalError("power flow diverged");
    if (norm < opts.tol) {
      out.max_mismatch = norm;
      break;
    }
    if (it >= opts.max_iters)
      throw NumericalError("power flow did not converge (mismatch " + std::to_string(norm) + ")");

    const CVector ibus = y * v;
    const CVector vnorm = v.cwiseQuotient(vm.cast<cd>());
    const CMatrix ds_dva = cd(0, 1) * v.asDiagonal() *
                           (CMatrix(ibus.asDiagonal()) - y * v.asDiagonal()).conjugate();
    const CMatrix ds_dvm = v.asDiagonal() * (y * vnorm.asDiagonal()).conjugate() +
                           CMatrix(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();
    Eigen::MatrixXd jac(npv + npq, npv + npq);
    for (Index r = 0; r < npv; ++r) {
      for (Index k = 0; k < npv; ++k) jac(r, k) = ds_dva(pvpq[r], pvpq[k]).real();
      for (Index k = 0; k < npq; ++k) jac(r, npv + k) = ds_dvm(pvpq[r], pq[k]).real();
    }
    for (Index r = 0; r < npq; ++r) {
      for (Index k = 0; k < npv; ++k) jac(npv + r, k) = ds_dva(pq[r], pvpq[k]).imag();
      for (Index k = 0; k < npq; ++k) jac(npv + r, npv + k) = ds_dvm(pq[r], pq[k]).imag();
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw NumericalError("power flow Jacobian is singular");
    const Eigen::VectorXd dx = -lu.solve(f);
    for (Index k = 0; k < npv; ++k) va(pvpq[k]) += dx(k);
    for (Index k = 0; k < npq; ++k) vm(pq[k]) += dx(npv + k);
  }
  out.iterations = it;

  for (Index i = 0; i < nb; ++i) {
    c.buses[static_cast<std::size_t>(i)].vm = vm(i);
    c.buses[static_cast<std::size_t>(i)].va = va(i);
  }
  const CVector s = bus_injections(c);
  const auto ng = static_cast<Index>(c.generators.size());
  out.p_gen.resize(ng);
  out.q_gen.resize(ng);
  for (Index g = 0; g < ng; ++g) {
    auto& gen = c.generators[static_cast<std::size_t>(g)];
    const auto b = static_cast<Index>(c.bus_index(gen.bus));
    cd sg = s(b);
    for (const auto& l : c.loads)
      if (l.bus == gen.bus) sg += cd(l.p, l.q);
    out.p_gen(g) = sg.real();
    out.q_gen(g) = sg.imag();
    gen.pg = sg.real();
  }
  out.solved = std::move(c);
  return out;
}

}  // namespace tsa::powersim
