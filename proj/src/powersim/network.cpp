#include "tsa/powersim/network.hpp"

#include <queue>
#include <string>

#include "tsa/error.hpp"

namespace tsa::powersim {

using cd = std::complex<double>;

CMatrix bus_admittance(const PowerCase& c) {
  const auto nb = static_cast<Eigen::Index>(c.buses.size());
  CMatrix y = CMatrix::Zero(nb, nb);
  for (const auto& br : c.branches) {
    const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
    const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
    const cd ys = 1.0 / cd(br.r, br.x);
    const cd ysh(0.0, br.b / 2.0);
    y(f, f) += (ys + ysh) / (br.tap * br.tap);
    y(t, t) += ys + ysh;
    y(f, t) -= ys / br.tap;
    y(t, f) -= ys / br.tap;
  }
  return y;
}

void check_connected(const PowerCase& c) {
  const std::size_t nb = c.buses.size();
  std::vector<std::vector<std::size_t>> adj(nb);
  for (const auto& br : c.branches) {
    const auto f = c.bus_index(br.from), t = c.bus_index(br.to);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<bool> seen(nb, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        q.push(v);
      }
  }
  for (std::size_t i = 0; i < nb; ++i)
    if (!seen[i]) throw DataError("disconnected network: bus " + std::to_string(c.buses[i].id) +
                                  " is unreachable");
}

std::vector<Eigen::Index> internal_nodes(const PowerCase& c) {
  std::vector<Eigen::Index> out;
  const auto nb = static_cast<Eigen::Index>(c.buses.size());
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    out.push_back(nb + static_cast<Eigen::Index>(g));
  return out;
}

CMatrix build_admittance(const PowerCase& c, Stage stage, int fault_bus) {
  check_connected(c);
  const auto nb = static_cast<Eigen::Index>(c.buses.size());
  const auto ng = static_cast<Eigen::Index>(c.generators.size());
  CMatrix y = CMatrix::Zero(nb + ng, nb + ng);
  y.topLeftCorner(nb, nb) = bus_admittance(c);
  for (const auto& l : c.loads) {
    const auto i = static_cast<Eigen::Index>(c.bus_index(l.bus));
    const double v = c.buses[static_cast<std::size_t>(i)].vm;
    y(i, i) += cd(l.p, -l.q) / (v * v);
  }
  for (Eigen::Index g = 0; g < ng; ++g) {
    const auto& gen = c.generators[static_cast<std::size_t>(g)];
    const auto b = static_cast<Eigen::Index>(c.bus_index(gen.bus));
    const cd yg = 1.0 / cd(0.0, gen.xd_prime);
    y(nb + g, nb + g) += yg;
    y(b, b) += yg;
    y(b, nb + g) -= yg;
    y(nb + g, b) -= yg;
  }
  if (stage == Stage::fault) {
    const auto f = static_cast<Eigen::Index>(c.bus_index(fault_bus));
    y(f, f) += kFaultShunt;
  }
  return y;
}

CMatrix kron_reduce(const CMatrix& y, const std::vector<Eigen::Index>& retained) {
  const Eigen::Index n = y.rows();
  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  for (auto r : retained) {
    if (r < 0 || r >= n) throw ConfigError("retained node index out of range");
    keep[static_cast<std::size_t>(r)] = true;
  }
  std::vector<Eigen::Index> elim;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!keep[static_cast<std::size_t>(i)]) elim.push_back(i);
  const auto nr = static_cast<Eigen::Index>(retained.size());
  const auto ne = static_cast<Eigen::Index>(elim.size());
  CMatrix yrr(nr, nr);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < nr; ++j) yrr(i, j) = y(retained[i], retained[j]);
  if (ne == 0) return yrr;
  CMatrix yre(nr, ne), yer(ne, nr), yee(ne, ne);
  for (Eigen::Index i = 0; i < nr; ++i)
    for (Eigen::Index j = 0; j < ne; ++j) {
      yre(i, j) = y(retained[i], elim[j]);
      yer(j, i) = y(elim[j], retained[i]);
    }
  for (Eigen::Index i = 0; i < ne; ++i)
    for (Eigen::Index j = 0; j < ne; ++j) yee(i, j) = y(elim[i], elim[j]);
  Eigen::FullPivLU<CMatrix> lu(yee);
  if (!lu.isInvertible()) throw NumericalError("kron_reduce: eliminated block is singular");
  return yrr - yre * lu.solve(yer);
}

CMatrix reduced_admittance(const PowerCase& c, Stage stage, int fault_bus) {
  return kron_reduce(build_admittance(c, stage, fault_bus), internal_nodes(c));
}

}  // namespace tsa::powersim
