#pragma once

#include <Eigen/Dense>

#include "tsa/powersim/case.hpp"

namespace tsa::powersim {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

enum class Stage { prefault, fault, postfault };

inline constexpr double kFaultShunt = 1e7;

/// Branch-only nodal admittance over buses, in case order.
CMatrix bus_admittance(const PowerCase& c);

/// Buses (case order) followed by one internal node per generator (generator
/// order). Loads become constant admittances (P - jQ) / |V|^2 using each
/// bus's vm, so pass a solved case. fault_bus is a bus id, used only for
/// Stage::fault. Throws DataError if the branches leave a bus unreachable.
CMatrix build_admittance(const PowerCase& c, Stage stage, int fault_bus = -1);

/// Y_rr - Y_re * Y_ee^-1 * Y_er. Throws NumericalError if Y_ee is singular.
CMatrix kron_reduce(const CMatrix& y, const std::vector<Eigen::Index>& retained);

/// Indices of the generator internal nodes in build_admittance's ordering.
std::vector<Eigen::Index> internal_nodes(const PowerCase& c);

/// Reduced admittance seen from the generator internal nodes.
CMatrix reduced_admittance(const PowerCase& c, Stage stage, int fault_bus = -1);

void check_connected(const PowerCase& c);

}  // namespace tsa::powersim
