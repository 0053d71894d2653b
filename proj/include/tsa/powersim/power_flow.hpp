#pragma once

#include "tsa/powersim/case.hpp"
#include "tsa/powersim/network.hpp"

namespace tsa::powersim {

struct PowerFlowOptions {
  double tol = 1e-10;  // max |mismatch|, p.u.
  int max_iters = 30;
};

struct PowerFlowResult {
  PowerCase solved;         // bus vm/va updated, slack pg filled in
  Eigen::VectorXd p_gen;    // per generator
  Eigen::VectorXd q_gen;
  int iterations = 0;
  double max_mismatch = 0.0;
};

/// Newton-Raphson in polar form. Throws NumericalError on non-convergence.
PowerFlowResult solve_power_flow(const PowerCase& c, const PowerFlowOptions& opts = {});

/// Complex power injected at every bus for the current vm/va.
CVector bus_injections(const PowerCase& c);

}  // namespace tsa::powersim
