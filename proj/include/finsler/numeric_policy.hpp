#pragma once

namespace finsler {

// Tolerances shared by the geometry kernel and the field calculus.
struct NumericPolicy {
  double direction_floor = 1e-12;     // |y| below this is ZeroDirection
  double eigenvalue_floor = 1e-10;    // smallest eigenvalue of g
  double chern_formula_rtol = 1e-7;   // agreement of the two Chern-coefficient routes
  double laplacian_route_rtol = 1e-8; // agreement of -D(grad u) and the Hessian trace
  double fd_step = 1e-4;              // curvature fallback step (chart units)
  bool check_chern_formulas = true;
};

const NumericPolicy& default_policy();

}  // namespace finsler
