#pragma once

#include <functional>
#include <limits>

#include "nsac/profile.hpp"

namespace nsac {

// Right-hand side sampled on the profile grid, with far-field limits.
struct LineRHS {
  std::shared_ptr<const ChebGrid> grid;
  Eigen::VectorXd a;
  double lim_minus = 0, lim_plus = 0;
  double rate = 1.0;

  static LineRHS sample(const std::function<double(double)>& fn, const Profile& on, double lim_minus = 0.0,
                        double lim_plus = 0.0, double rate = 1.0);
  // nodal combination a1 * x + a2 * y (same grid)
  static LineRHS combine(double a1, const LineRHS& x, double a2, const LineRHS& y);
};

// int A theta0' with tail correction
double compatibility_ac(const LineRHS& A, const Profile& theta0);

// w'' - f''(theta0) w = A, w(0) = 0, bounded
Profile solve_linearized(const LineRHS& A, const Profile& theta0, const DoubleWell& well);

// (nu(theta0) w')' = B, w(0) = 0
Profile solve_viscous(const LineRHS& B, const Profile& theta0, const Viscosity& visc);

struct DecayFit {
  double alpha_plus = std::numeric_limits<double>::infinity();
  double c_plus = 0;
  double alpha_minus = std::numeric_limits<double>::infinity();
  double c_minus = 0;
  bool pass = false;
};

// log-linear fit of |w - w_limit| over the outer third of the grid on both sides
DecayFit matching_residual(const Profile& w, double w_plus, double w_minus, double alpha_expected);

}  // namespace nsac
