#pragma once

#include <string>
#include <vector>

#include "nsac/expansion.hpp"
#include "nsac/geometry.hpp"

namespace nsac {

// Closed front in equal-arclength tangent-angle form: X_alpha = L (cos theta, sin theta),
// theta(alpha) = 2 pi m alpha + phi(alpha) with phi periodic, X(0) = x0.
struct FrontState {
  double t = 0;
  double L = 0;
  Eigen::VectorXd phi;
  int winding = 1;
  Vec2 x0 = Vec2::Zero();

  static FrontState from_interface(const Interface& iface, int n = 0);  // n = 0 keeps the node count
  int size() const { return static_cast<int>(phi.size()); }
  Eigen::VectorXd theta() const;
  Interface interface() const;
  Eigen::VectorXd curvature() const;  // theta_alpha / L at the nodes
};

struct FrontOptions {
  bool curvature = true;  // include the H term in V = n.v + H
  double max_curvature_nodes = 0.5;  // CurvatureBlowup once |H| L / n exceeds this
};

// One IMEX step (ARS(2,2,2)): the curvature term is implicit, convection and the
// arclength-preserving tangential velocity explicit.
FrontState mcf_convected_step(const FrontState& front, const VecFn& v, double dt, const FrontOptions& opt = {});

// Integrate to t_end with a uniform step no larger than dt, recording every `save_every` steps.
std::vector<FrontState> mcf_convected_run(const FrontState& front, const VecFn& v, double t_end, double dt,
                                          int save_every = 1, const FrontOptions& opt = {});

// sup over probes of |finite-difference d_t d(x) + V(P x)| along a front history
double kinematic_consistency(const std::vector<FrontState>& history, const VecFn& v, const std::vector<Vec2>& probes,
                             const FrontOptions& opt = {});

using ScalarFn = std::function<double(const Vec2&)>;
using VelocityFn = std::function<Vec2(const Vec2&)>;

struct StressJumpSample {
  double s = 0;
  Vec2 traction_plus = Vec2::Zero(), traction_minus = Vec2::Zero();
  Vec2 residual = Vec2::Zero();
};

// [2 nu Dv - p I] n - sigma H n at the front nodes with one-sided normal differences.
// Throws SolverFailure when a one-sided stencil hits a non-finite value.
std::vector<StressJumpSample> stress_jump_residual(const VelocityFn& vp, const VelocityFn& vm, const ScalarFn& pp,
                                                   const ScalarFn& pm, const Interface& front, double sigma,
                                                   double nu_plus, double nu_minus, double step = 1e-4);

// rows t, s, x, y
void write_front_history(const std::string& path, const std::vector<FrontState>& history);

}  // namespace nsac
