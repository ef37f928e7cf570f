#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "nsac/geometry.hpp"
#include "nsac/inner_ode.hpp"
#include "nsac/profile.hpp"

namespace nsac {

using VecFn = std::function<Vec2(const Vec2&, double)>;      // (x, t)
using SurfaceFn = std::function<double(double, double)>;     // (s, t)
using SurfaceVecFn = std::function<Vec2(double, double)>;    // (s, t)

// v0(rho, x, t) = v+ eta(rho) + v- (1 - eta(rho))
struct LeadingVelocity {
  VecFn plus, minus;
  std::shared_ptr<const Profile> eta;

  Vec2 operator()(double rho, const Vec2& x, double t) const;
  // collocated samples with rho = d/eps - h(s)
  VectorField2D sample(const Grid2D& g, const StretchedCoords& sc, const TubularMap& tub, double t) const;
};

// value of an auxiliary field with both branches
struct AuxSample {
  double value = 0, on = 0, off = 0;
  double d = 0;
};
struct AuxVecSample {
  Vec2 value = Vec2::Zero(), on = Vec2::Zero(), off = Vec2::Zero();
  double d = 0;
};

// Switchover: pure on-interface branch for |d| <= 1.5 h, cubic blend up to 3 h.
double branch_weight(double d, double h);

// g0 = (lap d - v0.grad d - d_t d) / d, with d_t d = -V at the foot point.
// V(s) is the normal velocity of the interface the map is built on.
struct G0Field {
  const TubularMap* tub = nullptr;
  VecFn v0;
  std::function<double(double)> normal_velocity;
  double t = 0;
  double h = 0;  // switchover scale, usually the grid spacing

  AuxSample at(const Vec2& x) const;
  double on_interface(double s) const;
  ScalarField2D sample(const Grid2D& g) const;  // zero outside the 3 delta tube
};

// u0 = (v+ - v-) / d
struct U0Field {
  const TubularMap* tub = nullptr;
  VecFn plus, minus;
  double t = 0;
  double h = 0;

  AuxVecSample at(const Vec2& x) const;
  Vec2 on_interface(double s) const;
  VectorField2D sample(const Grid2D& g) const;
};

// c2 on each s-fiber: -c2'' + f''(theta0) c2 = |grad_G h1|^2 theta0'' - theta0' rho g0.
// Linear in the two coefficients, so two line solves span every fiber.
struct C2Field {
  Profile p;  // response to |grad h1|^2 = 1, g0 = 0
  Profile q;  // response to |grad h1|^2 = 0, g0 = 1
  Eigen::VectorXd grad_h1_sq, g0;  // at the s-nodes
  std::vector<cplx> ca, cb;         // their coefficients, set by solve_c2

  double eval(double rho, double s, int m = 0) const;
  Profile fiber(int j) const;  // c2 at node j as its own profile
};

C2Field solve_c2(const Profile& theta0, const DoubleWell& well, const Eigen::VectorXd& grad_h1_sq,
                 const Eigen::VectorXd& g0);

// c_A = zeta(d) c_in + (1 - zeta(d)) sign(d), c_in = theta0(rho) + correction
class ApproxSolution {
public:
  struct Correction {
    std::optional<C2Field> c2;
    HeightFunction h;  // h_{N+1/2}
    int N = 3;
  };

  ApproxSolution(double eps, TubularMap tub, std::shared_ptr<const Profile> theta0, Cutoff zeta,
                 HeightFunction h_eps = {});

  double eps() const { return eps_; }
  const TubularMap& tub() const { return tub_; }
  const Profile& theta0() const { return *theta0_; }
  const Cutoff& zeta() const { return zeta_; }
  const std::optional<Correction>& correction() const { return corr_; }

  double value(const Vec2& x) const;
  double inner(double rho, double s) const;
  double correction_term(double rho, double s) const;  // zero without a correction
  double rho(double d, double s) const;
  ScalarField2D sample(const Grid2D& g) const;

  ApproxSolution with_correction(Correction c) const;

private:
  double eps_;
  TubularMap tub_;
  std::shared_ptr<const Profile> theta0_;
  Cutoff zeta_;
  HeightFunction h_;
  bool has_h_ = false;
  std::optional<Correction> corr_;
};

// throws LayerUnresolved when eps > delta
ApproxSolution build_cA0(double eps, const TubularMap& tub, std::shared_ptr<const Profile> theta0,
                         const Cutoff& zeta);
ApproxSolution build_cA_corrected(const ApproxSolution& base, const C2Field& c2, const HeightFunction& hN12,
                                  int N);

// D_t h + w.grad_G h - lap_G h + a h = g on a moving closed curve.
struct SurfaceProblem {
  std::function<Interface(double)> geometry;
  bool static_geometry = false;
  SurfaceVecFn w;  // empty means zero
  SurfaceFn a;     // empty means zero
  SurfaceFn g;     // empty means zero
};

struct SurfaceSolveOptions {
  double dt = 1e-3;
  double t0 = 0;
  double t_end = 0.1;
  int save_every = 1;
  double cfl = 0.5;
};

// SBDF2 (BDF1 start): implicit lap_G and reaction, extrapolated advection and forcing.
// Throws StepRejected when dt exceeds the advective bound.
HeightFunction surface_parabolic_solve(const SurfaceProblem& prob, const Eigen::VectorXd& h0,
                                       const SurfaceSolveOptions& opt);

// h1 with v1 trace and g0 on the interface; reaction g0, forcing
// sigma0^{-1} int B1 theta0' - sigma0^{-1} sigma n.v1 with B1 = -theta0' rho g0.
struct H1Inputs {
  std::function<Interface(double)> geometry;
  bool static_geometry = false;
  VecFn v0;          // empty means zero
  SurfaceFn v1n;     // empty means zero
  SurfaceFn g0;      // on the interface; empty means zero
  double sigma = 0;  // int theta0'^2
  double sigma0 = 0;
};

HeightFunction h1_evolution(const H1Inputs& in, const Profile& theta0, int n, const SurfaceSolveOptions& opt);

}  // namespace nsac
