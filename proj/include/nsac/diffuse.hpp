#pragma once

#include <memory>
#include <optional>
#include <string>

#include "nsac/fields.hpp"
#include "nsac/geometry.hpp"
#include "nsac/profile.hpp"

namespace nsac {

enum class CapillaryForm { Stress, ChemicalPotential };

// nu(c) = nu- + (nu+ - nu-) s(c) with s the cubic step (3c - c^3 + 2)/4 on [-1, 1],
// constant beyond; c is clamped to [-1.5, 1.5] first.
Viscosity default_viscosity(double nu_minus, double nu_plus);

struct ModelParams {
  double eps = 0.05;
  DoubleWell well = DoubleWell::standard();
  double nu_minus = 1.0, nu_plus = 1.0;
  Viscosity nu;  // empty means default_viscosity(nu_minus, nu_plus)
  double dt = 1e-4;
  double stabilization = 2.0;  // S in f'(c^n) + S (c^{n+1} - c^n)
  bool navier_stokes = true;   // false: Allen-Cahn alone with v = 0
  CapillaryForm capillary = CapillaryForm::Stress;
  double tol = 1e-12;          // relative tolerance of the inner Krylov solves
  double cfl = 1.0;            // reject when max|v| dt / h exceeds this

  double viscosity(double c) const;
};

struct SimState {
  VectorField2D v;
  ScalarField2D p;
  ScalarField2D c;
  double t = 0;
};

struct EnergyParts {
  double kinetic = 0, interfacial = 0, total = 0, dissipation_rate = 0;
};

struct StepInfo {
  int ac_iterations = 0;
  int ns_iterations = 0;
  double div_max = 0;
  int clamp_events = 0;  // points where |c| > 1.5 entered nu
};

// Energy-stable NSAC stepper.  Periodic grids use Fourier collocation; cell grids use
// a MAC discretisation with (v, c) = (0, -1) on the wall.
//
// Allen-Cahn:  (c1 - c0)/dt + u*.grad c0 = -mu/eps,
//              mu = -eps lap c1 + (f'(c0) + S (c1 - c0))/eps,
//              u* = v0 + dt mu grad c0
// Momentum:    (v1 - u*)/dt + B(v0, v1) - div(2 nu(c1) D v1) + grad p = 0, div v1 = 0,
// with B the skew-symmetric convection form.
class NSACSolver {
public:
  NSACSolver(const Grid2D& g, ModelParams p);
  ~NSACSolver();
  NSACSolver(NSACSolver&&) noexcept;
  NSACSolver& operator=(NSACSolver&&) noexcept;

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const Grid2D& grid() const { return grid_; }
  bool spectral() const { return grid_.bc == Boundary::Periodic; }

  SimState initial_state(const ScalarField2D& c) const;
  StepInfo step(SimState& s) const;  // throws StepRejected, SolverFailure
  EnergyParts energy(const SimState& s) const;
  ScalarField2D chemical_potential(const SimState& s) const;
  double divergence_max(const SimState& s) const;
  double suggest_dt(const SimState& s) const;  // 0.4 min(eps^2, h / max|v|)

  // force fields of both capillary forms on the velocity grid
  VectorField2D capillary_force(const SimState& s, CapillaryForm form) const;
  // discrete Leray projection on the velocity grid
  VectorField2D leray(const VectorField2D& f) const;

private:
  struct Spectral;
  struct Mac;
  Grid2D grid_;
  ModelParams params_;
  std::unique_ptr<Spectral> spec_;
  std::unique_ptr<Mac> mac_;
};

SimState step(const SimState& s, const ModelParams& p);
EnergyParts energy(const SimState& s, const ModelParams& p);
ScalarField2D chemical_potential(const SimState& s, const ModelParams& p);

// |P(F_stress - F_mu)| / |F_stress|, P the discrete Leray projection
double capillary_equivalence_check(const SimState& s, const ModelParams& p);

// Plain Allen-Cahn c_t = lap c - f'(c)/eps^2 on a periodic grid with ETDRK4
// (linear part lap - 1/eps^2, phi functions by contour integrals).
class AllenCahnETD {
public:
  AllenCahnETD(const Grid2D& g, double eps, double dt, DoubleWell well = DoubleWell::standard());
  ~AllenCahnETD();
  void step(ScalarField2D& c) const;
  // integrate to t_end with steps no longer than dt
  double run(ScalarField2D& c, double t0, double t_end) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Zero level set as a closed curve.  Throws NoCrossing or MultipleComponents.
// n = 0 picks a node count from the polygon length and grid spacing.
Interface zero_level_set(const ScalarField2D& c, int n = 0);
double level_set_radius(const Interface& iface);  // sqrt(area / pi)

// CSV diagnostics: t, E_kin, E_int, dissipation, div_max, radius
class DiagnosticsWriter {
public:
  explicit DiagnosticsWriter(const std::string& path);
  void row(double t, const EnergyParts& e, double div_max, double radius);

private:
  std::shared_ptr<std::ostream> os_;
};

}  // namespace nsac
