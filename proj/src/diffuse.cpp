#include "nsac/diffuse.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "diffuse_impl.hpp"
#include "nsac/errors.hpp"

namespace nsac {

namespace {

using Vec = Eigen::VectorXd;

// preconditioned conjugate gradients; returns iterations
int pcg(const std::function<void(const Vec&, Vec&)>& A, const std::function<void(const Vec&, Vec&)>& M, const Vec& b,
        Vec& x, double tol, int max_iter, const char* who) {
  Vec r, z, p, Ap;
  A(x, Ap);
  r = b - Ap;
  const double bn = std::max(b.norm(), 1e-300);
  if (r.norm() <= tol * bn) return 0;
  M(r, z);
  p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_iter; ++it) {
    A(p, Ap);
    const double alpha = rz / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    if (r.norm() <= tol * bn) return it;
    M(r, z);
    const double rz1 = r.dot(z);
    p = z + (rz1 / rz) * p;
    rz = rz1;
  }
  std::ostringstream os;
  os << who << ": conjugate gradients did not reach " << tol << " in " << max_iter << " iterations";
  throw SolverFailure(os.str());
}

// restarted GMRES with right preconditioning; returns iterations
int gmres(const std::function<void(const Vec&, Vec&)>& A, const std::function<void(const Vec&, Vec&)>& M, const Vec& b,
          Vec& x, double tol, int restart, int max_iter, const char* who) {
  const double bn = std::max(b.norm(), 1e-300);
  int total = 0;
  Vec w, z, Ax;
  while (total < max_iter) {
    A(x, Ax);
    Vec r = b - Ax;
    double beta = r.norm();
    if (beta <= tol * bn) return total;
    std::vector<Vec> V{r / beta};
    std::vector<Vec> Z;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
    Vec cs = Vec::Zero(restart), sn = Vec::Zero(restart), gvec = Vec::Zero(restart + 1);
    gvec[0] = beta;
    int k = 0;
    for (; k < restart && total < max_iter; ++k, ++total) {
      M(V[k], z);
      Z.push_back(z);
      A(z, w);
      for (int i = 0; i <= k; ++i) {
        H(i, k) = w.dot(V[i]);
        w -= H(i, k) * V[i];
      }
      for (int i = 0; i <= k; ++i) {  // second pass for orthogonality
        const double h = w.dot(V[i]);
        H(i, k) += h;
        w -= h * V[i];
      }
      H(k + 1, k) = w.norm();
      V.push_back(H(k + 1, k) > 0 ? Vec(w / H(k + 1, k)) : Vec(w));
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
        H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
        H(i, k) = t;
      }
      const double den = std::hypot(H(k, k), H(k + 1, k));
      cs[k] = H(k, k) / den;
      sn[k] = H(k + 1, k) / den;
      H(k, k) = den;
      H(k + 1, k) = 0;
      gvec[k + 1] = -sn[k] * gvec[k];
      gvec[k] = cs[k] * gvec[k];
      if (std::abs(gvec[k + 1]) <= tol * bn) {
        ++k;
        ++total;
        break;
      }
    }
    const Vec y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(gvec.head(k));
    for (int i = 0; i < k; ++i) x += y[i] * Z[i];
    A(x, Ax);
    if ((b - Ax).norm() <= tol * bn) return total;
  }
  std::ostringstream os;
  os << who << ": GMRES did not reach " << tol << " in " << max_iter << " iterations";
  throw SolverFailure(os.str());
}

double cubic_step(double c) {
  const double x = std::clamp(c, -1.0, 1.0);
  return (3 * x - x * x * x + 2) / 4;
}

}  // namespace

Viscosity default_viscosity(double nu_minus, double nu_plus) {
  if (!(nu_minus > 0 && nu_plus > 0)) throw ConfigError("viscosities must be positive");
  return [=](double c) { return nu_minus + (nu_plus - nu_minus) * cubic_step(std::clamp(c, -1.5, 1.5)); };
}

double ModelParams::viscosity(double c) const {
  if (nu) return nu(std::clamp(c, -1.5, 1.5));
  return nu_minus + (nu_plus - nu_minus) * cubic_step(c);
}

Eigen::VectorXd viscosity_field(const ModelParams& p, const Eigen::VectorXd& c, int& clamps) {
  Vec out(c.size());
  clamps = 0;
  for (int k = 0; k < c.size(); ++k) {
    if (std::abs(c[k]) > 1.5) ++clamps;
    out[k] = p.viscosity(c[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fourier collocation

NSACSolver::Spectral::Spectral(const Grid2D& g) : ops(g) {}

void NSACSolver::Spectral::convect(const Vec& ax, const Vec& ay, const Vec& u, const Vec& v, Vec& bu, Vec& bv) const {
  Vec gx, gy, d;
  ops.grad(u, gx, gy);
  ops.divergence(ax.cwiseProduct(u), ay.cwiseProduct(u), d);
  bu = 0.5 * (ax.cwiseProduct(gx) + ay.cwiseProduct(gy) + d);
  ops.grad(v, gx, gy);
  ops.divergence(ax.cwiseProduct(v), ay.cwiseProduct(v), d);
  bv = 0.5 * (ax.cwiseProduct(gx) + ay.cwiseProduct(gy) + d);
}

void NSACSolver::Spectral::viscous(const Vec& nu, const Vec& u, const Vec& v, Vec& fu, Vec& fv, Vec* d2) const {
  Vec ux, uy, vx, vy;
  ops.grad(u, ux, uy);
  ops.grad(v, vx, vy);
  const Vec d12 = 0.5 * (uy + vx);
  if (d2) *d2 = ux.cwiseAbs2() + vy.cwiseAbs2() + 2 * d12.cwiseAbs2();
  const Vec t11 = 2 * nu.cwiseProduct(ux), t22 = 2 * nu.cwiseProduct(vy), t12 = 2 * nu.cwiseProduct(d12);
  ops.divergence(t11, t12, fu);
  ops.divergence(t12, t22, fv);
}

Eigen::VectorXd NSACSolver::Spectral::mu(const Vec& c, const ModelParams& p) const {
  Vec lap;
  ops.laplacian(c, lap);
  return -p.eps * lap + c.unaryExpr(p.well.df) / p.eps;
}

StepInfo NSACSolver::Spectral::step(SimState& s, const ModelParams& p) const {
  StepInfo info;
  const int n = s.c.grid.size();
  const double eps = p.eps, dt = p.dt, S = p.stabilization;
  const Vec c0 = s.c.v;
  Vec gx, gy;
  ops.grad(c0, gx, gy);
  const bool ns = p.navier_stokes;
  Vec a = Vec::Constant(n, 1.0 / eps);
  Vec adv = Vec::Zero(n);
  if (ns) {
    a += dt * (gx.cwiseAbs2() + gy.cwiseAbs2());
    adv = s.v.u.cwiseProduct(gx) + s.v.v.cwiseProduct(gy);
  }
  const Vec w = (dt * a).cwiseInverse();
  const Vec rhs = w.cwiseProduct(c0 - dt * adv) - (c0.unaryExpr(p.well.df) - S * c0) / eps;
  const double wmax = w.maxCoeff();
  auto A = [&](const Vec& x, Vec& y) {
    ops.laplacian(x, y);
    y = w.cwiseProduct(x) + (S / eps) * x - eps * y;
  };
  auto M = [&](const Vec& r, Vec& z) { ops.helmholtz_inverse(r, wmax + S / eps, eps, z); };
  Vec c1 = c0;
  info.ac_iterations = pcg(A, M, rhs, c1, p.tol, 500, "Allen-Cahn step");
  if (!ns) {
    s.c.v = c1;
    s.t += dt;
    return info;
  }
  const Vec mu = -(c1 - c0 + dt * adv).cwiseQuotient(dt * a);
  Vec us = s.v.u + dt * mu.cwiseProduct(gx);
  Vec vs = s.v.v + dt * mu.cwiseProduct(gy);

  const Vec nu = viscosity_field(p, c1, info.clamp_events);
  const double nubar = 0.5 * (nu.minCoeff() + nu.maxCoeff());
  const Vec ax = s.v.u, ay = s.v.v;
  auto op = [&](const Vec& x, Vec& y) {
    const auto u = x.head(n), v = x.tail(n);
    Vec bu, bv, fu, fv;
    convect(ax, ay, u, v, bu, bv);
    viscous(nu, u, v, fu, fv);
    Vec ru = u / dt + bu - fu, rv = v / dt + bv - fv;
    ops.leray(ru, rv);
    y.resize(2 * n);
    y << ru, rv;
  };
  auto pre = [&](const Vec& r, Vec& z) {
    Vec zu, zv;
    ops.helmholtz_inverse(r.head(n), 1.0 / dt, nubar, zu);
    ops.helmholtz_inverse(r.tail(n), 1.0 / dt, nubar, zv);
    z.resize(2 * n);
    z << zu, zv;
  };
  Vec pu = us / dt, pv = vs / dt;
  ops.leray(pu, pv);
  Vec b(2 * n);
  b << pu, pv;
  Vec x0u = s.v.u, x0v = s.v.v;
  ops.leray(x0u, x0v);
  Vec x(2 * n);
  x << x0u, x0v;
  info.ns_iterations = gmres(op, pre, b, x, p.tol, 60, 2000, "momentum step");
  const Vec u1 = x.head(n), v1 = x.tail(n);

  // pressure from the gradient part of the momentum residual
  Vec bu, bv, fu, fv;
  convect(ax, ay, u1, v1, bu, bv);
  viscous(nu, u1, v1, fu, fv);
  Vec pres;
  ops.gradient_potential((us - u1) / dt - bu + fu, (vs - v1) / dt - bv + fv, pres);
  if (p.capillary == CapillaryForm::Stress) {
    Vec g1x, g1y;
    ops.grad(c1, g1x, g1y);
    pres -= c1.unaryExpr(p.well.f) / eps + 0.5 * eps * (g1x.cwiseAbs2() + g1y.cwiseAbs2());
  } else {
    pres -= c1.unaryExpr(p.well.f) / eps;
  }
  pres.array() -= pres.mean();
  s.c.v = c1;
  s.v.u = u1;
  s.v.v = v1;
  s.p.v = pres;
  s.t += dt;
  info.div_max = div_max(s);
  return info;
}

EnergyParts NSACSolver::Spectral::energy(const SimState& s, const ModelParams& p) const {
  const double dA = s.c.grid.cell_area();
  EnergyParts e;
  const Vec& c = s.c.v;
  Vec lap;
  ops.laplacian(c, lap);
  e.interfacial = dA * (-0.5 * p.eps * c.dot(lap) + c.unaryExpr(p.well.f).sum() / p.eps);
  const Vec mu = -p.eps * lap + c.unaryExpr(p.well.df) / p.eps;
  e.dissipation_rate = dA * mu.squaredNorm() / p.eps;
  if (s.v.u.size() == c.size()) {
    e.kinetic = 0.5 * dA * (s.v.u.squaredNorm() + s.v.v.squaredNorm());
    int clamps = 0;
    const Vec nu = viscosity_field(p, c, clamps);
    Vec fu, fv, d2;
    viscous(nu, s.v.u, s.v.v, fu, fv, &d2);
    e.dissipation_rate += dA * 2 * nu.dot(d2);
  }
  e.total = e.kinetic + e.interfacial;
  return e;
}

double NSACSolver::Spectral::div_max(const SimState& s) const {
  Vec d;
  ops.divergence(s.v.u, s.v.v, d);
  return d.lpNorm<Eigen::Infinity>();
}

VectorField2D NSACSolver::Spectral::force(const SimState& s, const ModelParams& p, CapillaryForm form) const {
  VectorField2D f(s.c.grid, Staggering::Collocated);
  const Vec& c = s.c.v;
  Vec gx, gy;
  ops.grad(c, gx, gy);
  if (form == CapillaryForm::Stress) {
    ops.divergence(gx.cwiseProduct(gx), gx.cwiseProduct(gy), f.u);
    ops.divergence(gx.cwiseProduct(gy), gy.cwiseProduct(gy), f.v);
    f.u *= -p.eps;
    f.v *= -p.eps;
  } else {
    Vec lap;
    ops.laplacian(c, lap);
    f.u = -p.eps * lap.cwiseProduct(gx);
    f.v = -p.eps * lap.cwiseProduct(gy);
  }
  return f;
}

// ---------------------------------------------------------------------------

NSACSolver::NSACSolver(const Grid2D& g, ModelParams p) : grid_(g), params_(std::move(p)) {
  if (!(params_.eps > 0) || !(params_.dt > 0)) throw ConfigError("eps and dt must be positive");
  if (g.bc == Boundary::Periodic)
    spec_ = std::make_unique<Spectral>(g);
  else
    mac_ = std::make_unique<Mac>(g);
}

NSACSolver::~NSACSolver() = default;
NSACSolver::NSACSolver(NSACSolver&&) noexcept = default;
NSACSolver& NSACSolver::operator=(NSACSolver&&) noexcept = default;

SimState NSACSolver::initial_state(const ScalarField2D& c) const {
  SimState s;
  s.c = c;
  s.c.grid = grid_;
  if (!spectral()) s.c.boundary_value = -1.0;
  s.v = VectorField2D(grid_, spectral() ? Staggering::Collocated : Staggering::MAC);
  s.p = ScalarField2D(grid_);
  return s;
}

StepInfo NSACSolver::step(SimState& s) const {
  const double vmax = std::max(s.v.u.lpNorm<Eigen::Infinity>(), s.v.v.lpNorm<Eigen::Infinity>());
  const double h = std::min(grid_.hx, grid_.hy);
  if (vmax * params_.dt > params_.cfl * h) {
    std::ostringstream os;
    os << "advective CFL " << vmax * params_.dt / h << " exceeds " << params_.cfl;
    throw StepRejected(os.str(), suggest_dt(s));
  }
  return spectral() ? spec_->step(s, params_) : mac_->step(s, params_);
}

EnergyParts NSACSolver::energy(const SimState& s) const {
  return spectral() ? spec_->energy(s, params_) : mac_->energy(s, params_);
}

ScalarField2D NSACSolver::chemical_potential(const SimState& s) const {
  ScalarField2D out(grid_);
  out.v = spectral() ? spec_->mu(s.c.v, params_) : mac_->mu(s.c.v, params_);
  return out;
}

double NSACSolver::divergence_max(const SimState& s) const {
  return spectral() ? spec_->div_max(s) : mac_->div_max(s);
}

double NSACSolver::suggest_dt(const SimState& s) const {
  const double vmax = std::max(s.v.u.lpNorm<Eigen::Infinity>(), s.v.v.lpNorm<Eigen::Infinity>());
  const double h = std::min(grid_.hx, grid_.hy);
  double dt = params_.eps * params_.eps;
  if (vmax > 0) dt = std::min(dt, h / vmax);
  return 0.4 * dt;
}

VectorField2D NSACSolver::capillary_force(const SimState& s, CapillaryForm form) const {
  return spectral() ? spec_->force(s, params_, form) : mac_->force(s, params_, form);
}

VectorField2D NSACSolver::leray(const VectorField2D& f) const {
  VectorField2D out = f;
  if (spectral()) {
    spec_->ops.leray(out.u, out.v);
  } else {
    mac_->unpack(mac_->leray(mac_->pack(f)), out);
  }
  return out;
}

SimState step(const SimState& s, const ModelParams& p) {
  NSACSolver solver(s.c.grid, p);
  SimState out = s;
  solver.step(out);
  return out;
}

EnergyParts energy(const SimState& s, const ModelParams& p) { return NSACSolver(s.c.grid, p).energy(s); }

ScalarField2D chemical_potential(const SimState& s, const ModelParams& p) {
  return NSACSolver(s.c.grid, p).chemical_potential(s);
}

double capillary_equivalence_check(const SimState& s, const ModelParams& p) {
  NSACSolver solver(s.c.grid, p);
  const VectorField2D f1 = solver.capillary_force(s, CapillaryForm::Stress);
  VectorField2D d = solver.capillary_force(s, CapillaryForm::ChemicalPotential);
  d.u = f1.u - d.u;
  d.v = f1.v - d.v;
  const VectorField2D pd = solver.leray(d);
  const double norm = std::sqrt(f1.u.squaredNorm() + f1.v.squaredNorm());
  const double diff = std::sqrt(pd.u.squaredNorm() + pd.v.squaredNorm());
  return norm > 0 ? diff / norm : diff;
}

// ---------------------------------------------------------------------------
// ETDRK4 for plain Allen-Cahn

struct AllenCahnETD::Impl {
  Grid2D g;
  Fft2 fft;
  double eps, dt;
  DoubleWell well;
  Vec E, E2, Q, f1, f2, f3;
  Impl(const Grid2D& grid, double e, double h, DoubleWell w)
      : g(grid), fft(grid.nx, grid.ny, grid.lx(), grid.ly()), eps(e), dt(h), well(std::move(w)) {}
};

AllenCahnETD::AllenCahnETD(const Grid2D& g, double eps, double dt, DoubleWell well)
    : impl_(std::make_unique<Impl>(g, eps, dt, std::move(well))) {
  if (g.bc != Boundary::Periodic) throw std::invalid_argument("AllenCahnETD needs a periodic grid");
  Impl& m = *impl_;
  const int ns = m.fft.spectral_size(), nh = m.fft.nxh();
  m.E.resize(ns);
  m.E2.resize(ns);
  m.Q.resize(ns);
  m.f1.resize(ns);
  m.f2.resize(ns);
  m.f3.resize(ns);
  constexpr int kPoints = 32;
  std::vector<cplx> roots(kPoints);
  for (int q = 0; q < kPoints; ++q) roots[q] = std::exp(cplx(0, std::numbers::pi * (q + 0.5) / kPoints));
  auto phis = [&](double z, double out[3]) {
    cplx s1 = 0, s2 = 0, s3 = 0;
    for (const cplx& r : roots) {
      const cplx Z = z + r, eZ = std::exp(Z);
      s1 += (eZ - 1.0) / Z;
      s2 += (eZ - 1.0 - Z) / (Z * Z);
      s3 += (eZ - 1.0 - Z - 0.5 * Z * Z) / (Z * Z * Z);
    }
    // the contour is symmetric about the real axis, so the mean of the upper half suffices
    out[0] = s1.real() / kPoints;
    out[1] = s2.real() / kPoints;
    out[2] = s3.real() / kPoints;
  };
  const double s = 1.0 / (eps * eps);
  for (int l = 0; l < g.ny; ++l)
    for (int j = 0; j < nh; ++j) {
      const int k = j + nh * l;
      const double z = dt * (-m.fft.k2(j, l) - s);
      double p[3], ph[3];
      phis(z, p);
      phis(z / 2, ph);
      m.E[k] = std::exp(z);
      m.E2[k] = std::exp(z / 2);
      m.Q[k] = dt / 2 * ph[0];
      m.f1[k] = dt * (p[0] - 3 * p[1] + 4 * p[2]);
      m.f2[k] = dt * (2 * p[1] - 4 * p[2]);
      m.f3[k] = dt * (-p[1] + 4 * p[2]);
    }
}

AllenCahnETD::~AllenCahnETD() = default;

void AllenCahnETD::step(ScalarField2D& c) const {
  const Impl& m = *impl_;
  const int ns = m.fft.spectral_size(), n = m.g.size();
  const double s = 1.0 / (m.eps * m.eps);
  std::vector<cplx> v(ns), Nv(ns), Na(ns), Nb(ns), Nc(ns), a(ns), b(ns), cc(ns);
  Vec work(n);
  auto nonlinear = [&](const std::vector<cplx>& hat, std::vector<cplx>& out) {
    std::vector<cplx> tmp = hat;
    m.fft.backward(tmp.data(), work.data());
    for (int k = 0; k < n; ++k) work[k] = -m.well.df(work[k]) * s + s * work[k];
    m.fft.forward(work.data(), out.data());
  };
  m.fft.forward(c.v.data(), v.data());
  nonlinear(v, Nv);
  for (int k = 0; k < ns; ++k) a[k] = m.E2[k] * v[k] + m.Q[k] * Nv[k];
  nonlinear(a, Na);
  for (int k = 0; k < ns; ++k) b[k] = m.E2[k] * v[k] + m.Q[k] * Na[k];
  nonlinear(b, Nb);
  for (int k = 0; k < ns; ++k) cc[k] = m.E2[k] * a[k] + m.Q[k] * (2.0 * Nb[k] - Nv[k]);
  nonlinear(cc, Nc);
  for (int k = 0; k < ns; ++k)
    v[k] = m.E[k] * v[k] + m.f1[k] * Nv[k] + m.f2[k] * (Na[k] + Nb[k]) + m.f3[k] * Nc[k];
  m.fft.backward(v.data(), c.v.data());
}

double AllenCahnETD::run(ScalarField2D& c, double t0, double t_end) const {
  const double span = t_end - t0;
  const double steps = span / impl_->dt;
  const long n = std::lround(steps);
  if (std::abs(steps - n) > 1e-6) throw std::invalid_argument("AllenCahnETD::run: span must be a multiple of dt");
  for (long k = 0; k < n; ++k) step(c);
  return t0 + n * impl_->dt;
}

// ---------------------------------------------------------------------------

DiagnosticsWriter::DiagnosticsWriter(const std::string& path) {
  auto f = std::make_shared<std::ofstream>(path);
  if (!*f) throw std::runtime_error("cannot write " + path);
  f->precision(15);
  *f << "t,E_kin,E_int,dissipation,div_max,radius\n";
  os_ = f;
}

void DiagnosticsWriter::row(double t, const EnergyParts& e, double div_max, double radius) {
  *os_ << t << ',' << e.kinetic << ',' << e.interfacial << ',' << e.dissipation_rate << ',' << div_max << ',';
  if (std::isfinite(radius)) *os_ << radius;
  *os_ << '\n';
  os_->flush();
}

}  // namespace nsac
