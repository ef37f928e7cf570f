#include <cmath>
#include <sstream>

#include <Eigen/SparseLU>

#include "diffuse_impl.hpp"
#include "nsac/errors.hpp"

namespace nsac {

namespace {

using Vec = Eigen::VectorXd;
using Trip = Eigen::Triplet<double>;

SpMat from_triplets(int rows, int cols, const std::vector<Trip>& t) {
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

template <class Solver>
void factor(Solver& s, const SpMat& A, const char* who) {
  s.compute(A);
  if (s.info() != Eigen::Success) throw SolverFailure(std::string(who) + ": sparse factorisation failed");
}

}  // namespace

NSACSolver::Mac::Mac(const Grid2D& grid) : g(grid) {
  const int nx = g.nx, ny = g.ny, nc = g.size();
  if (nx < 3 || ny < 3) throw std::invalid_argument("MAC grid needs at least 3 x 3 cells");
  nu_f = (nx - 1) * ny;
  nv_f = nx * (ny - 1);
  nf = nu_f + nv_f;
  const double hx = g.hx, hy = g.hy;

  std::vector<Trip> t;
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      t.emplace_back(uf(i, j), g.idx(i, j), 1 / hx);
      t.emplace_back(uf(i, j), g.idx(i - 1, j), -1 / hx);
    }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      t.emplace_back(vf(i, j), g.idx(i, j), 1 / hy);
      t.emplace_back(vf(i, j), g.idx(i, j - 1), -1 / hy);
    }
  G = from_triplets(nf, nc, t);

  // homogeneous Dirichlet ghosts: c_ghost = -c
  t.clear();
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int k = g.idx(i, j);
      double diag = 0;
      auto nb = [&](int ii, int jj, double w) {
        if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) {
          diag -= 2 * w;
        } else {
          t.emplace_back(k, g.idx(ii, jj), w);
          diag -= w;
        }
      };
      nb(i - 1, j, 1 / (hx * hx));
      nb(i + 1, j, 1 / (hx * hx));
      nb(i, j - 1, 1 / (hy * hy));
      nb(i, j + 1, 1 / (hy * hy));
      t.emplace_back(k, k, diag);
    }
  L = from_triplets(nc, nc, t);

  t.clear();
  std::vector<Trip> t2;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int k = g.idx(i, j);
      if (i + 1 < nx) t.emplace_back(k, uf(i + 1, j), 1 / hx);
      if (i > 0) t.emplace_back(k, uf(i, j), -1 / hx);
      if (j + 1 < ny) t2.emplace_back(k, vf(i, j + 1), 1 / hy);
      if (j > 0) t2.emplace_back(k, vf(i, j), -1 / hy);
    }
  E11 = from_triplets(nc, nf, t);
  E22 = from_triplets(nc, nf, t2);

  // shear rate at nodes with no-slip ghosts
  t.clear();
  const int nn = (nx + 1) * (ny + 1);
  node_weight.resize(nn);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int k = node(i, j);
      node_weight[k] = ((i == 0 || i == nx) ? 0.5 : 1.0) * ((j == 0 || j == ny) ? 0.5 : 1.0);
      // du/dy between u(i, j-1) and u(i, j)
      if (i > 0 && i < nx) {
        auto uval = [&](int jj, double w) {
          if (jj < 0)
            t.emplace_back(k, uf(i, 0), -w);
          else if (jj >= ny)
            t.emplace_back(k, uf(i, ny - 1), -w);
          else
            t.emplace_back(k, uf(i, jj), w);
        };
        uval(j, 0.5 / hy);
        uval(j - 1, -0.5 / hy);
      }
      if (j > 0 && j < ny) {
        auto vval = [&](int ii, double w) {
          if (ii < 0)
            t.emplace_back(k, vf(0, j), -w);
          else if (ii >= nx)
            t.emplace_back(k, vf(nx - 1, j), -w);
          else
            t.emplace_back(k, vf(ii, j), w);
        };
        vval(i, 0.5 / hx);
        vval(i - 1, -0.5 / hx);
      }
    }
  E12 = from_triplets(nn, nf, t);

  SpMat P = G.transpose() * G;
  P.coeffRef(0, 0) += 1.0;
  poisson = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  factor(*poisson, P, "pressure Poisson");
}

Vec NSACSolver::Mac::pack(const VectorField2D& v) const {
  Vec x(nf);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) x[uf(i, j)] = v.u[i + (g.nx + 1) * j];
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) x[vf(i, j)] = v.v[i + g.nx * j];
  return x;
}

void NSACSolver::Mac::unpack(const Vec& x, VectorField2D& v) const {
  v = VectorField2D(g, Staggering::MAC);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) v.u[i + (g.nx + 1) * j] = x[uf(i, j)];
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) v.v[i + g.nx * j] = x[vf(i, j)];
}

// (T u)_cell = 1/2 sum over faces of u_face times the one-sided difference of c across it
SpMat NSACSolver::Mac::transport(const Vec& c) const {
  std::vector<Trip> t;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) {
      const double d = 0.5 * (c[g.idx(i, j)] - c[g.idx(i - 1, j)]) / g.hx;
      t.emplace_back(g.idx(i - 1, j), uf(i, j), d);
      t.emplace_back(g.idx(i, j), uf(i, j), d);
    }
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double d = 0.5 * (c[g.idx(i, j)] - c[g.idx(i, j - 1)]) / g.hy;
      t.emplace_back(g.idx(i, j - 1), vf(i, j), d);
      t.emplace_back(g.idx(i, j), vf(i, j), d);
    }
  return from_triplets(g.size(), nf, t);
}

SpMat NSACSolver::Mac::convection(const Vec& a) const {
  const int nx = g.nx, ny = g.ny;
  const double hx = g.hx, hy = g.hy;
  auto au = [&](int i, int j) { return (i <= 0 || i >= nx) ? 0.0 : a[uf(i, j)]; };
  auto av = [&](int i, int j) { return (j <= 0 || j >= ny) ? 0.0 : a[vf(i, j)]; };
  std::vector<Trip> t;
  for (int j = 0; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      const int r = uf(i, j);
      const double ax = a[r];
      const double ay = 0.25 * (av(i - 1, j) + av(i, j) + av(i - 1, j + 1) + av(i, j + 1));
      if (i + 1 < nx) t.emplace_back(r, uf(i + 1, j), ax / (2 * hx));
      if (i - 1 > 0) t.emplace_back(r, uf(i - 1, j), -ax / (2 * hx));
      t.emplace_back(r, j + 1 < ny ? uf(i, j + 1) : r, (j + 1 < ny ? 1.0 : -1.0) * ay / (2 * hy));
      t.emplace_back(r, j > 0 ? uf(i, j - 1) : r, (j > 0 ? -1.0 : 1.0) * ay / (2 * hy));
    }
  for (int j = 1; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int r = vf(i, j);
      const double ay = a[r];
      const double ax = 0.25 * (au(i, j - 1) + au(i + 1, j - 1) + au(i, j) + au(i + 1, j));
      if (j + 1 < ny) t.emplace_back(r, vf(i, j + 1), ay / (2 * hy));
      if (j - 1 > 0) t.emplace_back(r, vf(i, j - 1), -ay / (2 * hy));
      t.emplace_back(r, i + 1 < nx ? vf(i + 1, j) : r, (i + 1 < nx ? 1.0 : -1.0) * ax / (2 * hx));
      t.emplace_back(r, i > 0 ? vf(i - 1, j) : r, (i > 0 ? -1.0 : 1.0) * ax / (2 * hx));
    }
  const SpMat C = from_triplets(nf, nf, t);
  return 0.5 * (C - SpMat(C.transpose()));
}

Vec NSACSolver::Mac::node_average(const Vec& cell) const {
  Vec out(node_weight.size());
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i <= g.nx; ++i) {
      double s = 0;
      int n = 0;
      for (int jj = j - 1; jj <= j; ++jj)
        for (int ii = i - 1; ii <= i; ++ii)
          if (ii >= 0 && ii < g.nx && jj >= 0 && jj < g.ny) {
            s += cell[g.idx(ii, jj)];
            ++n;
          }
      out[node(i, j)] = s / n;
    }
  return out;
}

SpMat NSACSolver::Mac::viscous(const Vec& nu_cell) const {
  const Vec nn = node_average(nu_cell).cwiseProduct(node_weight);
  SpMat K = SpMat(E11.transpose() * (2 * nu_cell).asDiagonal() * E11) +
            SpMat(E22.transpose() * (2 * nu_cell).asDiagonal() * E22) +
            SpMat(E12.transpose() * (4 * nn).asDiagonal() * E12);
  return K;
}

Vec NSACSolver::Mac::mu(const Vec& c, const ModelParams& p) const {
  const Vec b = L * Vec::Ones(c.size());
  return -p.eps * (L * c + b) + c.unaryExpr(p.well.df) / p.eps;
}

double NSACSolver::Mac::div_max(const SimState& s) const {
  return (G.transpose() * pack(s.v)).lpNorm<Eigen::Infinity>();
}

Vec NSACSolver::Mac::leray(const Vec& f) const {
  const Vec phi = poisson->solve(G.transpose() * f);
  return f - G * phi;
}

namespace {

// centred cell gradient of c with wall value b
void cell_gradient(const Grid2D& g, const Vec& c, double b, Vec& gx, Vec& gy) {
  gx.resize(g.size());
  gy.resize(g.size());
  auto at = [&](int i, int j, int i0, int j0) {
    if (i < 0 || i >= g.nx || j < 0 || j >= g.ny) return 2 * b - c[g.idx(i0, j0)];
    return c[g.idx(i, j)];
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      gx[g.idx(i, j)] = (at(i + 1, j, i, j) - at(i - 1, j, i, j)) / (2 * g.hx);
      gy[g.idx(i, j)] = (at(i, j + 1, i, j) - at(i, j - 1, i, j)) / (2 * g.hy);
    }
}

}  // namespace

VectorField2D NSACSolver::Mac::force(const SimState& s, const ModelParams& p, CapillaryForm form) const {
  const Vec& c = s.c.v;
  VectorField2D out(g, Staggering::MAC);
  if (form == CapillaryForm::ChemicalPotential) {
    const Vec b = L * Vec::Ones(c.size());
    const Vec f = transport(c).transpose() * Vec(-p.eps * (L * c + b));
    unpack(f, out);
    return out;
  }
  Vec gx, gy;
  cell_gradient(g, c, s.c.boundary_value, gx, gy);
  const Vec t11 = -p.eps * gx.cwiseAbs2(), t22 = -p.eps * gy.cwiseAbs2();
  const Vec t12 = node_average(Vec(-p.eps * gx.cwiseProduct(gy)));
  Vec f(nf);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i)
      f[uf(i, j)] = (t11[g.idx(i, j)] - t11[g.idx(i - 1, j)]) / g.hx + (t12[node(i, j + 1)] - t12[node(i, j)]) / g.hy;
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      f[vf(i, j)] = (t22[g.idx(i, j)] - t22[g.idx(i, j - 1)]) / g.hy + (t12[node(i + 1, j)] - t12[node(i, j)]) / g.hx;
  unpack(f, out);
  return out;
}

StepInfo NSACSolver::Mac::step(SimState& s, const ModelParams& p) const {
  StepInfo info;
  const int nc = g.size();
  const double eps = p.eps, dt = p.dt, S = p.stabilization;
  const Vec c0 = s.c.v;
  const bool ns = p.navier_stokes;
  const Vec u0 = ns ? pack(s.v) : Vec(Vec::Zero(nf));
  const SpMat T0 = transport(c0);
  SpMat I(nc, nc);
  I.setIdentity();
  SpMat M = I / eps;
  if (ns) M += dt * SpMat(T0 * SpMat(T0.transpose()));
  const SpMat Amu = -eps * L + (S / eps) * I;
  const Vec b = L * Vec::Ones(nc);
  const Vec r = (c0.unaryExpr(p.well.df) - S * c0) / eps;
  const SpMat sys = I / dt + SpMat(M * Amu);
  const Vec rhs = c0 / dt - T0 * u0 - M * Vec(r - eps * b);
  Eigen::SparseLU<SpMat> lu;
  factor(lu, sys, "Allen-Cahn step");
  const Vec c1 = lu.solve(rhs);
  info.ac_iterations = 1;
  s.c.v = c1;
  s.t += dt;
  if (!ns) return info;

  const Vec mu = Amu * c1 - eps * b + r;
  const Vec us = u0 + dt * (T0.transpose() * mu);
  const Vec nu = viscosity_field(p, c1, info.clamp_events);
  SpMat If(nf, nf);
  If.setIdentity();
  const SpMat A = If / dt + convection(u0) + viscous(nu);

  std::vector<Trip> t;
  const int n = nf + nc;
  t.reserve(A.nonZeros() + 4 * G.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < G.outerSize(); ++k)
    for (SpMat::InnerIterator it(G, k); it; ++it) {
      t.emplace_back(it.row(), nf + it.col(), it.value());
      if (it.col() != 0) t.emplace_back(nf + it.col(), it.row(), it.value());
    }
  t.emplace_back(nf, nf, 1.0);  // p = 0 in cell 0 replaces its redundant constraint
  SpMat K = from_triplets(n, n, t);
  Vec rhs2 = Vec::Zero(n);
  rhs2.head(nf) = us / dt;
  factor(lu, K, "momentum step");
  const Vec x = lu.solve(rhs2);
  unpack(x.head(nf), s.v);
  Vec pres = x.tail(nc);
  Vec gx, gy;
  cell_gradient(g, c1, s.c.boundary_value, gx, gy);
  pres -= c1.unaryExpr(p.well.f) / eps;
  if (p.capillary == CapillaryForm::Stress) pres -= 0.5 * eps * (gx.cwiseAbs2() + gy.cwiseAbs2());
  pres.array() -= pres.mean();
  s.p.v = pres;
  info.ns_iterations = 1;
  info.div_max = div_max(s);
  return info;
}

EnergyParts NSACSolver::Mac::energy(const SimState& s, const ModelParams& p) const {
  const double A = g.cell_area();
  const Vec& c = s.c.v;
  const Vec c1 = c.array() + 1.0;
  EnergyParts e;
  e.interfacial = A * (0.5 * p.eps * c1.dot(-(L * c1)) + c.unaryExpr(p.well.f).sum() / p.eps);
  const Vec m = mu(c, p);
  e.dissipation_rate = A * m.squaredNorm() / p.eps;
  if (s.v.u.size() == (g.nx + 1) * g.ny) {
    const Vec u = pack(s.v);
    e.kinetic = 0.5 * A * u.squaredNorm();
    int clamps = 0;
    e.dissipation_rate += A * u.dot(viscous(viscosity_field(p, c, clamps)) * u);
  }
  e.total = e.kinetic + e.interfacial;
  return e;
}

}  // namespace nsac
