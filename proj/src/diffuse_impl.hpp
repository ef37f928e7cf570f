#pragma once

#include <memory>

#include <Eigen/Sparse>

#include "nsac/diffuse.hpp"

namespace nsac {

using SpMat = Eigen::SparseMatrix<double>;

struct NSACSolver::Spectral {
  explicit Spectral(const Grid2D& g);
  SpectralOps ops;

  StepInfo step(SimState& s, const ModelParams& p) const;
  EnergyParts energy(const SimState& s, const ModelParams& p) const;
  Eigen::VectorXd mu(const Eigen::VectorXd& c, const ModelParams& p) const;
  double div_max(const SimState& s) const;
  VectorField2D force(const SimState& s, const ModelParams& p, CapillaryForm form) const;

  // B(a, u) = ((a.grad) u + div(a (x) u)) / 2
  void convect(const Eigen::VectorXd& ax, const Eigen::VectorXd& ay, const Eigen::VectorXd& u,
               const Eigen::VectorXd& v, Eigen::VectorXd& bu, Eigen::VectorXd& bv) const;
  // div(2 nu D u) and optionally |D u|^2
  void viscous(const Eigen::VectorXd& nu, const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& fu,
               Eigen::VectorXd& fv, Eigen::VectorXd* d2 = nullptr) const;
};

struct NSACSolver::Mac {
  explicit Mac(const Grid2D& g);
  Grid2D g;
  int nu_f = 0, nv_f = 0, nf = 0;  // interior u faces, v faces, total
  SpMat G;                         // cells -> interior faces
  SpMat L;                         // cell Laplacian, Dirichlet ghosts; lap c = L (c + 1)
  SpMat E11, E22, E12;             // strain components at cells, cells, nodes
  Eigen::VectorXd node_weight;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> poisson;  // G^T G with cell 0 pinned

  int uf(int i, int j) const { return (i - 1) + (g.nx - 1) * j; }      // 1 <= i <= nx-1
  int vf(int i, int j) const { return nu_f + i + g.nx * (j - 1); }      // 1 <= j <= ny-1
  int node(int i, int j) const { return i + (g.nx + 1) * j; }

  Eigen::VectorXd pack(const VectorField2D& v) const;
  void unpack(const Eigen::VectorXd& x, VectorField2D& v) const;

  SpMat transport(const Eigen::VectorXd& c) const;      // cells x faces
  SpMat convection(const Eigen::VectorXd& a) const;     // skew part of (a.grad)
  SpMat viscous(const Eigen::VectorXd& nu_cell) const;  // -div(2 nu D)
  Eigen::VectorXd node_average(const Eigen::VectorXd& cell) const;

  StepInfo step(SimState& s, const ModelParams& p) const;
  EnergyParts energy(const SimState& s, const ModelParams& p) const;
  Eigen::VectorXd mu(const Eigen::VectorXd& c, const ModelParams& p) const;
  double div_max(const SimState& s) const;
  VectorField2D force(const SimState& s, const ModelParams& p, CapillaryForm form) const;
  Eigen::VectorXd leray(const Eigen::VectorXd& f) const;
};

// nu(c) sampled with clamp counting
Eigen::VectorXd viscosity_field(const ModelParams& p, const Eigen::VectorXd& c, int& clamps);

}  // namespace nsac
