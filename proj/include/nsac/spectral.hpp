#pragma once

#include <functional>
#include <memory>
#include <optional>

#include <Eigen/Sparse>

#include "nsac/fields.hpp"
#include "nsac/geometry.hpp"
#include "nsac/profile.hpp"

namespace nsac {

enum class LaplacianKind { FivePoint, Spectral };

// L = -lap + f''(cA)/eps^2.  Periodic grids wrap; cell grids use homogeneous
// Neumann ghosts.  The spectral Laplacian needs a periodic grid.
class LinearizedOperator {
public:
  // kind defaults to Spectral on periodic grids and FivePoint otherwise
  LinearizedOperator(const ScalarField2D& cA, double eps, const DoubleWell& well = DoubleWell::standard(),
                     std::optional<LaplacianKind> kind = std::nullopt);

  const Grid2D& grid() const { return grid_; }
  double eps() const { return eps_; }
  LaplacianKind kind() const { return kind_; }
  const Eigen::VectorXd& potential() const { return V_; }
  const Eigen::SparseMatrix<double>& five_point() const { return A5_; }  // -lap_5 + V

  void apply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return a.dot(b) * grid_.cell_area(); }
  Eigen::VectorXd gradient_x(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient_y(const Eigen::VectorXd& x) const;

private:
  Grid2D grid_;
  double eps_;
  LaplacianKind kind_;
  Eigen::VectorXd V_;
  Eigen::SparseMatrix<double> A5_;
  std::shared_ptr<SpectralOps> ops_;
};

struct EigenPair {
  double lambda = 0;
  Eigen::VectorXd vector;  // unit Euclidean norm
  double residual = 0;     // |L v - lambda v| for the unit vector
  double shift = 0;
  int iterations = 0;      // Lanczos steps
  int factorizations = 0;  // shift trials
};

// Smallest eigenpair by shift-invert Lanczos.  The shift comes from the inertia of
// the five-point matrix, which bounds the spectral operator from below.
// Throws NonConvergence.
EigenPair min_eigenvalue(const LinearizedOperator& op, double tol = 1e-8, int max_iter = 600);

// Lambda = int eps |grad psi|^2 + f''(cA)/eps psi^2, optionally restricted by a
// 0/1 cell mask (edges count with the mean mask of their ends)
double quadratic_form(const LinearizedOperator& op, const Eigen::VectorXd& psi,
                      const Eigen::VectorXd* mask = nullptr);

// int over |d| < delta of |tau . grad psi|^2
double tangential_energy(const LinearizedOperator& op, const Eigen::VectorXd& psi, const TubularMap& tub,
                         double delta);

// beta(s) = (int_{I} theta0'^2)^{-1/2}, I = (-delta/eps - h, delta/eps - h)
double fiber_beta(const Profile& theta0, double eps, double delta, double h = 0.0);

struct FiberDecomposition {
  Eigen::VectorXd s, Z, beta;  // per interface node
  ScalarField2D projection, remainder;
  Eigen::VectorXi points;      // grid points nearest to each node
  double tail_mass = 0;        // largest share of int theta0'^2 outside I
  bool truncation_warning = false;
  double norm2 = 0, projection_norm2 = 0, remainder_norm2 = 0;
  double remainder_fraction() const { return std::sqrt(remainder_norm2 / norm2); }
};

// Orthogonal projection of psi onto a(s) theta0'(rho) inside the tube
// |d| < tub.delta(), rho = d/eps - h(s), with a(s) a trigonometric polynomial of
// the highest degree the grid resolves.  The grid measure carries the Jacobian
// 1 - d H.  The reconstruction is eps^{-1/2} Z(s) beta(s) theta0'(rho).
FiberDecomposition fiber_decompose(const ScalarField2D& psi, const TubularMap& tub, const Profile& theta0,
                                   double eps, const std::function<double(double)>& h = {});

}  // namespace nsac
