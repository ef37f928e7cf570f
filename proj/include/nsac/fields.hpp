#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsac/fourier.hpp"

namespace nsac {

enum class Boundary { Periodic, Dirichlet };

// Uniform grid; point (i,j) sits at (x0 + i hx, y0 + j hy), storage index i + nx j.
// Periodic grids hold nodes of [xmin, xmax); Dirichlet grids hold cell centres.
struct Grid2D {
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0, hx = 1, hy = 1;
  Boundary bc = Boundary::Periodic;

  static Grid2D periodic(int nx, int ny, double xmin, double xmax, double ymin, double ymax);
  static Grid2D cells(int nx, int ny, double xmin, double xmax, double ymin, double ymax);

  int size() const { return nx * ny; }
  int idx(int i, int j) const { return i + nx * j; }
  double x(int i) const { return x0 + i * hx; }
  double y(int j) const { return y0 + j * hy; }
  double lx() const { return nx * hx; }
  double ly() const { return ny * hy; }
  double xmin() const { return bc == Boundary::Periodic ? x0 : x0 - 0.5 * hx; }
  double ymin() const { return bc == Boundary::Periodic ? y0 : y0 - 0.5 * hy; }
  double cell_area() const { return hx * hy; }
};

struct ScalarField2D {
  Grid2D grid;
  Eigen::VectorXd v;
  double boundary_value = 0.0;  // Dirichlet value on the wall

  ScalarField2D() = default;
  explicit ScalarField2D(const Grid2D& g, double fill = 0.0, double bval = 0.0)
      : grid(g), v(Eigen::VectorXd::Constant(g.size(), fill)), boundary_value(bval) {}

  double& operator()(int i, int j) { return v[grid.idx(i, j)]; }
  double operator()(int i, int j) const { return v[grid.idx(i, j)]; }
};

enum class Staggering { Collocated, MAC };

// Collocated: u, v at the grid points.  MAC: u on x-faces ((nx+1) x ny),
// v on y-faces (nx x (ny+1)), walls included and held at zero.
struct VectorField2D {
  Grid2D grid;
  Staggering stag = Staggering::Collocated;
  Eigen::VectorXd u, v;

  VectorField2D() = default;
  VectorField2D(const Grid2D& g, Staggering s);

  int u_size() const { return stag == Staggering::MAC ? (grid.nx + 1) * grid.ny : grid.size(); }
  int v_size() const { return stag == Staggering::MAC ? grid.nx * (grid.ny + 1) : grid.size(); }
};

// Pseudo-spectral operators on a periodic grid.
class SpectralOps {
public:
  explicit SpectralOps(const Grid2D& g);

  const Grid2D& grid() const { return grid_; }
  const Fft2& fft() const { return fft_; }

  void dx(const Eigen::VectorXd& f, Eigen::VectorXd& out) const;
  void dy(const Eigen::VectorXd& f, Eigen::VectorXd& out) const;
  void grad(const Eigen::VectorXd& f, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const;
  void laplacian(const Eigen::VectorXd& f, Eigen::VectorXd& out) const;
  void divergence(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& out) const;
  // (a - b Laplacian)^{-1}; the zero mode is left unchanged when a == 0
  void helmholtz_inverse(const Eigen::VectorXd& f, double a, double b, Eigen::VectorXd& out) const;
  // Leray projection onto discretely divergence-free fields
  void leray(Eigen::VectorXd& u, Eigen::VectorXd& v) const;
  // potential p with grad p = (I - P) w
  void gradient_potential(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& p) const;

  double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return a.dot(b) * grid_.cell_area();
  }

private:
  Grid2D grid_;
  Fft2 fft_;
  mutable std::vector<cplx> w1_, w2_;
};

// self-describing binary container: magic, JSON header length, JSON, little-endian doubles
void write_snapshot(const std::string& path, const std::vector<std::pair<std::string, const ScalarField2D*>>& fields,
                    double t);
struct Snapshot {
  double t = 0;
  std::vector<std::pair<std::string, ScalarField2D>> fields;
};
Snapshot read_snapshot(const std::string& path);

}  // namespace nsac
