#pragma once

#include <functional>
#include <memory>
#include <string>

#include <Eigen/Dense>

namespace nsac {

struct DoubleWell {
  std::function<double(double)> f, df, d2f, d3f;
  double minus = -1.0, plus = 1.0;  // the two wells

  static DoubleWell standard();  // f(c) = (c^2 - 1)^2 / 8
};

using Viscosity = std::function<double(double)>;

// Chebyshev-Gauss-Lobatto nodes on [-L, L], ascending, with differentiation and
// Clenshaw-Curtis quadrature.
struct ChebGrid {
  int n = 0;  // polynomial degree; n + 1 nodes
  double L = 0;
  Eigen::VectorXd x, w, bary;
  Eigen::MatrixXd D;

  ChebGrid(int n, double L);
  int size() const { return n + 1; }
  int center() const { return n / 2; }
  double interpolate(const Eigen::VectorXd& values, double rho) const;
};

// Tabulated function on a Chebyshev grid with exponential tails beyond [-L, L].
class Profile {
public:
  Profile() = default;
  Profile(std::shared_ptr<const ChebGrid> g, Eigen::VectorXd values, double w_minus, double w_plus,
          double alpha_minus, double alpha_plus);

  double operator()(double rho) const { return eval(rho, 0); }
  double d1(double rho) const { return eval(rho, 1); }
  double d2(double rho) const { return eval(rho, 2); }
  double eval(double rho, int m) const;

  const ChebGrid& grid() const { return *grid_; }
  std::shared_ptr<const ChebGrid> grid_ptr() const { return grid_; }
  const Eigen::VectorXd& values() const { return v_[0]; }
  const Eigen::VectorXd& nodal(int m) const { return v_[m]; }
  double limit_minus() const { return wm_; }
  double limit_plus() const { return wp_; }
  double rate_minus() const { return am_; }
  double rate_plus() const { return ap_; }
  double L() const { return grid_->L; }

  // integral over the real line of g(rho, value, derivative) using the grid plus
  // a tail estimate g(+-L)/rate for integrands decaying at `tail_rate`
  double integrate(const std::function<double(double, double, double)>& g, double tail_rate) const;

  void write_csv(const std::string& path) const;

private:
  std::shared_ptr<const ChebGrid> grid_;
  Eigen::VectorXd v_[3];
  double wm_ = 0, wp_ = 0, am_ = 1, ap_ = 1;
  double tail_am_ = 1, tail_ap_ = 1;
};

// Profile of an analytic function sampled on a fresh grid
Profile sample_profile(const std::function<double(double)>& fn, int n, double L, double w_minus, double w_plus,
                       double alpha_minus, double alpha_plus);

Profile optimal_profile(const DoubleWell& well, double L = 24.0, int n = 320);

double surface_tension(const Profile& theta0);

// eta(rho) = (1 + tanh rho)/2, or the compactly supported variant switching on [-1, 1]
Profile default_eta(bool exact_support = false);

struct ExpansionConstants {
  double sigma_eta = 0;    // int nu(theta0) eta'
  double sigma0 = 0;       // int theta0'^2, used in the evolution laws
  double sigma0_eta = 0;   // int eta'^2
  double sigma2 = 0;       // int eta theta0'^2
};

ExpansionConstants expansion_constants(const Profile& theta0, const Profile& eta, const Viscosity& visc);

// Smooth cutoff: 1 on |z| <= delta, 0 on |z| >= 2 delta.
class Cutoff {
public:
  explicit Cutoff(double delta);
  double operator()(double z) const;
  double d1(double z) const;
  double delta() const { return delta_; }
  double max_moment() const { return max_moment_; }  // max of -z zeta'(z)

private:
  double delta_;
  double max_moment_ = 0;
};

Cutoff cutoff_zeta(double delta);

// smooth step 0 -> 1 on [0, 1], flat to all orders at both ends
double smooth_step(double t);
double smooth_step_d1(double t);

}  // namespace nsac
