#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsac/fields.hpp"
#include "nsac/fourier.hpp"

namespace nsac {

using Vec2 = Eigen::Vector2d;

inline Vec2 rotate_to_normal(const Vec2& tau) { return Vec2(-tau.y(), tau.x()); }

// Closed curve X0(s), s in [0,1), stored at uniform nodes and interpolated
// trigonometrically.  A nonzero `lift` gives X0(s + 1) = X0(s) + lift, used for
// straight or periodic-in-space fronts.
class Interface {
public:
  Interface() = default;
  explicit Interface(std::vector<Vec2> nodes, double t = 0.0, Vec2 lift = Vec2::Zero());

  static Interface circle(double R, int n, Vec2 center = Vec2::Zero(), bool ccw = true, double phase = 0.0);
  static Interface ellipse(double a, double b, int n, Vec2 center = Vec2::Zero());
  static Interface line(Vec2 origin, Vec2 period, int n);

  int size() const { return static_cast<int>(nodes_.size()); }
  double time() const { return t_; }
  void set_time(double t) { t_ = t; }
  const std::vector<Vec2>& nodes() const { return nodes_; }
  const Vec2& node(int j) const { return nodes_[j]; }
  const Vec2& lift() const { return lift_; }
  bool closed() const { return lift_.squaredNorm() == 0.0; }
  double s(int j) const { return static_cast<double>(j) / size(); }

  // interpolant and its s-derivatives (order 0..2 via tables, up to 3 exactly)
  Vec2 position(double s) const { return eval(s, 0); }
  Vec2 d1(double s) const { return eval(s, 1); }
  Vec2 d2(double s) const { return eval(s, 2); }
  Vec2 eval(double s, int order) const;
  Vec2 eval_exact(double s, int order) const;  // direct trigonometric sum

  double speed(double s) const { return d1(s).norm(); }
  Vec2 tangent(double s) const;
  Vec2 normal(double s) const { return rotate_to_normal(tangent(s)); }
  double curvature(double s) const;
  double curvature_d1(double s) const;
  double speed_d1(double s) const;

  // spectral values at the nodes
  const Eigen::VectorXd& node_speed() const { return speed_; }
  const Eigen::VectorXd& node_curvature() const { return curv_; }
  Vec2 node_tangent(int j) const { return tan_[j]; }
  Vec2 node_normal(int j) const { return rotate_to_normal(tan_[j]); }

  double length() const;
  double area() const;  // signed, positive for counterclockwise
  double max_abs_curvature() const { return curv_.lpNorm<Eigen::Infinity>(); }

  Interface resample(int m) const;
  Interface redistribute() const;  // uniform in arclength

  void write_csv(const std::string& path) const;
  static Interface read_csv(const std::string& path, double t = 0.0);

private:
  std::vector<Vec2> nodes_;
  double t_ = 0.0;
  Vec2 lift_ = Vec2::Zero();
  std::vector<cplx> cx_, cy_;  // coefficients of the periodic part
  int m_ = 0;                  // table size
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> table_;
  Eigen::VectorXd speed_, curv_;
  std::vector<Vec2> tan_;
};

struct Projection {
  double r = 0;
  double s = 0;
};

struct DistanceSample {
  double d = 0;
  double s = 0;
  bool saturated = false;
};

class TubularMap {
public:
  // delta <= 0 picks a quarter of the minimal radius of curvature
  TubularMap(Interface iface, double delta = 0.0);

  const Interface& interface() const { return iface_; }
  double delta() const { return delta_; }

  Projection project(const Vec2& x) const;  // throws OutsideTube
  DistanceSample signed_distance(const Vec2& x) const;
  Vec2 point(double r, double s) const { return iface_.position(s) + r * iface_.normal(s); }
  double jacobian(double r, double s) const { return 1.0 - r * iface_.curvature(s); }
  // exact for curves: -H/(1 - dH) at the foot point
  double laplacian_distance(const Vec2& x) const;

  struct TubeSample {
    ScalarField2D d;
    Eigen::VectorXd s;
    std::vector<uint8_t> saturated;
  };
  TubeSample sample(const Grid2D& g) const;

  struct LaplacianCoeffs {
    double H = 0;
    std::vector<double> kappa;  // kappa_1 .. kappa_{K-1}
  };
  // step <= 0 uses four spacings of the 4x refined node polygon
  LaplacianCoeffs laplacian_sd_coeffs(double s, int K, double step = 0.0) const;

private:
  Interface iface_;
  double delta_;
  // bucket grid over the bounding box
  double bx0_ = 0, by0_ = 0, bh_ = 1;
  int bnx_ = 0, bny_ = 0;
  std::vector<std::vector<int>> buckets_;
  std::vector<Vec2> poly_;  // dense polygon for inside tests

  bool nearest_node(const Vec2& x, double& s0, double& dist) const;
  bool inside_polygon(const Vec2& x) const;
  bool newton(const Vec2& x, double s0, Projection& p) const;
};

// h(s, t) at the nodes of an interface, with its time history
class HeightFunction {
public:
  HeightFunction() = default;
  explicit HeightFunction(Eigen::VectorXd h0, double t0 = 0.0);
  static HeightFunction zero(int n, double t0 = 0.0) { return HeightFunction(Eigen::VectorXd::Zero(n), t0); }

  void push(double t, Eigen::VectorXd h);
  int n() const { return static_cast<int>(h_.back().size()); }
  double time() const { return t_.back(); }
  const Eigen::VectorXd& current() const { return h_.back(); }
  const std::vector<double>& times() const { return t_; }
  const std::vector<Eigen::VectorXd>& history() const { return h_; }
  Eigen::VectorXd at(double t) const;  // linear in time between snapshots
  double eval(double s, int order = 0) const;
  double eval(double s, double t, int order) const;

  void write_csv(const std::string& path) const;

private:
  std::vector<double> t_;
  std::vector<Eigen::VectorXd> h_;
  mutable std::vector<cplx> coef_;
  mutable int coef_for_ = -1;
};

struct StretchedCoords {
  double epsilon = 0.1;
  HeightFunction h;
};

double stretched_rho(const StretchedCoords& sc, const TubularMap& tub, const Vec2& x);

// surface operators acting on nodal values h(s_j)
std::vector<Vec2> surface_grad(const Interface& iface, const Eigen::VectorXd& h);
Eigen::VectorXd surface_laplace(const Interface& iface, const Eigen::VectorXd& h);
Eigen::MatrixXd surface_laplace_matrix(const Interface& iface);
// D_t h = dh/dt - (dX0/dt . tau / |X0_s|) h_s
Eigen::VectorXd surface_material_deriv(const Interface& iface, const std::vector<Vec2>& dXdt,
                                       const Eigen::VectorXd& h, const Eigen::VectorXd& dhdt);

// w(x,t) = w_hat(rho(x,t), x, t) and the derivatives the chain rule needs
struct WHat {
  std::function<double(double, const Vec2&, double)> w, w_rho, w_rhorho, w_t, lap_x;
  std::function<Vec2(double, const Vec2&, double)> grad_x, grad_x_rho;
};

struct ChainRuleResidual {
  double dt = 0, grad = 0, lap = 0;
};

ChainRuleResidual chain_rule_check(const WHat& w, double eps, const std::function<Interface(double)>& geometry,
                                   double delta, const std::function<double(double, double)>& h, const Vec2& x,
                                   double t, double step);

}  // namespace nsac
