#include "nsac/sharp.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "nsac/errors.hpp"

namespace nsac {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// F with F' = f - mean(f), F(0) = 0
Eigen::VectorXd antiderivative(const Eigen::VectorXd& f) {
  const int n = static_cast<int>(f.size());
  auto c = dft(f);
  c[0] = 0.0;
  if (n % 2 == 0) c[n / 2] = 0.0;
  for (int j = 1; j < n; ++j) c[j] /= cplx(0.0, kTwoPi * wavenumber(j, n));
  Eigen::VectorXd F = idft_real(c);
  return F.array() - F[0];
}

Eigen::VectorXd alphas(int n) { return Eigen::VectorXd::LinSpaced(n, 0.0, 1.0 - 1.0 / n); }

std::vector<Vec2> reconstruct(const Eigen::VectorXd& theta, double L, const Vec2& x0) {
  const int n = static_cast<int>(theta.size());
  const Eigen::VectorXd cx = antiderivative(theta.array().cos().matrix());
  const Eigen::VectorXd cy = antiderivative(theta.array().sin().matrix());
  std::vector<Vec2> X(n);
  for (int j = 0; j < n; ++j) X[j] = x0 + L * Vec2(cx[j], cy[j]);
  return X;
}

struct Rates {
  Eigen::VectorXd phi;  // explicit part
  double L = 0;
  Vec2 x0 = Vec2::Zero();
};

Rates explicit_rates(const Eigen::VectorXd& phi, double L, const Vec2& x0, int m, const VecFn& v, double t,
                     const FrontOptions& opt) {
  const int n = static_cast<int>(phi.size());
  const Eigen::VectorXd theta = kTwoPi * m * alphas(n) + phi;
  const Eigen::VectorXd ta = periodic_derivative(phi, 1).array() + kTwoPi * m;
  const std::vector<Vec2> X = reconstruct(theta, L, x0);
  Eigen::VectorXd vn(n);
  for (int j = 0; j < n; ++j) vn[j] = Vec2(-std::sin(theta[j]), std::cos(theta[j])).dot(v(X[j], t));
  Eigen::VectorXd V = vn;
  if (opt.curvature) V += ta / L;
  Rates r;
  r.L = -V.cwiseProduct(ta).mean();
  const Eigen::VectorXd T = antiderivative(V.cwiseProduct(ta));
  r.phi = (periodic_derivative(vn, 1) + T.cwiseProduct(ta)) / L;
  r.x0 = V[0] * Vec2(-std::sin(theta[0]), std::cos(theta[0])) + T[0] * Vec2(std::cos(theta[0]), std::sin(theta[0]));
  return r;
}

// (1 - c d^2/da^2 / L^2)^{-1}
Eigen::VectorXd implicit_solve(const Eigen::VectorXd& rhs, double c, double L) {
  const int n = static_cast<int>(rhs.size());
  auto f = dft(rhs);
  for (int j = 0; j < n; ++j) {
    const double k = kTwoPi * wavenumber(j, n);
    f[j] /= 1.0 + c * k * k / (L * L);
  }
  return idft_real(f);
}

Eigen::VectorXd smoothing(const Eigen::VectorXd& phi, double L) {
  return periodic_derivative(phi, 2) / (L * L);
}

void check_length(double L, double Lt, double dt, double t) {
  if (!(L > 0) || !std::isfinite(L) || std::abs(Lt) * dt > 0.25 * L) {
    std::ostringstream os;
    os << "front collapses near t = " << t << " (length " << L << ")";
    throw CurvatureBlowup(os.str());
  }
}

}  // namespace

FrontState FrontState::from_interface(const Interface& iface, int n) {
  if (!iface.closed()) throw std::invalid_argument("FrontState: closed curve required");
  Interface u = n > 0 && n != iface.size() ? iface.resample(n) : iface;
  u = u.redistribute().redistribute();
  const int N = u.size();
  FrontState f;
  f.t = iface.time();
  f.L = u.length();
  f.x0 = u.node(0);
  Eigen::VectorXd th(N);
  for (int j = 0; j < N; ++j) th[j] = std::atan2(u.node_tangent(j).y(), u.node_tangent(j).x());
  for (int j = 1; j < N; ++j) th[j] = th[j - 1] + std::remainder(th[j] - th[j - 1], kTwoPi);
  const double total = th[N - 1] - th[0] + std::remainder(th[0] - th[N - 1], kTwoPi);
  f.winding = static_cast<int>(std::lround(total / kTwoPi));
  f.phi = th - kTwoPi * f.winding * alphas(N);
  return f;
}

Eigen::VectorXd FrontState::theta() const { return kTwoPi * winding * alphas(size()) + phi; }

Interface FrontState::interface() const { return Interface(reconstruct(theta(), L, x0), t); }

Eigen::VectorXd FrontState::curvature() const {
  return (periodic_derivative(phi, 1).array() + kTwoPi * winding) / L;
}

FrontState mcf_convected_step(const FrontState& y, const VecFn& v, double dt, const FrontOptions& opt) {
  const int n = y.size();
  const double turning = y.curvature().cwiseAbs().maxCoeff() * y.L / n;
  if (turning > opt.max_curvature_nodes) {
    std::ostringstream os;
    os << "curvature no longer resolved at t = " << y.t << " (turning per node " << turning << ")";
    throw CurvatureBlowup(os.str());
  }
  const double g = 1.0 - 1.0 / std::sqrt(2.0);
  const double d = 1.0 - 1.0 / (2.0 * g);
  const double ci = opt.curvature ? 1.0 : 0.0;

  // stage 1 is the current state
  const Rates f1 = explicit_rates(y.phi, y.L, y.x0, y.winding, v, y.t, opt);
  check_length(y.L, f1.L, dt, y.t);
  // stage 2 at t + g dt
  const double L2 = y.L + dt * g * f1.L;
  const Vec2 x2 = y.x0 + dt * g * f1.x0;
  const Eigen::VectorXd p2 = implicit_solve(y.phi + dt * g * f1.phi, ci * dt * g, L2);
  const Rates f2 = explicit_rates(p2, L2, x2, y.winding, v, y.t + g * dt, opt);
  check_length(L2, f2.L, dt, y.t);
  // stage 3 at t + dt
  FrontState out = y;
  out.t = y.t + dt;
  out.L = y.L + dt * (d * f1.L + (1 - d) * f2.L);
  out.x0 = y.x0 + dt * (d * f1.x0 + (1 - d) * f2.x0);
  Eigen::VectorXd rhs = y.phi + dt * (d * f1.phi + (1 - d) * f2.phi);
  if (opt.curvature) rhs += dt * (1 - g) * smoothing(p2, L2);
  out.phi = implicit_solve(rhs, ci * dt * g, out.L);
  check_length(out.L, 0.0, dt, out.t);
  return out;
}

std::vector<FrontState> mcf_convected_run(const FrontState& front, const VecFn& v, double t_end, double dt,
                                          int save_every, const FrontOptions& opt) {
  std::vector<FrontState> hist{front};
  const double span = t_end - front.t;
  if (span <= 0) return hist;
  const int steps = std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
  const double h = span / steps;
  FrontState y = front;
  for (int k = 1; k <= steps; ++k) {
    y = mcf_convected_step(y, v, h, opt);
    if (k == steps) y.t = t_end;
    if (k % save_every == 0 || k == steps) hist.push_back(y);
  }
  return hist;
}

double kinematic_consistency(const std::vector<FrontState>& history, const VecFn& v, const std::vector<Vec2>& probes,
                             const FrontOptions& opt) {
  double worst = 0.0;
  for (size_t k = 1; k + 1 < history.size(); ++k) {
    const TubularMap tm(history[k - 1].interface()), tc(history[k].interface()), tp(history[k + 1].interface());
    const double dt = history[k + 1].t - history[k - 1].t;
    for (const Vec2& x : probes) {
      const auto dc = tc.signed_distance(x);
      if (dc.saturated) continue;
      const double ddt = (tp.signed_distance(x).d - tm.signed_distance(x).d) / dt;
      const Interface& G = tc.interface();
      const Vec2 X = G.position(dc.s), n = G.normal(dc.s);
      double V = n.dot(v(X, history[k].t));
      if (opt.curvature) V += G.curvature(dc.s);
      worst = std::max(worst, std::abs(ddt + V));
    }
  }
  return worst;
}

std::vector<StressJumpSample> stress_jump_residual(const VelocityFn& vp, const VelocityFn& vm, const ScalarFn& pp,
                                                   const ScalarFn& pm, const Interface& front, double sigma,
                                                   double nu_plus, double nu_minus, double step) {
  const int n = front.size();
  std::vector<StressJumpSample> out(n);
  const double ds = 1e-4;
  auto finite = [](const Vec2& a) {
    if (!a.allFinite()) throw SolverFailure("stress_jump_residual: one-sided stencil left the phase domain");
    return a;
  };
  auto traction = [&](const VelocityFn& v, const ScalarFn& p, double nu, double side, double s) -> Vec2 {
    const Vec2 X = front.position(s), nrm = front.normal(s), tau = front.tangent(s);
    const double h = side * step;
    const Vec2 v0 = finite(v(X)), v1 = finite(v(X + h * nrm)), v2 = finite(v(X + 2 * h * nrm));
    const Vec2 dn = (-3 * v0 + 4 * v1 - v2) / (2 * h);
    // tangential derivative along the curve, staying on the interface
    const Vec2 dt = (finite(v(front.position(s + ds))) - finite(v(front.position(s - ds)))) / (2 * ds * front.speed(s));
    const Eigen::Matrix2d G = dn * nrm.transpose() + dt * tau.transpose();
    const Eigen::Matrix2d D = 0.5 * (G + G.transpose());
    const double pv = p(X);
    if (!std::isfinite(pv)) throw SolverFailure("stress_jump_residual: pressure is not finite on the interface");
    return 2 * nu * D * nrm - pv * nrm;
  };
  for (int j = 0; j < n; ++j) {
    const double s = front.s(j);
    StressJumpSample& r = out[j];
    r.s = s;
    r.traction_plus = traction(vp, pp, nu_plus, 1.0, s);
    r.traction_minus = traction(vm, pm, nu_minus, -1.0, s);
    r.residual = r.traction_plus - r.traction_minus - sigma * front.node_curvature()[j] * front.node_normal(j);
  }
  return out;
}

void write_front_history(const std::string& path, const std::vector<FrontState>& history) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  os << "t,s,x,y\n";
  for (const auto& f : history) {
    const Interface G = f.interface();
    for (int j = 0; j < G.size(); ++j) os << f.t << ',' << G.s(j) << ',' << G.node(j).x() << ',' << G.node(j).y() << '\n';
  }
}

}  // namespace nsac
