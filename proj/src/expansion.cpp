#include "nsac/expansion.hpp"

#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>

#include "nsac/errors.hpp"
#include "parallel.hpp"

namespace nsac {

namespace {

double normal_diff(const std::function<double(double)>& f, double k) {
  return (f(-2 * k) - 8 * f(-k) + 8 * f(k) - f(2 * k)) / (12 * k);
}

Vec2 normal_diff_vec(const std::function<Vec2(double)>& f, double k) {
  return (f(-2 * k) - 8 * f(-k) + 8 * f(k) - f(2 * k)) / (12 * k);
}

void warn_threshold(double h, double delta) {
  static std::once_flag once;
  if (h < 1e-6 * delta)
    std::call_once(once, [&] {
      std::cerr << "warning: switchover scale " << h << " is tiny; the off-interface quotient loses digits\n";
    });
}

}  // namespace

Vec2 LeadingVelocity::operator()(double rho, const Vec2& x, double t) const {
  const double e = (*eta)(rho);
  return e * plus(x, t) + (1 - e) * minus(x, t);
}

VectorField2D LeadingVelocity::sample(const Grid2D& g, const StretchedCoords& sc, const TubularMap& tub,
                                      double t) const {
  VectorField2D out(g, Staggering::Collocated);
  const bool has_h = !sc.h.times().empty();
  detail::parallel_rows(g.ny, [&](int j) {
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 x(g.x(i), g.y(j));
      const DistanceSample ds = tub.signed_distance(x);
      double rho = ds.d / sc.epsilon;
      if (has_h && !ds.saturated) rho -= sc.h.eval(ds.s);
      const Vec2 v = (*this)(rho, x, t);
      out.u[g.idx(i, j)] = v.x();
      out.v[g.idx(i, j)] = v.y();
    }
  });
  return out;
}

double branch_weight(double d, double h) {
  const double a = std::abs(d);
  if (a <= 1.5 * h) return 1.0;
  if (a >= 3.0 * h) return 0.0;
  const double t = (a - 1.5 * h) / (1.5 * h);
  return 1.0 - t * t * (3 - 2 * t);
}

AuxSample G0Field::at(const Vec2& x) const {
  warn_threshold(h, tub->delta());
  const Projection p = tub->project(x);
  const Interface& G = tub->interface();
  const Vec2 X = G.position(p.s), n = G.normal(p.s);
  const double H = G.curvature(p.s);
  const double V = normal_velocity(p.s);
  auto vn = [&](double r) { return v0(X + r * n, t).dot(n); };
  AuxSample out;
  out.d = p.r;
  out.on = -H * H - normal_diff(vn, 1e-2 * tub->delta());
  out.off = p.r != 0.0 ? (-H / (1 - p.r * H) - vn(p.r) + V) / p.r : out.on;
  const double w = branch_weight(p.r, h);
  out.value = w * out.on + (1 - w) * out.off;
  return out;
}

double G0Field::on_interface(double s) const {
  const Interface& G = tub->interface();
  const Vec2 X = G.position(s), n = G.normal(s);
  const double H = G.curvature(s);
  auto vn = [&](double r) { return v0(X + r * n, t).dot(n); };
  return -H * H - normal_diff(vn, 1e-2 * tub->delta());
}

ScalarField2D G0Field::sample(const Grid2D& g) const {
  ScalarField2D out(g);
  detail::parallel_rows(g.ny, [&](int j) {
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 x(g.x(i), g.y(j));
      if (tub->signed_distance(x).saturated) continue;
      out.v[g.idx(i, j)] = at(x).value;
    }
  });
  return out;
}

AuxVecSample U0Field::at(const Vec2& x) const {
  warn_threshold(h, tub->delta());
  const Projection p = tub->project(x);
  const Interface& G = tub->interface();
  const Vec2 X = G.position(p.s), n = G.normal(p.s);
  auto jump = [&](double r) -> Vec2 {
    const Vec2 y = X + r * n;
    return plus(y, t) - minus(y, t);
  };
  AuxVecSample out;
  out.d = p.r;
  out.on = normal_diff_vec(jump, 1e-2 * tub->delta());
  out.off = p.r != 0.0 ? Vec2(jump(p.r) / p.r) : out.on;
  const double w = branch_weight(p.r, h);
  out.value = w * out.on + (1 - w) * out.off;
  return out;
}

Vec2 U0Field::on_interface(double s) const {
  const Interface& G = tub->interface();
  const Vec2 X = G.position(s), n = G.normal(s);
  auto jump = [&](double r) -> Vec2 {
    const Vec2 y = X + r * n;
    return plus(y, t) - minus(y, t);
  };
  return normal_diff_vec(jump, 1e-2 * tub->delta());
}

VectorField2D U0Field::sample(const Grid2D& g) const {
  VectorField2D out(g, Staggering::Collocated);
  detail::parallel_rows(g.ny, [&](int j) {
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 x(g.x(i), g.y(j));
      if (tub->signed_distance(x).saturated) continue;
      const Vec2 u = at(x).value;
      out.u[g.idx(i, j)] = u.x();
      out.v[g.idx(i, j)] = u.y();
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

double C2Field::eval(double rho, double s, int m) const {
  const double sf = s - std::floor(s);
  return trig_eval(ca, sf) * p.eval(rho, m) + trig_eval(cb, sf) * q.eval(rho, m);
}

Profile C2Field::fiber(int j) const {
  const double a = grad_h1_sq[j], b = g0[j];
  return Profile(p.grid_ptr(), a * p.values() + b * q.values(), a * p.limit_minus() + b * q.limit_minus(),
                 a * p.limit_plus() + b * q.limit_plus(), std::min(p.rate_minus(), q.rate_minus()),
                 std::min(p.rate_plus(), q.rate_plus()));
}

C2Field solve_c2(const Profile& theta0, const DoubleWell& well, const Eigen::VectorXd& grad_h1_sq,
                 const Eigen::VectorXd& g0) {
  if (grad_h1_sq.size() != g0.size()) throw std::invalid_argument("solve_c2: coefficient sizes differ");
  C2Field c;
  // solver convention w'' - f'' w = A, so A is minus the right-hand side
  const LineRHS ap = LineRHS::sample([&](double r) { return -theta0.d2(r); }, theta0);
  const LineRHS aq = LineRHS::sample([&](double r) { return r * theta0.d1(r); }, theta0);
  c.p = solve_linearized(ap, theta0, well);
  c.q = solve_linearized(aq, theta0, well);
  c.grad_h1_sq = grad_h1_sq;
  c.g0 = g0;
  c.ca = dft(grad_h1_sq);
  c.cb = dft(g0);
  return c;
}

// ---------------------------------------------------------------------------

ApproxSolution::ApproxSolution(double eps, TubularMap tub, std::shared_ptr<const Profile> theta0, Cutoff zeta,
                               HeightFunction h_eps)
    : eps_(eps), tub_(std::move(tub)), theta0_(std::move(theta0)), zeta_(zeta), h_(std::move(h_eps)) {
  has_h_ = !h_.times().empty();
  if (2.0 * zeta_.delta() >= 3.0 * tub_.delta())
    throw std::invalid_argument("ApproxSolution: cutoff support 2 delta must lie inside the 3 delta tube");
}

double ApproxSolution::rho(double d, double s) const { return d / eps_ - (has_h_ ? h_.eval(s) : 0.0); }

double ApproxSolution::correction_term(double rho, double s) const {
  if (!corr_) return 0.0;
  const int N = corr_->N;
  double a = std::pow(eps_, N - 0.5) * theta0_->d1(rho);
  if (corr_->c2) a += std::pow(eps_, N + 1.5) * corr_->c2->eval(rho, s, 1);
  return a * corr_->h.eval(s);
}

double ApproxSolution::inner(double rho, double s) const { return (*theta0_)(rho) + correction_term(rho, s); }

double ApproxSolution::value(const Vec2& x) const {
  const DistanceSample ds = tub_.signed_distance(x);
  const double sg = ds.d > 0 ? 1.0 : -1.0;
  const double z = zeta_(ds.d);
  if (z == 0.0) return sg;
  return z * inner(rho(ds.d, ds.s), ds.s) + (1 - z) * sg;
}

ScalarField2D ApproxSolution::sample(const Grid2D& g) const {
  ScalarField2D out(g);
  detail::parallel_rows(g.ny, [&](int j) {
    for (int i = 0; i < g.nx; ++i) out.v[g.idx(i, j)] = value(Vec2(g.x(i), g.y(j)));
  });
  return out;
}

ApproxSolution ApproxSolution::with_correction(Correction c) const {
  ApproxSolution a = *this;
  a.corr_ = std::move(c);
  return a;
}

ApproxSolution build_cA0(double eps, const TubularMap& tub, std::shared_ptr<const Profile> theta0,
                         const Cutoff& zeta) {
  if (eps > zeta.delta()) {
    std::ostringstream os;
    os << "build_cA0: eps = " << eps << " exceeds delta = " << zeta.delta();
    throw LayerUnresolved(os.str());
  }
  return ApproxSolution(eps, tub, std::move(theta0), zeta);
}

ApproxSolution build_cA_corrected(const ApproxSolution& base, const C2Field& c2, const HeightFunction& hN12,
                                  int N) {
  ApproxSolution::Correction c;
  c.c2 = c2;
  c.h = hN12;
  c.N = N;
  return base.with_correction(std::move(c));
}

// ---------------------------------------------------------------------------

namespace {

struct SurfaceState {
  Eigen::MatrixXd A;     // lap_G - a
  Eigen::VectorXd adv;   // (X_t - w).tau / |X_s|
  Eigen::VectorXd g;
};

struct SurfaceGeometry {
  Eigen::MatrixXd lap;
  Eigen::VectorXd xt_tau;  // X_t.tau / |X_s|
  Eigen::VectorXd speed;
  std::vector<Vec2> tau;
  std::vector<double> s;
};

SurfaceGeometry surface_geometry(const SurfaceProblem& prob, int n, double t) {
  Interface G = prob.geometry(t);
  if (G.size() != n) G = G.resample(n);
  SurfaceGeometry sg;
  sg.lap = surface_laplace_matrix(G);
  sg.xt_tau = Eigen::VectorXd::Zero(n);
  sg.speed = G.node_speed();
  for (int j = 0; j < n; ++j) {
    sg.tau.push_back(G.node_tangent(j));
    sg.s.push_back(G.s(j));
  }
  if (!prob.static_geometry) {
    const double e = 1e-5 * std::max(1.0, std::abs(t));
    Interface gp = prob.geometry(t + e), gm = prob.geometry(t - e);
    if (gp.size() != n) gp = gp.resample(n);
    if (gm.size() != n) gm = gm.resample(n);
    for (int j = 0; j < n; ++j) sg.xt_tau[j] = ((gp.node(j) - gm.node(j)) / (2 * e)).dot(sg.tau[j]) / sg.speed[j];
  }
  return sg;
}

SurfaceState surface_state(const SurfaceProblem& prob, const SurfaceGeometry& sg, double t) {
  const int n = static_cast<int>(sg.s.size());
  SurfaceState st;
  st.A = sg.lap;
  st.adv = sg.xt_tau;
  st.g = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    const double s = sg.s[j];
    if (prob.w) st.adv[j] -= prob.w(s, t).dot(sg.tau[j]) / sg.speed[j];
    if (prob.a) st.A(j, j) -= prob.a(s, t);
    if (prob.g) st.g[j] = prob.g(s, t);
  }
  return st;
}

Eigen::VectorXd explicit_part(const SurfaceState& st, const Eigen::VectorXd& h) {
  return st.g + st.adv.cwiseProduct(periodic_derivative(h, 1));
}

}  // namespace

HeightFunction surface_parabolic_solve(const SurfaceProblem& prob, const Eigen::VectorXd& h0,
                                       const SurfaceSolveOptions& opt) {
  const int n = static_cast<int>(h0.size());
  const double span = opt.t_end - opt.t0;
  HeightFunction out(h0, opt.t0);
  if (span <= 0) return out;
  const int steps = std::max(1, static_cast<int>(std::ceil(span / opt.dt - 1e-9)));
  const double dt = span / steps;
  const double kmax = std::numbers::pi * n;

  // static geometry: one Laplacian, and one factorisation per scheme when a = 0
  std::optional<SurfaceGeometry> fixed;
  if (prob.static_geometry) fixed = surface_geometry(prob, n, opt.t0);
  auto state_at = [&](double t) {
    return fixed ? surface_state(prob, *fixed, t) : surface_state(prob, surface_geometry(prob, n, t), t);
  };
  const bool reuse = fixed && !prob.a;
  std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> lu2;

  SurfaceState prev = state_at(opt.t0);
  auto guard = [&](const SurfaceState& st, double t) {
    const double c = st.adv.lpNorm<Eigen::Infinity>();
    if (c * kmax * dt > opt.cfl) {
      std::ostringstream os;
      os << "surface_parabolic_solve: advective CFL " << c * kmax * dt << " at t = " << t;
      throw StepRejected(os.str(), opt.cfl / (c * kmax));
    }
  };
  guard(prev, opt.t0);
  Eigen::VectorXd hm = h0, h = h0;
  Eigen::VectorXd Em = explicit_part(prev, hm);
  for (int k = 1; k <= steps; ++k) {
    const double t = opt.t0 + k * dt;
    SurfaceState cur = state_at(t);
    guard(cur, t);
    Eigen::VectorXd hn;
    if (k == 1) {
      const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) / dt - cur.A;
      hn = M.partialPivLu().solve(h / dt + Em);
    } else {
      const Eigen::VectorXd E = explicit_part(prev, h);
      const Eigen::VectorXd rhs = (4 * h - hm) / (2 * dt) + 2 * E - Em;
      if (reuse) {
        if (!lu2) lu2.emplace(1.5 / dt * Eigen::MatrixXd::Identity(n, n) - cur.A);
        hn = lu2->solve(rhs);
      } else {
        const Eigen::MatrixXd M = 1.5 / dt * Eigen::MatrixXd::Identity(n, n) - cur.A;
        hn = M.partialPivLu().solve(rhs);
      }
      Em = E;
    }
    if (k == 1) Em = explicit_part(prev, h);
    hm = h;
    h = hn;
    prev = std::move(cur);
    if (k % opt.save_every == 0 || k == steps) out.push(t, h);
  }
  return out;
}

HeightFunction h1_evolution(const H1Inputs& in, const Profile& theta0, int n, const SurfaceSolveOptions& opt) {
  if (in.sigma0 <= 0 || in.sigma <= 0) throw std::invalid_argument("h1_evolution: sigma and sigma0 must be positive");
  // int rho theta0'^2 vanishes for symmetric wells; keep the quadrature value
  const double m1 = theta0.integrate([](double r, double, double d) { return r * d * d; }, 2 * theta0.rate_plus());
  SurfaceProblem prob;
  prob.geometry = in.geometry;
  prob.static_geometry = in.static_geometry;
  if (in.v0) {
    auto cache = std::make_shared<std::pair<double, Interface>>(std::nan(""), Interface());
    prob.w = [&in, cache](double s, double t) {
      if (!(cache->first == t)) *cache = {t, in.geometry(t)};
      return in.v0(cache->second.position(s), t);
    };
  }
  if (in.g0) prob.a = in.g0;
  prob.g = [&in, m1](double s, double t) {
    const double g0 = in.g0 ? in.g0(s, t) : 0.0;
    const double v1 = in.v1n ? in.v1n(s, t) : 0.0;
    return (-g0 * m1 - in.sigma * v1) / in.sigma0;
  };
  return surface_parabolic_solve(prob, Eigen::VectorXd::Zero(n), opt);
}

}  // namespace nsac
