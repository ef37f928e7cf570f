#include "nsac/inner_ode.hpp"

#include <cmath>
#include <sstream>

#include "nsac/errors.hpp"

namespace nsac {

LineRHS LineRHS::sample(const std::function<double(double)>& fn, const Profile& on, double lim_minus,
                        double lim_plus, double rate) {
  LineRHS r;
  r.grid = on.grid_ptr();
  r.a.resize(r.grid->size());
  for (int j = 0; j < r.grid->size(); ++j) r.a[j] = fn(r.grid->x[j]);
  r.lim_minus = lim_minus;
  r.lim_plus = lim_plus;
  r.rate = rate;
  return r;
}

LineRHS LineRHS::combine(double a1, const LineRHS& x, double a2, const LineRHS& y) {
  if (x.grid != y.grid) throw std::invalid_argument("LineRHS::combine: grids differ");
  LineRHS r;
  r.grid = x.grid;
  r.a = a1 * x.a + a2 * y.a;
  r.lim_minus = a1 * x.lim_minus + a2 * y.lim_minus;
  r.lim_plus = a1 * x.lim_plus + a2 * y.lim_plus;
  r.rate = std::min(x.rate, y.rate);
  return r;
}

namespace {

void check_grid(const LineRHS& A, const Profile& p) {
  if (A.grid.get() != &p.grid()) throw std::invalid_argument("right-hand side is not on the profile grid");
}

double l2(const ChebGrid& g, const Eigen::VectorXd& v) {
  return std::sqrt((g.w.array() * v.array().square()).sum());
}

}  // namespace

double compatibility_ac(const LineRHS& A, const Profile& theta0) {
  check_grid(A, theta0);
  const auto& g = theta0.grid();
  const auto& d = theta0.nodal(1);
  double s = (g.w.array() * A.a.array() * d.array()).sum();
  s += A.a[g.n] * d[g.n] / theta0.rate_plus() + A.a[0] * d[0] / theta0.rate_minus();
  return s;
}

Profile solve_linearized(const LineRHS& A, const Profile& theta0, const DoubleWell& well) {
  check_grid(A, theta0);
  const auto& g = theta0.grid();
  const auto& d = theta0.nodal(1);
  const double comp = compatibility_ac(A, theta0);
  const double scale = l2(g, A.a) * l2(g, d);
  if (std::abs(comp) > 1e-8 * scale) {
    std::ostringstream os;
    os << "solve_linearized: int A theta0' = " << comp << " violates compatibility";
    throw IncompatibleRHS(os.str());
  }
  const int N = g.size();
  const double fp = well.d2f(theta0.limit_plus()), fm = well.d2f(theta0.limit_minus());
  const double wp = -A.lim_plus / fp, wm = -A.lim_minus / fm;
  const double ap = std::sqrt(fp), am = std::sqrt(fm);

  // bordered system: the lambda theta0' column absorbs the kernel, the last row pins w(0)
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N + 1, N + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
  const Eigen::MatrixXd D2 = g.D * g.D;
  for (int i = 1; i < N - 1; ++i) {
    M.row(i).head(N) = D2.row(i);
    M(i, i) -= well.d2f(theta0.values()[i]);
    M(i, N) = -d[i];
    rhs[i] = A.a[i];
  }
  M.row(0).head(N) = g.D.row(0);
  M(0, 0) -= am;
  rhs[0] = -am * wm;
  M.row(N - 1).head(N) = g.D.row(N - 1);
  M(N - 1, N - 1) += ap;
  rhs[N - 1] = ap * wp;
  M(N, g.center()) = 1.0;
  Eigen::VectorXd sol = M.partialPivLu().solve(rhs);
  if (!sol.allFinite()) throw NonconvergentBVP("solve_linearized: singular system");
  sol[g.center()] = 0.0;
  return Profile(theta0.grid_ptr(), sol.head(N), wm, wp, am, ap);
}

Profile solve_viscous(const LineRHS& B, const Profile& theta0, const Viscosity& visc) {
  check_grid(B, theta0);
  const auto& g = theta0.grid();
  const int N = g.size();
  double total = (g.w.array() * B.a.array()).sum();
  double rm = B.rate, rp = B.rate;
  // fitted exponential rates at the ends
  if (B.a[0] != 0.0) {
    const double r = (g.D.row(0) * B.a)(0) / B.a[0];
    if (std::isfinite(r) && r > 0) rm = r;
  }
  if (B.a[N - 1] != 0.0) {
    const double r = -(g.D.row(N - 1) * B.a)(0) / B.a[N - 1];
    if (std::isfinite(r) && r > 0) rp = r;
  }
  const double tail_m = B.a[0] / rm, tail_p = B.a[N - 1] / rp;
  total += tail_m + tail_p;
  const double mass = (g.w.array() * B.a.array().abs()).sum() + std::abs(tail_m) + std::abs(tail_p);
  if (std::abs(total) > 1e-8 * std::max(mass, 1e-300)) {
    std::ostringstream os;
    os << "solve_viscous: int B = " << total << " is not zero";
    throw IncompatibleRHS(os.str());
  }

  // inner integral from -infinity: D I = B with I(-L) = tail
  Eigen::MatrixXd M = g.D;
  Eigen::VectorXd rhs = B.a;
  M.row(0).setZero();
  M(0, 0) = 1.0;
  rhs[0] = tail_m;
  Eigen::VectorXd I = M.partialPivLu().solve(rhs);

  Eigen::VectorXd dw(N);
  for (int j = 0; j < N; ++j) dw[j] = I[j] / visc(theta0.values()[j]);

  // outer integral from 0
  Eigen::MatrixXd M2 = g.D;
  Eigen::VectorXd r2 = dw;
  const int c = g.center();
  M2.row(c).setZero();
  M2(c, c) = 1.0;
  r2[c] = 0.0;
  Eigen::VectorXd w = M2.partialPivLu().solve(r2);
  w[c] = 0.0;

  const double np = visc(theta0.limit_plus()), nm = visc(theta0.limit_minus());
  const double wp = w[N - 1] + I[N - 1] / (np * rp);
  const double wm = w[0] - I[0] / (nm * rm);
  return Profile(theta0.grid_ptr(), w, wm, wp, rm, rp);
}

DecayFit matching_residual(const Profile& w, double w_plus, double w_minus, double alpha_expected) {
  const auto& g = w.grid();
  const auto& v = w.values();
  const double floor = 1e-13 * std::max(1.0, v.lpNorm<Eigen::Infinity>());
  DecayFit fit;

  auto side = [&](bool plus, double limit, double& alpha, double& C) {
    std::vector<double> xs, ys;
    for (int j = 0; j < g.size(); ++j) {
      const double r = plus ? g.x[j] : -g.x[j];
      if (r < 2.0 * g.L / 3.0) continue;
      const double e = std::abs(v[j] - limit);
      if (e <= floor) continue;
      xs.push_back(r);
      ys.push_back(e);
    }
    if (xs.size() < 3) {
      alpha = std::numeric_limits<double>::infinity();
      C = 0.0;
      return;
    }
    // order by distance and require decrease
    std::vector<size_t> idx(xs.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    for (size_t i = 1; i < idx.size(); ++i)
      if (ys[idx[i]] > ys[idx[i - 1]] + floor)
        throw NoDecay("matching_residual: far-field tail is not decreasing");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
      const double ly = std::log(ys[i]);
      sx += xs[i];
      sy += ly;
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ly;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    alpha = -slope;
    C = std::exp((sy - slope * sx) / n);
  };
  side(true, w_plus, fit.alpha_plus, fit.c_plus);
  side(false, w_minus, fit.alpha_minus, fit.c_minus);
  fit.pass = fit.alpha_plus >= 0.9 * alpha_expected && fit.alpha_minus >= 0.9 * alpha_expected;
  return fit;
}

}  // namespace nsac
