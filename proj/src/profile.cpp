#include "nsac/profile.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "nsac/errors.hpp"

namespace nsac {

DoubleWell DoubleWell::standard() {
  DoubleWell w;
  w.f = [](double c) { return 0.125 * (c * c - 1.0) * (c * c - 1.0); };
  w.df = [](double c) { return 0.5 * c * (c * c - 1.0); };
  w.d2f = [](double c) { return 0.5 * (3.0 * c * c - 1.0); };
  w.d3f = [](double c) { return 3.0 * c; };
  return w;
}

ChebGrid::ChebGrid(int n_, double L_) : n(n_), L(L_) {
  if (n < 2) throw std::invalid_argument("ChebGrid: n too small");
  const double pi = std::numbers::pi;
  x.resize(n + 1);
  bary.resize(n + 1);
  for (int j = 0; j <= n; ++j) {
    x[j] = -L * std::cos(pi * j / n);
    bary[j] = (j % 2 ? -1.0 : 1.0) * ((j == 0 || j == n) ? 0.5 : 1.0);
  }
  if (n % 2 == 0) x[n / 2] = 0.0;

  D.setZero(n + 1, n + 1);
  for (int i = 0; i <= n; ++i) {
    double s = 0.0;
    for (int j = 0; j <= n; ++j) {
      if (i == j) continue;
      D(i, j) = (bary[j] / bary[i]) / (x[i] - x[j]);
      s += D(i, j);
    }
    D(i, i) = -s;
  }

  // Clenshaw-Curtis
  w.setZero(n + 1);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n - 1);
  auto theta = [&](int j) { return pi * j / n; };
  if (n % 2 == 0) {
    w[0] = w[n] = 1.0 / (n * n - 1.0);
    for (int k = 1; k < n / 2; ++k)
      for (int j = 1; j < n; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
    for (int j = 1; j < n; ++j) v[j - 1] -= std::cos(n * theta(j)) / (n * n - 1.0);
  } else {
    w[0] = w[n] = 1.0 / (static_cast<double>(n) * n);
    for (int k = 1; k <= (n - 1) / 2; ++k)
      for (int j = 1; j < n; ++j) v[j - 1] -= 2.0 * std::cos(2.0 * k * theta(j)) / (4.0 * k * k - 1.0);
  }
  for (int j = 1; j < n; ++j) w[j] = 2.0 * v[j - 1] / n;
  w *= L;
}

double ChebGrid::interpolate(const Eigen::VectorXd& values, double rho) const {
  double num = 0.0, den = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double dx = rho - x[j];
    if (dx == 0.0) return values[j];
    const double t = bary[j] / dx;
    num += t * values[j];
    den += t;
  }
  return num / den;
}

Profile::Profile(std::shared_ptr<const ChebGrid> g, Eigen::VectorXd values, double w_minus, double w_plus,
                 double alpha_minus, double alpha_plus)
    : grid_(std::move(g)), wm_(w_minus), wp_(w_plus), am_(alpha_minus), ap_(alpha_plus) {
  v_[0] = std::move(values);
  v_[1] = grid_->D * v_[0];
  v_[2] = grid_->D * v_[1];
  const int n = grid_->n;
  // fitted tail rates, falling back to the nominal ones
  const double ep = v_[0][n] - wp_, em = v_[0][0] - wm_;
  tail_ap_ = ap_;
  tail_am_ = am_;
  if (ep != 0.0) {
    const double r = -v_[1][n] / ep;
    if (std::isfinite(r) && r > 0.0) tail_ap_ = r;
  }
  if (em != 0.0) {
    const double r = v_[1][0] / em;
    if (std::isfinite(r) && r > 0.0) tail_am_ = r;
  }
}

double Profile::eval(double rho, int m) const {
  const double L = grid_->L;
  if (rho >= -L && rho <= L) {
    if (m <= 2) return grid_->interpolate(v_[m], rho);
    Eigen::VectorXd d = grid_->D * v_[2];
    for (int k = 3; k < m; ++k) d = grid_->D * d;
    return grid_->interpolate(d, rho);
  }
  if (rho > L) {
    const double a = v_[0][grid_->n] - wp_;
    const double e = a * std::exp(-tail_ap_ * (rho - L));
    return m == 0 ? wp_ + e : std::pow(-tail_ap_, m) * e;
  }
  const double a = v_[0][0] - wm_;
  const double e = a * std::exp(tail_am_ * (rho + L));
  return m == 0 ? wm_ + e : std::pow(tail_am_, m) * e;
}

double Profile::integrate(const std::function<double(double, double, double)>& g, double tail_rate) const {
  const auto& G = *grid_;
  double s = 0.0;
  for (int j = 0; j <= G.n; ++j) s += G.w[j] * g(G.x[j], v_[0][j], v_[1][j]);
  if (tail_rate > 0.0) {
    s += g(G.x[G.n], v_[0][G.n], v_[1][G.n]) / tail_rate;
    s += g(G.x[0], v_[0][0], v_[1][0]) / tail_rate;
  }
  return s;
}

void Profile::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  os << "rho,value,derivative\n";
  for (int j = 0; j <= grid_->n; ++j) os << grid_->x[j] << ',' << v_[0][j] << ',' << v_[1][j] << '\n';
}

Profile sample_profile(const std::function<double(double)>& fn, int n, double L, double w_minus, double w_plus,
                       double alpha_minus, double alpha_plus) {
  auto g = std::make_shared<ChebGrid>(n, L);
  Eigen::VectorXd v(g->size());
  for (int j = 0; j < g->size(); ++j) v[j] = fn(g->x[j]);
  return Profile(g, v, w_minus, w_plus, alpha_minus, alpha_plus);
}

Profile optimal_profile(const DoubleWell& well, double L, int n) {
  const double ap = std::sqrt(well.d2f(well.plus));
  const double am = std::sqrt(well.d2f(well.minus));
  if (n < 256) throw std::invalid_argument("optimal_profile: n must be at least 256");
  if (L < 20.0 / std::min(ap, am)) throw std::invalid_argument("optimal_profile: L too short");
  if (n % 2) ++n;

  auto g = std::make_shared<ChebGrid>(n, L);
  const int N = g->size();
  const int c0 = g->center();
  const Eigen::MatrixXd D2 = g->D * g->D;

  // unknowns: theta at the nodes, then the wave speed
  Eigen::VectorXd u(N + 1);
  const double wm = well.minus, wp = well.plus;
  for (int j = 0; j < N; ++j)
    u[j] = wm + (wp - wm) * 0.5 * (1.0 + std::tanh(0.5 * std::min(ap, am) * g->x[j]));
  u[N] = 0.0;

  auto residual = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd th = q.head(N);
    Eigen::VectorXd d1 = g->D * th, d2 = D2 * th;
    Eigen::VectorXd F(N + 1);
    for (int i = 1; i < N - 1; ++i) F[i] = -d2[i] - q[N] * d1[i] + well.df(th[i]);
    F[0] = d1[0] - am * (th[0] - wm);
    F[N - 1] = d1[N - 1] + ap * (th[N - 1] - wp);
    F[N] = th[c0];
    return F;
  };

  Eigen::VectorXd F = residual(u);
  double fn = F.lpNorm<Eigen::Infinity>();
  bool done = false;
  for (int it = 0; it < 80 && !done; ++it) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(N + 1, N + 1);
    Eigen::VectorXd d1 = g->D * u.head(N);
    for (int i = 1; i < N - 1; ++i) {
      J.row(i).head(N) = -D2.row(i) - u[N] * g->D.row(i);
      J(i, i) += well.d2f(u[i]);
      J(i, N) = -d1[i];
    }
    J.row(0).head(N) = g->D.row(0);
    J(0, 0) -= am;
    J.row(N - 1).head(N) = g->D.row(N - 1);
    J(N - 1, N - 1) += ap;
    J(N, c0) = 1.0;
    Eigen::VectorXd du = J.partialPivLu().solve(-F);

    double lam = 1.0;
    Eigen::VectorXd un;
    Eigen::VectorXd Fn;
    double fnn = 0;
    for (int k = 0; k < 30; ++k) {
      un = u + lam * du;
      Fn = residual(un);
      fnn = Fn.lpNorm<Eigen::Infinity>();
      if (fnn < (1.0 - 0.25 * lam) * fn || fnn < 1e-10) break;
      lam *= 0.5;
    }
    const double step = lam * du.lpNorm<Eigen::Infinity>();
    u = un;
    F = Fn;
    fn = fnn;
    if (step < 1e-14 || (fn < 1e-9 && step < 1e-12)) done = true;
  }
  if (!done && fn > 1e-7) throw NonconvergentBVP("optimal_profile: Newton stalled, residual " + std::to_string(fn));
  return Profile(g, u.head(N), wm, wp, am, ap);
}

double surface_tension(const Profile& theta0) {
  const double r = 2.0 * std::min(theta0.rate_minus(), theta0.rate_plus());
  return theta0.integrate([](double, double, double d) { return d * d; }, r);
}

Profile default_eta(bool exact_support) {
  if (exact_support)
    return sample_profile([](double r) { return smooth_step(0.5 * (r + 1.0)); }, 512, 1.0, 0.0, 1.0, 1.0, 1.0);
  return sample_profile([](double r) { return 0.5 * (1.0 + std::tanh(r)); }, 512, 24.0, 0.0, 1.0, 2.0, 2.0);
}

namespace {
// Clenshaw-Curtis on [a, b]
double cc_integrate(const std::function<double(double)>& fn, double a, double b, int n) {
  static thread_local std::shared_ptr<ChebGrid> ref;
  if (!ref || ref->n != n) ref = std::make_shared<ChebGrid>(n, 1.0);
  double s = 0.0;
  for (int j = 0; j <= n; ++j) s += ref->w[j] * fn(0.5 * (a + b) + 0.5 * (b - a) * ref->x[j]);
  return 0.5 * (b - a) * s;
}
}  // namespace

ExpansionConstants expansion_constants(const Profile& theta0, const Profile& eta, const Viscosity& visc) {
  ExpansionConstants k;
  const double re = std::min(eta.rate_minus(), eta.rate_plus());
  k.sigma_eta = eta.integrate([&](double r, double, double de) { return visc(theta0(r)) * de; }, re);
  k.sigma0_eta = eta.integrate([](double, double, double de) { return de * de; }, 2.0 * re);
  k.sigma0 = surface_tension(theta0);

  // eta theta0'^2: eta's own grid, then the stretches where eta is (nearly) constant
  const double le = eta.L(), lt = theta0.L();
  const double rt = 2.0 * std::min(theta0.rate_minus(), theta0.rate_plus());
  k.sigma2 = eta.integrate([&](double r, double e, double) { return e * std::pow(theta0.d1(r), 2); }, 0.0);
  if (lt > le) {
    auto f = [&](double r) { return eta(r) * std::pow(theta0.d1(r), 2); };
    k.sigma2 += cc_integrate(f, le, lt, 512) + cc_integrate(f, -lt, -le, 512);
  }
  const double L = std::max(le, lt);
  k.sigma2 += (eta(L) * std::pow(theta0.d1(L), 2) + eta(-L) * std::pow(theta0.d1(-L), 2)) / rt;
  return k;
}

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return 1.0 / (1.0 + std::exp(1.0 / t - 1.0 / (1.0 - t)));
}

double smooth_step_d1(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double p = smooth_step(t);
  return p * (1.0 - p) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t)));
}

Cutoff::Cutoff(double delta) : delta_(delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("cutoff: delta must be positive");
  for (int i = 0; i <= 20000; ++i) {
    const double z = delta * (1.0 + i / 20000.0);
    max_moment_ = std::max(max_moment_, -z * d1(z));
  }
  if (max_moment_ > 4.0) throw std::logic_error("cutoff: -z zeta' exceeds 4");
}

double Cutoff::operator()(double z) const { return 1.0 - smooth_step((std::abs(z) - delta_) / delta_); }

double Cutoff::d1(double z) const {
  const double s = z < 0 ? -1.0 : 1.0;
  return -s * smooth_step_d1((std::abs(z) - delta_) / delta_) / delta_;
}

Cutoff cutoff_zeta(double delta) { return Cutoff(delta); }

}  // namespace nsac
