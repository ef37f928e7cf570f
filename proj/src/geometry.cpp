#include "nsac/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "nsac/errors.hpp"
#include "parallel.hpp"

namespace nsac {

namespace {

constexpr int kTableFactor = 32;
constexpr int kOrders = 6;

// exact derivatives of the trigonometric interpolant of v on a grid of m points
std::vector<Eigen::VectorXd> fine_derivatives(const std::vector<cplx>& c, int m, int orders) {
  const int n = static_cast<int>(c.size());
  std::vector<cplx> pad(m, 0.0);
  for (int j = 0; j < n; ++j) {
    const int k = wavenumber(j, n);
    if (n % 2 == 0 && j == n / 2) {
      pad[k] += 0.5 * c[j];
      pad[m - k] += 0.5 * c[j];
    } else {
      pad[k >= 0 ? k : m + k] += c[j];
    }
  }
  const double scale = static_cast<double>(m) / n;
  std::vector<Eigen::VectorXd> out;
  for (int q = 0; q < orders; ++q) {
    std::vector<cplx> d(m);
    for (int j = 0; j < m; ++j) {
      const int k = wavenumber(j, m);
      d[j] = pad[j] * scale * std::pow(cplx(0.0, 2.0 * std::numbers::pi * k), q);
    }
    out.push_back(idft_real(d));
  }
  return out;
}

inline double frac(double s) { return s - std::floor(s); }

}  // namespace

Interface::Interface(std::vector<Vec2> nodes, double t, Vec2 lift) : nodes_(std::move(nodes)), t_(t), lift_(lift) {
  const int n = size();
  if (n < 8) throw DegenerateCurve("Interface: need at least 8 nodes");
  Eigen::VectorXd px(n), py(n);
  for (int j = 0; j < n; ++j) {
    const Vec2 p = nodes_[j] - s(j) * lift_;
    px[j] = p.x();
    py[j] = p.y();
  }
  cx_ = dft(px);
  cy_ = dft(py);
  m_ = kTableFactor * n;
  auto fx = fine_derivatives(cx_, m_, kOrders);
  auto fy = fine_derivatives(cy_, m_, kOrders);
  table_.resize(kOrders);
  for (int q = 0; q < kOrders; ++q) {
    table_[q].resize(2, m_);
    table_[q].row(0) = fx[q].transpose();
    table_[q].row(1) = fy[q].transpose();
  }
  speed_.resize(n);
  curv_.resize(n);
  tan_.resize(n);
  double mean = 0.0;
  for (int j = 0; j < n; ++j) {
    const Vec2 x1 = table_[1].col(kTableFactor * j) + lift_;
    speed_[j] = x1.norm();
    mean += speed_[j] / n;
  }
  for (int j = 0; j < n; ++j) {
    if (!(speed_[j] > 1e-8 * mean)) {
      std::ostringstream os;
      os << "Interface: |dX/ds| vanishes at node " << j;
      throw DegenerateCurve(os.str());
    }
    const Vec2 x1 = table_[1].col(kTableFactor * j) + lift_;
    const Vec2 x2 = table_[2].col(kTableFactor * j);
    tan_[j] = x1 / speed_[j];
    curv_[j] = (x1.x() * x2.y() - x1.y() * x2.x()) / std::pow(speed_[j], 3);
  }
}

Interface Interface::circle(double R, int n, Vec2 center, bool ccw, double phase) {
  std::vector<Vec2> p(n);
  const double sg = ccw ? 1.0 : -1.0;
  for (int j = 0; j < n; ++j) {
    const double a = 2.0 * std::numbers::pi * (sg * j / static_cast<double>(n) + phase);
    p[j] = center + R * Vec2(std::cos(a), std::sin(a));
  }
  return Interface(std::move(p));
}

Interface Interface::ellipse(double a, double b, int n, Vec2 center) {
  std::vector<Vec2> p(n);
  for (int j = 0; j < n; ++j) {
    const double th = 2.0 * std::numbers::pi * j / n;
    p[j] = center + Vec2(a * std::cos(th), b * std::sin(th));
  }
  return Interface(std::move(p));
}

Interface Interface::line(Vec2 origin, Vec2 period, int n) {
  std::vector<Vec2> p(n);
  for (int j = 0; j < n; ++j) p[j] = origin + (static_cast<double>(j) / n) * period;
  return Interface(std::move(p), 0.0, period);
}

Vec2 Interface::eval(double s, int order) const {
  if (order > 3) return eval_exact(s, order);
  const double sf = frac(s);
  const double u = sf * m_;
  int i = static_cast<int>(std::floor(u));
  double t = u - i;
  if (i >= m_) {
    i = m_ - 1;
    t = 1.0;
  }
  const int i1 = (i + 1) % m_;
  const double h = 1.0 / m_;
  const auto& T0 = table_[order];
  const auto& T1 = table_[order + 1];
  const auto& T2 = table_[order + 2];
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
  const double H1 = t - 6 * t3 + 8 * t4 - 3 * t5;
  const double H2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
  const double H3 = 0.5 * t3 - t4 + 0.5 * t5;
  const double H4 = -4 * t3 + 7 * t4 - 3 * t5;
  const double H5 = 10 * t3 - 15 * t4 + 6 * t5;
  Vec2 v = H0 * T0.col(i) + H1 * h * T1.col(i) + H2 * h * h * T2.col(i) + H3 * h * h * T2.col(i1) +
           H4 * h * T1.col(i1) + H5 * T0.col(i1);
  if (order == 0) v += s * lift_;
  if (order == 1) v += lift_;
  return v;
}

Vec2 Interface::eval_exact(double s, int order) const {
  Vec2 v(trig_eval(cx_, frac(s), order), trig_eval(cy_, frac(s), order));
  if (order == 0) v += s * lift_;
  if (order == 1) v += lift_;
  return v;
}

Vec2 Interface::tangent(double s) const {
  const Vec2 x1 = d1(s);
  return x1 / x1.norm();
}

double Interface::curvature(double s) const {
  const Vec2 x1 = d1(s), x2 = d2(s);
  return (x1.x() * x2.y() - x1.y() * x2.x()) / std::pow(x1.norm(), 3);
}

double Interface::curvature_d1(double s) const {
  const Vec2 x1 = d1(s), x2 = d2(s), x3 = eval(s, 3);
  const double sp = x1.norm();
  const double cr = x1.x() * x2.y() - x1.y() * x2.x();
  return (x1.x() * x3.y() - x1.y() * x3.x()) / std::pow(sp, 3) - 3.0 * cr * x1.dot(x2) / std::pow(sp, 5);
}

double Interface::speed_d1(double s) const {
  const Vec2 x1 = d1(s), x2 = d2(s);
  return x1.dot(x2) / x1.norm();
}

double Interface::length() const { return speed_.mean(); }

double Interface::area() const {
  if (!closed()) return 0.0;
  double a = 0.0;
  const int n = size();
  for (int j = 0; j < n; ++j) {
    const Vec2 x = nodes_[j];
    const Vec2 x1 = table_[1].col(kTableFactor * j);
    a += 0.5 * (x.x() * x1.y() - x.y() * x1.x());
  }
  return a / n;
}

Interface Interface::resample(int m) const {
  std::vector<Vec2> p(m);
  for (int j = 0; j < m; ++j) p[j] = eval_exact(static_cast<double>(j) / m, 0);
  return Interface(std::move(p), t_, lift_);
}

Interface Interface::redistribute() const {
  const int n = size();
  // arclength sigma(s) = mean * s + periodic part
  const double mean = speed_.mean();
  Eigen::VectorXd sp(n);
  for (int j = 0; j < n; ++j) sp[j] = speed_[j] - mean;
  auto c = dft(sp);
  std::vector<cplx> q(n, 0.0);
  for (int j = 1; j < n; ++j) {
    if (n % 2 == 0 && j == n / 2) continue;
    q[j] = c[j] / cplx(0.0, 2.0 * std::numbers::pi * wavenumber(j, n));
  }
  auto sigma = [&](double s) { return mean * s + trig_eval(q, s) - trig_eval(q, 0.0); };
  std::vector<Vec2> p(n);
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const double target = mean * j / n;
    for (int it = 0; it < 50; ++it) {
      const double f = sigma(s) - target;
      const double ds = f / speed(s);
      s -= ds;
      if (std::abs(ds) < 1e-15) break;
    }
    p[j] = position(s);
  }
  return Interface(std::move(p), t_, lift_);
}

void Interface::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  os << "s,x,y\n";
  for (int j = 0; j < size(); ++j) os << s(j) << ',' << nodes_[j].x() << ',' << nodes_[j].y() << '\n';
}

Interface Interface::read_csv(const std::string& path, double t) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(is, line);
  std::vector<Vec2> p;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double s, x, y;
    ls >> s >> x >> y;
    p.emplace_back(x, y);
  }
  return Interface(std::move(p), t);
}

// ---------------------------------------------------------------------------

TubularMap::TubularMap(Interface iface, double delta) : iface_(std::move(iface)), delta_(delta) {
  const double kmax = iface_.max_abs_curvature();
  if (delta_ <= 0.0) delta_ = kmax > 0 ? 0.25 / kmax : 0.25 * iface_.length();
  if (kmax > 0 && 3.0 * delta_ * kmax >= 1.0) {
    std::ostringstream os;
    os << "TubularMap: 3 delta = " << 3 * delta_ << " exceeds the minimal radius of curvature " << 1 / kmax;
    throw std::invalid_argument(os.str());
  }
  if (iface_.closed()) {
    double xmin = 1e300, ymin = 1e300, xmax = -1e300, ymax = -1e300;
    for (const auto& p : iface_.nodes()) {
      xmin = std::min(xmin, p.x());
      xmax = std::max(xmax, p.x());
      ymin = std::min(ymin, p.y());
      ymax = std::max(ymax, p.y());
    }
    bh_ = 3.0 * delta_;
    bx0_ = xmin - bh_;
    by0_ = ymin - bh_;
    bnx_ = static_cast<int>(std::ceil((xmax - xmin) / bh_)) + 3;
    bny_ = static_cast<int>(std::ceil((ymax - ymin) / bh_)) + 3;
    buckets_.assign(static_cast<size_t>(bnx_) * bny_, {});
    for (int j = 0; j < iface_.size(); ++j) {
      const Vec2& p = iface_.node(j);
      const int bi = static_cast<int>((p.x() - bx0_) / bh_), bj = static_cast<int>((p.y() - by0_) / bh_);
      buckets_[bi + bnx_ * bj].push_back(j);
    }
    const int m = 4 * iface_.size();
    poly_.resize(m);
    for (int j = 0; j < m; ++j) poly_[j] = iface_.position(static_cast<double>(j) / m);
  }
}

bool TubularMap::nearest_node(const Vec2& x, double& s0, double& dist) const {
  const int n = iface_.size();
  dist = std::numeric_limits<double>::infinity();
  if (!iface_.closed()) {
    const Vec2& L = iface_.lift();
    const double k = std::floor((x - iface_.node(0)).dot(L) / L.squaredNorm());
    for (int sh = -1; sh <= 1; ++sh)
      for (int j = 0; j < n; ++j) {
        const double sj = k + sh + iface_.s(j);
        const double dd = (iface_.node(j) + (k + sh) * L - x).norm();
        if (dd < dist) {
          dist = dd;
          s0 = sj;
        }
      }
    return true;
  }
  const int bi = static_cast<int>(std::floor((x.x() - bx0_) / bh_));
  const int bj = static_cast<int>(std::floor((x.y() - by0_) / bh_));
  bool found = false;
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      const int i = bi + di, j = bj + dj;
      if (i < 0 || j < 0 || i >= bnx_ || j >= bny_) continue;
      for (int q : buckets_[i + bnx_ * j]) {
        const double dd = (iface_.node(q) - x).norm();
        if (dd < dist) {
          dist = dd;
          s0 = iface_.s(q);
          found = true;
        }
      }
    }
  return found;
}

bool TubularMap::inside_polygon(const Vec2& x) const {
  bool in = false;
  const size_t m = poly_.size();
  for (size_t i = 0, j = m - 1; i < m; j = i++) {
    const Vec2& a = poly_[i];
    const Vec2& b = poly_[j];
    if ((a.y() > x.y()) != (b.y() > x.y()) && x.x() < (b.x() - a.x()) * (x.y() - a.y()) / (b.y() - a.y()) + a.x())
      in = !in;
  }
  return in;
}

bool TubularMap::newton(const Vec2& x, double s0, Projection& p) const {
  const double hs = 2.0 / iface_.size();
  double s = s0;
  for (int it = 0; it < 40; ++it) {
    const Vec2 X = iface_.position(s), X1 = iface_.d1(s), X2 = iface_.d2(s);
    const Vec2 e = X - x;
    const double F = e.dot(X1);
    const double J = X1.squaredNorm() + e.dot(X2);
    double ds = J > 0 ? -F / J : -F / X1.squaredNorm();
    ds = std::clamp(ds, -hs, hs);
    s += ds;
    if (std::abs(ds) < 1e-15) break;
    if (it == 39) return false;
  }
  const Vec2 X = iface_.position(s);
  const Vec2 n = iface_.normal(s);
  p.s = s;
  p.r = (x - X).dot(n);
  const double scale = 1.0 + x.norm();
  return (X + p.r * n - x).norm() <= 1e-8 * scale;
}

Projection TubularMap::project(const Vec2& x) const {
  double s0 = 0, dist = 0;
  if (!nearest_node(x, s0, dist) || dist > 3.0 * delta_ + iface_.length() / iface_.size())
    throw OutsideTube("project: point outside the 3 delta tube");
  Projection p;
  if (!newton(x, s0, p)) throw ProjectionAmbiguous("project: Newton projection failed");
  if (std::abs(p.r) >= 3.0 * delta_) throw OutsideTube("project: point outside the 3 delta tube");
  if (iface_.closed()) {
    p.s -= std::floor(p.s);
    if (p.s >= 1.0) p.s = 0.0;
  }
  return p;
}

DistanceSample TubularMap::signed_distance(const Vec2& x) const {
  const double cap = 3.0 * delta_;
  DistanceSample out;
  double s0 = 0, dist = 0;
  const double spacing = iface_.length() / iface_.size();
  bool near = nearest_node(x, s0, dist) && dist <= cap + spacing;
  Projection p;
  if (near && !newton(x, s0, p)) {
    // Newton stalls near centres of curvature; the true distance is at least
    // dist - spacing / 2, so such points may still be known to lie outside
    if (dist - 0.5 * spacing < cap) throw ProjectionAmbiguous("signed_distance: Newton projection failed");
    near = false;
  }
  if (near) {
    if (std::abs(p.r) < cap) {
      out.d = p.r;
      out.s = iface_.closed() ? p.s - std::floor(p.s) : p.s;
      if (out.s >= 1.0) out.s = 0.0;
      return out;
    }
    out.d = p.r > 0 ? cap : -cap;
    out.s = iface_.closed() ? p.s - std::floor(p.s) : p.s;
    out.saturated = true;
    return out;
  }
  out.saturated = true;
  out.s = s0;
  if (iface_.closed()) {
    const bool plus = inside_polygon(x) == (iface_.area() > 0);
    out.d = plus ? cap : -cap;
  } else {
    const Vec2 X = iface_.position(s0);
    out.d = (x - X).dot(iface_.normal(s0)) > 0 ? cap : -cap;
  }
  return out;
}

double TubularMap::laplacian_distance(const Vec2& x) const {
  const Projection p = project(x);
  const double H = iface_.curvature(p.s);
  return -H / (1.0 - p.r * H);
}

TubularMap::TubeSample TubularMap::sample(const Grid2D& g) const {
  TubeSample ts;
  ts.d = ScalarField2D(g);
  ts.s = Eigen::VectorXd::Zero(g.size());
  ts.saturated.assign(g.size(), 0);
  detail::parallel_rows(g.ny, [&](int j) {
    for (int i = 0; i < g.nx; ++i) {
      const int k = g.idx(i, j);
      const DistanceSample ds = signed_distance(Vec2(g.x(i), g.y(j)));
      ts.d.v[k] = ds.d;
      ts.s[k] = ds.s;
      ts.saturated[k] = ds.saturated;
    }
  });
  return ts;
}

namespace {
// Fornberg's weights for derivatives 0..m at z on the nodes x
Eigen::MatrixXd fornberg(double z, const std::vector<double>& x, int m) {
  const int n = static_cast<int>(x.size()) - 1;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n + 1, m + 1);
  double c1 = 1.0, c4 = x[0] - z;
  c(0, 0) = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c;
}
}  // namespace

TubularMap::LaplacianCoeffs TubularMap::laplacian_sd_coeffs(double s, int K, double step) const {
  if (K < 1) throw std::invalid_argument("laplacian_sd_coeffs: K >= 1");
  if (step <= 0.0) step = iface_.length() / iface_.size();
  const int q = K - 1;               // highest derivative
  const int J = (q + 4 + 1) / 2;     // fourth-order accuracy
  if (J * step >= 3.0 * delta_) {
    std::ostringstream os;
    os << "laplacian_sd_coeffs: stencil half-width " << J * step << " leaves the tube for K = " << K;
    throw InsufficientResolution(os.str());
  }
  std::vector<double> r(2 * J + 1);
  std::vector<double> g(2 * J + 1);
  const Vec2 X = iface_.position(s), n = iface_.normal(s);
  for (int j = -J; j <= J; ++j) {
    r[j + J] = j * step;
    g[j + J] = laplacian_distance(X + r[j + J] * n);
  }
  const Eigen::MatrixXd w = fornberg(0.0, r, q);
  const double H0 = iface_.curvature(s);
  const double kref = std::max(std::abs(H0), 2.0 * std::numbers::pi / iface_.length());
  const double gmax = std::abs(H0) + kref;
  LaplacianCoeffs out;
  out.H = H0;
  double fact = 1.0;
  for (int k = 1; k <= q; ++k) {
    fact *= k;
    double dk = 0.0, wsum = 0.0;
    for (int j = 0; j <= 2 * J; ++j) {
      dk += w(j, k) * g[j];
      wsum += std::abs(w(j, k));
    }
    if (1e-15 * gmax * wsum > 1e-4 * std::pow(kref, k + 1)) {
      std::ostringstream os;
      os << "laplacian_sd_coeffs: derivative " << k << " is dominated by roundoff";
      throw InsufficientResolution(os.str());
    }
    const double a = dk / fact;
    out.kappa.push_back(k == 1 ? -a : a);
  }
  return out;
}

// ---------------------------------------------------------------------------

HeightFunction::HeightFunction(Eigen::VectorXd h0, double t0) {
  t_.push_back(t0);
  h_.push_back(std::move(h0));
}

void HeightFunction::push(double t, Eigen::VectorXd h) {
  if (!t_.empty() && t < t_.back()) throw std::invalid_argument("HeightFunction: time must not decrease");
  if (!h_.empty() && h.size() != h_.back().size()) throw std::invalid_argument("HeightFunction: size changed");
  t_.push_back(t);
  h_.push_back(std::move(h));
}

Eigen::VectorXd HeightFunction::at(double t) const {
  if (t <= t_.front()) return h_.front();
  if (t >= t_.back()) return h_.back();
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const size_t k = static_cast<size_t>(it - t_.begin());
  const double a = (t - t_[k - 1]) / (t_[k] - t_[k - 1]);
  return (1 - a) * h_[k - 1] + a * h_[k];
}

double HeightFunction::eval(double s, int order) const {
  const int last = static_cast<int>(h_.size()) - 1;
  if (coef_for_ != last) {
    coef_ = dft(h_.back());
    coef_for_ = last;
  }
  return trig_eval(coef_, s - std::floor(s), order);
}

double HeightFunction::eval(double s, double t, int order) const {
  return trig_eval(dft(at(t)), s - std::floor(s), order);
}

void HeightFunction::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  os << "s,t,h\n";
  for (size_t k = 0; k < t_.size(); ++k)
    for (int j = 0; j < h_[k].size(); ++j)
      os << static_cast<double>(j) / h_[k].size() << ',' << t_[k] << ',' << h_[k][j] << '\n';
}

double stretched_rho(const StretchedCoords& sc, const TubularMap& tub, const Vec2& x) {
  const Projection p = tub.project(x);
  return p.r / sc.epsilon - sc.h.eval(p.s);
}

std::vector<Vec2> surface_grad(const Interface& iface, const Eigen::VectorXd& h) {
  const Eigen::VectorXd hs = periodic_derivative(h, 1);
  std::vector<Vec2> g(h.size());
  for (int j = 0; j < h.size(); ++j) g[j] = iface.node_tangent(j) * hs[j] / iface.node_speed()[j];
  return g;
}

Eigen::VectorXd surface_laplace(const Interface& iface, const Eigen::VectorXd& h) {
  Eigen::VectorXd q = periodic_derivative(h, 1).cwiseQuotient(iface.node_speed());
  return periodic_derivative(q, 1).cwiseQuotient(iface.node_speed());
}

Eigen::MatrixXd surface_laplace_matrix(const Interface& iface) {
  const int n = iface.size();
  const Eigen::MatrixXd D = fourier_diff_matrix(n, 1);
  const Eigen::VectorXd inv = iface.node_speed().cwiseInverse();
  return inv.asDiagonal() * D * inv.asDiagonal() * D;
}

Eigen::VectorXd surface_material_deriv(const Interface& iface, const std::vector<Vec2>& dXdt,
                                       const Eigen::VectorXd& h, const Eigen::VectorXd& dhdt) {
  const Eigen::VectorXd hs = periodic_derivative(h, 1);
  Eigen::VectorXd out = dhdt;
  for (int j = 0; j < h.size(); ++j)
    out[j] -= dXdt[j].dot(iface.node_tangent(j)) / iface.node_speed()[j] * hs[j];
  return out;
}

ChainRuleResidual chain_rule_check(const WHat& W, double eps, const std::function<Interface(double)>& geometry,
                                   double delta, const std::function<double(double, double)>& h, const Vec2& x,
                                   double t, double step) {
  const double dtau = step;
  TubularMap tub(geometry(t), delta), tm(geometry(t - dtau), delta), tp(geometry(t + dtau), delta);
  const Interface& G = tub.interface();

  auto rho_at = [&](const TubularMap& T, const Vec2& y, double tt) {
    const Projection p = T.project(y);
    return p.r / eps - h(p.s, tt);
  };
  auto wfield = [&](const TubularMap& T, const Vec2& y, double tt) { return W.w(rho_at(T, y, tt), y, tt); };

  const Projection p = tub.project(x);
  const double r = p.r, s = p.s;
  const double rho = r / eps - h(s, t);
  const Vec2 n = G.normal(s), tau = G.tangent(s);
  const double H = G.curvature(s), Hs = G.curvature_d1(s);
  const double sp = G.speed(s), sps = G.speed_d1(s);

  // interface kinematics at the same parameter
  const Vec2 Xt = (tp.interface().position(s) - tm.interface().position(s)) / (2 * dtau);
  const double V = n.dot(Xt);
  const double St = (tp.project(x).s - tm.project(x).s) / (2 * dtau);

  // derivatives of h in s (fourth order) and t (second order)
  const double e = 1e-3;
  const double hs = (h(s - 2 * e, t) - 8 * h(s - e, t) + 8 * h(s + e, t) - h(s + 2 * e, t)) / (12 * e);
  const double hss = (-h(s - 2 * e, t) + 16 * h(s - e, t) - 30 * h(s, t) + 16 * h(s + e, t) - h(s + 2 * e, t)) /
                     (12 * e * e);
  const double ht = (h(s, t + dtau) - h(s, t - dtau)) / (2 * dtau);

  const double q = sp * (1 - r * H);
  const double qs = sps * (1 - r * H) - sp * r * Hs;
  const Vec2 gradS = tau / q;
  const double lapS = -qs / (q * q * q);
  const double dtG_h = ht + St * hs;
  const Vec2 gradG_h = gradS * hs;
  const double lapG_h = lapS * hs + gradS.squaredNorm() * hss;
  const double lapd = -H / (1 - r * H);

  const double wr = W.w_rho(rho, x, t), wrr = W.w_rhorho(rho, x, t);
  const double f_t = -(V / eps + dtG_h) * wr + W.w_t(rho, x, t);
  const Vec2 f_g = (n / eps - gradG_h) * wr + W.grad_x(rho, x, t);
  const double f_l = (1 / (eps * eps) + gradG_h.squaredNorm()) * wrr + (lapd / eps - lapG_h) * wr +
                     2 * (n / eps - gradG_h).dot(W.grad_x_rho(rho, x, t)) + W.lap_x(rho, x, t);

  // fourth-order centred differences of the composed field
  const double k = step;
  const Vec2 ex(k, 0), ey(0, k);
  auto d1 = [&](const Vec2& dir) {
    return (wfield(tub, x - 2 * dir, t) - 8 * wfield(tub, x - dir, t) + 8 * wfield(tub, x + dir, t) -
            wfield(tub, x + 2 * dir, t)) / (12 * k);
  };
  auto d2 = [&](const Vec2& dir) {
    return (-wfield(tub, x - 2 * dir, t) + 16 * wfield(tub, x - dir, t) - 30 * wfield(tub, x, t) +
            16 * wfield(tub, x + dir, t) - wfield(tub, x + 2 * dir, t)) / (12 * k * k);
  };
  const Vec2 g_fd(d1(ex), d1(ey));
  const double l_fd = d2(ex) + d2(ey);
  const double t_fd = (wfield(tp, x, t + dtau) - wfield(tm, x, t - dtau)) / (2 * dtau);

  ChainRuleResidual res;
  res.dt = std::abs(f_t - t_fd);
  res.grad = (f_g - g_fd).norm();
  res.lap = std::abs(f_l - l_fd);
  return res;
}

}  // namespace nsac
