#include "nsac/spectral.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <boost/math/quadrature/gauss.hpp>

#include "nsac/errors.hpp"

namespace nsac {

namespace {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

SpMat five_point_laplacian(const Grid2D& g) {
  const bool periodic = g.bc == Boundary::Periodic;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(5 * g.size());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int k = g.idx(i, j);
      auto nb = [&](int ii, int jj, double w) {
        if (periodic) {
          ii = (ii + g.nx) % g.nx;
          jj = (jj + g.ny) % g.ny;
        } else if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny) {
          return;  // Neumann ghost equals the interior value
        }
        t.emplace_back(k, g.idx(ii, jj), w);
        t.emplace_back(k, k, -w);
      };
      nb(i - 1, j, 1 / (g.hx * g.hx));
      nb(i + 1, j, 1 / (g.hx * g.hx));
      nb(i, j - 1, 1 / (g.hy * g.hy));
      nb(i, j + 1, 1 / (g.hy * g.hy));
    }
  SpMat L(g.size(), g.size());
  L.setFromTriplets(t.begin(), t.end());
  L.prune(0.0);
  return L;
}

int negative_pivots(const Eigen::SimplicialLDLT<SpMat>& f) {
  const Vec D = f.vectorD();
  return static_cast<int>((D.array() < 0).count());
}

struct LanczosResult {
  double theta = 0;
  Vec y;
  int steps = 0;
};

// largest eigenpair of the symmetric map T by Lanczos with full
// reorthogonalisation, restarted from the best Ritz vector
template <class Op, class Check>
LanczosResult lanczos_top(const Op& T, Vec v0, int m, int max_steps, const Check& converged) {
  LanczosResult out;
  const int n = static_cast<int>(v0.size());
  m = std::min(m, n);
  while (out.steps < max_steps) {
    Eigen::MatrixXd Q(n, m + 1);
    Vec alpha(m), beta(m);
    Q.col(0) = v0 / v0.norm();
    int k = 0;
    Vec w;
    for (; k < m && out.steps < max_steps; ++k, ++out.steps) {
      T(Q.col(k), w);
      alpha[k] = Q.col(k).dot(w);
      w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
      w -= Q.leftCols(k + 1) * (Q.leftCols(k + 1).transpose() * w);
      beta[k] = w.norm();
      if (beta[k] < 1e-14 * std::abs(alpha[k])) {
        ++k;
        ++out.steps;
        break;
      }
      Q.col(k + 1) = w / beta[k];
    }
    Eigen::MatrixXd Tk = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      Tk(i, i) = alpha[i];
      if (i + 1 < k) Tk(i, i + 1) = Tk(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tk);
    out.theta = es.eigenvalues()[k - 1];
    out.y = Q.leftCols(k) * es.eigenvectors().col(k - 1);
    out.y.normalize();
    if (converged(out.theta, out.y)) return out;
    v0 = out.y;
  }
  return out;
}

}  // namespace

LinearizedOperator::LinearizedOperator(const ScalarField2D& cA, double eps, const DoubleWell& well,
                                       std::optional<LaplacianKind> kind)
    : grid_(cA.grid), eps_(eps) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  const bool periodic = grid_.bc == Boundary::Periodic;
  kind_ = kind.value_or(periodic ? LaplacianKind::Spectral : LaplacianKind::FivePoint);
  if (kind_ == LaplacianKind::Spectral && !periodic)
    throw std::invalid_argument("the spectral Laplacian needs a periodic grid");
  V_ = cA.v.unaryExpr([&](double c) { return well.d2f(c) / (eps * eps); });
  A5_ = -five_point_laplacian(grid_);
  A5_ += SpMat(V_.asDiagonal());
  if (kind_ == LaplacianKind::Spectral) ops_ = std::make_shared<SpectralOps>(grid_);
}

void LinearizedOperator::apply(const Vec& x, Vec& y) const {
  if (kind_ == LaplacianKind::FivePoint) {
    y = A5_ * x;
    return;
  }
  ops_->laplacian(x, y);
  y = V_.cwiseProduct(x) - y;
}

Vec LinearizedOperator::apply(const Vec& x) const {
  Vec y;
  apply(x, y);
  return y;
}

Vec LinearizedOperator::gradient_x(const Vec& x) const {
  Vec out(x.size());
  if (ops_) {
    ops_->dx(x, out);
    return out;
  }
  const Grid2D& g = grid_;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      int ip = i + 1, im = i - 1;
      if (g.bc == Boundary::Periodic) {
        ip %= g.nx;
        im = (im + g.nx) % g.nx;
      } else {
        ip = std::min(ip, g.nx - 1);
        im = std::max(im, 0);
      }
      out[g.idx(i, j)] = (x[g.idx(ip, j)] - x[g.idx(im, j)]) / (2 * g.hx);
    }
  return out;
}

Vec LinearizedOperator::gradient_y(const Vec& x) const {
  Vec out(x.size());
  if (ops_) {
    ops_->dy(x, out);
    return out;
  }
  const Grid2D& g = grid_;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      int jp = j + 1, jm = j - 1;
      if (g.bc == Boundary::Periodic) {
        jp %= g.ny;
        jm = (jm + g.ny) % g.ny;
      } else {
        jp = std::min(jp, g.ny - 1);
        jm = std::max(jm, 0);
      }
      out[g.idx(i, j)] = (x[g.idx(i, jp)] - x[g.idx(i, jm)]) / (2 * g.hy);
    }
  return out;
}

EigenPair min_eigenvalue(const LinearizedOperator& op, double tol, int max_iter) {
  const int n = op.grid().size();
  const Vec& V = op.potential();
  EigenPair out;

  // start near the translation mode when there is a layer, else the constant
  Vec v0 = Vec::Ones(n);
  const double spread = V.maxCoeff() - V.minCoeff();
  if (spread > 1e-12 * (1 + std::abs(V.maxCoeff()))) v0 = (V.maxCoeff() - V.array()) / spread + 1e-3;
  v0.normalize();
  const double rq = v0.dot(op.apply(v0));

  // shift with no eigenvalue of the five-point matrix below it; -lap_5 <= -lap
  // makes it a lower bound for the spectral operator too
  const double floor = V.minCoeff() - 1.0;
  const SpMat& A5 = op.five_point();
  SpMat I(n, n);
  I.setIdentity();
  Eigen::SimplicialLDLT<SpMat> ldlt;
  double step = std::max(1.0, 1e-3 * std::abs(rq));
  double sigma = rq - step;
  for (int trial = 0;; ++trial) {
    sigma = std::max(sigma, floor);
    ldlt.compute(A5 - sigma * I);
    ++out.factorizations;
    if (ldlt.info() != Eigen::Success) throw NonConvergence("shift factorisation failed");
    if (negative_pivots(ldlt) == 0) break;
    if (sigma == floor) throw NonConvergence("no admissible shift below the spectrum");
    step *= 4;
    sigma = rq - step;
  }
  out.shift = sigma;

  std::function<void(const Vec&, Vec&)> solve;
  if (op.kind() == LaplacianKind::FivePoint) {
    solve = [&](const Vec& b, Vec& x) { x = ldlt.solve(b); };
  } else {
    solve = [&](const Vec& b, Vec& x) {
      // (L - sigma) x = b by conjugate gradients, five-point factor as preconditioner
      x = ldlt.solve(b);
      Vec r = b - (op.apply(x) - sigma * x);
      Vec z = ldlt.solve(r), p = z, Ap;
      double rz = r.dot(z);
      const double bn = b.norm();
      for (int it = 0; it < 500; ++it) {
        if (r.norm() <= 1e-14 * bn) return;
        Ap = op.apply(p) - sigma * p;
        const double a = rz / p.dot(Ap);
        x += a * p;
        r -= a * Ap;
        z = ldlt.solve(r);
        const double rz1 = r.dot(z);
        p = z + (rz1 / rz) * p;
        rz = rz1;
      }
      if (r.norm() > 1e-10 * bn) throw NonConvergence("shift-invert solve did not converge");
    };
  }
  auto T = [&](const Vec& x, Vec& y) { solve(x, y); };
  auto check = [&](double theta, const Vec& y) {
    const double lambda = sigma + 1.0 / theta;
    out.residual = (op.apply(y) - lambda * y).norm();
    return out.residual <= tol;
  };
  const auto res = lanczos_top(T, v0, 40, max_iter, check);
  out.iterations = res.steps;
  out.lambda = sigma + 1.0 / res.theta;
  out.vector = res.y;
  out.residual = (op.apply(res.y) - out.lambda * res.y).norm();
  if (out.residual > tol) {
    std::ostringstream os;
    os << "Lanczos stopped at residual " << out.residual << " after " << res.steps << " steps";
    throw NonConvergence(os.str());
  }
  return out;
}

double quadratic_form(const LinearizedOperator& op, const Vec& psi, const Vec* mask) {
  const Grid2D& g = op.grid();
  const double eps = op.eps(), A = g.cell_area();
  if (!mask) return eps * psi.dot(op.apply(psi)) * A;
  const Vec& m = *mask;
  double pot = 0;
  for (int k = 0; k < psi.size(); ++k) pot += m[k] * op.potential()[k] * psi[k] * psi[k];
  double grad = 0;
  if (op.kind() == LaplacianKind::Spectral) {
    const Vec gx = op.gradient_x(psi), gy = op.gradient_y(psi);
    for (int k = 0; k < psi.size(); ++k) grad += m[k] * (gx[k] * gx[k] + gy[k] * gy[k]);
  } else {
    const bool periodic = g.bc == Boundary::Periodic;
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const int k = g.idx(i, j);
        const bool ex = periodic || i + 1 < g.nx, ey = periodic || j + 1 < g.ny;
        if (ex) {
          const int kk = g.idx((i + 1) % g.nx, j);
          grad += 0.5 * (m[k] + m[kk]) * std::pow((psi[kk] - psi[k]) / g.hx, 2);
        }
        if (ey) {
          const int kk = g.idx(i, (j + 1) % g.ny);
          grad += 0.5 * (m[k] + m[kk]) * std::pow((psi[kk] - psi[k]) / g.hy, 2);
        }
      }
  }
  return eps * (grad + pot) * A;
}

double tangential_energy(const LinearizedOperator& op, const Vec& psi, const TubularMap& tub, double delta) {
  const Grid2D& g = op.grid();
  const Vec gx = op.gradient_x(psi), gy = op.gradient_y(psi);
  const auto ts = tub.sample(g);
  double sum = 0;
  for (int k = 0; k < g.size(); ++k) {
    if (ts.saturated[k] || std::abs(ts.d.v[k]) >= delta) continue;
    const Vec2 tau = tub.interface().tangent(ts.s[k]);
    const double d = tau.x() * gx[k] + tau.y() * gy[k];
    sum += d * d;
  }
  return sum * g.cell_area();
}

double fiber_beta(const Profile& theta0, double eps, double delta, double h) {
  const double a = -delta / eps - h, b = delta / eps - h;
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / 2.0)));
  double s = 0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + (b - a) * p / panels, hi = a + (b - a) * (p + 1) / panels;
    s += boost::math::quadrature::gauss<double, 20>::integrate(
        [&](double r) {
          const double d = theta0.d1(r);
          return d * d;
        },
        lo, hi);
  }
  return 1.0 / std::sqrt(s);
}

FiberDecomposition fiber_decompose(const ScalarField2D& psi, const TubularMap& tub, const Profile& theta0, double eps,
                                   const std::function<double(double)>& h) {
  const Grid2D& g = psi.grid;
  const double delta = tub.delta();
  const Interface& iface = tub.interface();
  const int N = iface.size();
  FiberDecomposition out;
  out.truncation_warning = eps > delta / 4;
  if (out.truncation_warning)
    std::cerr << "warning: eps = " << eps << " exceeds a quarter of the tube width " << delta
              << "; fibers are truncated\n";
  auto hs = [&](double s) { return h ? h(s) : 0.0; };

  // amplitudes a(s) in trigonometric polynomials of degree K, resolved by the grid
  const double hmin = std::min(g.hx, g.hy);
  const int K = std::max(0, std::min(N / 2 - 1, static_cast<int>(iface.length() / (4 * hmin))));
  const int nb = 2 * K + 1;
  auto basis = [&](double s, Vec& e) {
    e.resize(nb);
    e[0] = 1;
    for (int k = 1; k <= K; ++k) {
      e[2 * k - 1] = std::cos(2 * std::numbers::pi * k * s);
      e[2 * k] = std::sin(2 * std::numbers::pi * k * s);
    }
  };

  const auto ts = tub.sample(g);
  std::vector<int> in;
  Vec phi = Vec::Zero(g.size());
  out.points = Eigen::VectorXi::Zero(N);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nb, nb);
  Vec rhs = Vec::Zero(nb), e;
  for (int k = 0; k < g.size(); ++k) {
    if (ts.saturated[k] || std::abs(ts.d.v[k]) >= delta) continue;
    const double s = ts.s[k];
    in.push_back(k);
    phi[k] = theta0.d1(ts.d.v[k] / eps - hs(s));
    ++out.points[static_cast<int>(std::lround(s * N)) % N];
    basis(s, e);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(e, phi[k] * phi[k]);
    rhs += (phi[k] * psi.v[k]) * e;
  }
  const Vec coef = gram.selfadjointView<Eigen::Lower>().ldlt().solve(rhs);

  const double sigma = theta0.integrate([](double, double, double d) { return d * d; }, 2 * theta0.rate_plus());
  out.s.resize(N);
  out.Z.resize(N);
  out.beta.resize(N);
  for (int j = 0; j < N; ++j) {
    out.s[j] = iface.s(j);
    out.beta[j] = fiber_beta(theta0, eps, delta, hs(out.s[j]));
    out.tail_mass = std::max(out.tail_mass, 1.0 - 1.0 / (out.beta[j] * out.beta[j] * sigma));
    basis(out.s[j], e);
    out.Z[j] = std::sqrt(eps) * e.dot(coef) / out.beta[j];
  }
  out.projection = ScalarField2D(g);
  out.remainder = psi;
  for (int k : in) {
    basis(ts.s[k], e);
    out.projection.v[k] = e.dot(coef) * phi[k];
    out.remainder.v[k] = psi.v[k] - out.projection.v[k];
  }
  const double A = g.cell_area();
  out.norm2 = psi.v.squaredNorm() * A;
  out.projection_norm2 = out.projection.v.squaredNorm() * A;
  out.remainder_norm2 = out.remainder.v.squaredNorm() * A;
  return out;
}

}  // namespace nsac
