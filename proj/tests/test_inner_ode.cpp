#include <doctest.h>

#include <cmath>

#include <Eigen/Sparse>

#include "nsac/errors.hpp"
#include "nsac/inner_ode.hpp"

using namespace nsac;

namespace {
const Profile& theta0() {
  static const Profile p = optimal_profile(DoubleWell::standard());
  return p;
}
double th(double r) { return std::tanh(0.5 * r); }
double th1(double r) { return 0.5 / std::pow(std::cosh(0.5 * r), 2); }
double th2(double r) { return -th(r) * th1(r); }

// second-order finite differences on a uniform grid, bordered like the spectral solver
Eigen::VectorXd fd_linearized(const std::function<double(double)>& A, double L, int n, Eigen::VectorXd& x) {
  const double h = 2 * L / n;
  const int N = n + 1;
  x.resize(N);
  for (int j = 0; j < N; ++j) x[j] = -L + j * h;
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + 1);
  auto f2 = [](double c) { return 0.5 * (3 * c * c - 1); };
  for (int i = 1; i < N - 1; ++i) {
    t.emplace_back(i, i - 1, 1 / (h * h));
    t.emplace_back(i, i, -2 / (h * h) - f2(th(x[i])));
    t.emplace_back(i, i + 1, 1 / (h * h));
    t.emplace_back(i, N, -th1(x[i]));
    rhs[i] = A(x[i]);
  }
  t.emplace_back(0, 0, 1.0);
  t.emplace_back(N - 1, N - 1, 1.0);
  t.emplace_back(N, n / 2, 1.0);
  Eigen::SparseMatrix<double> M(N + 1, N + 1);
  M.setFromTriplets(t.begin(), t.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(M);
  return lu.solve(rhs);
}
}  // namespace

TEST_CASE("compatibility integrals") {
  const auto& p = theta0();
  CHECK(std::abs(compatibility_ac(LineRHS::sample(th2, p), p)) < 1e-13);
  CHECK(compatibility_ac(LineRHS::sample(th1, p), p) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(compatibility_ac(LineRHS::sample([](double) { return 0.0; }, p), p) == 0.0);
}

TEST_CASE("linearized solve: theta0'' gives rho theta0'/2") {
  const auto& p = theta0();
  auto well = DoubleWell::standard();
  auto w = solve_linearized(LineRHS::sample(th2, p), p, well);
  double e = 0;
  for (int j = 0; j < p.grid().size(); ++j) {
    const double r = p.grid().x[j];
    e = std::max(e, std::abs(w.values()[j] - 0.5 * r * th1(r)));
  }
  CHECK(e <= 1e-7);
  CHECK(w(0.0) == 0.0);
  CHECK_THROWS_AS(solve_linearized(LineRHS::sample(th1, p), p, well), IncompatibleRHS);
  auto z = solve_linearized(LineRHS::sample([](double) { return 0.0; }, p), p, well);
  CHECK(z.values().lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("linearized solve against a finite-difference oracle") {
  const auto& p = theta0();
  auto well = DoubleWell::standard();
  auto A = [](double r) { return th2(r) - th1(r) * r; };
  auto w = solve_linearized(LineRHS::sample(A, p), p, well);
  Eigen::VectorXd x1, x2;
  auto w1 = fd_linearized(A, 24.0, 4800, x1);
  auto w2 = fd_linearized(A, 24.0, 9600, x2);
  double e1 = 0, er = 0;
  for (int j = 0; j < x1.size(); ++j) {
    e1 = std::max(e1, std::abs(w(x1[j]) - w1[j]));
    const double rich = (4 * w2[2 * j] - w1[j]) / 3;
    er = std::max(er, std::abs(w(x1[j]) - rich));
  }
  CHECK(e1 < 1e-4);
  CHECK(er < 1e-7);
}

TEST_CASE("linearized solve: far field, Fredholm orthogonality, linearity") {
  const auto& p = theta0();
  auto well = DoubleWell::standard();
  // A -> -+1 at the ends (A = -theta0 adjusted to be orthogonal to theta0')
  auto A1 = LineRHS::sample([](double r) { return -th(r) * (1 + 0.0 * r); }, p, 1.0, -1.0);
  CHECK(std::abs(compatibility_ac(A1, p)) < 1e-12);
  auto w = solve_linearized(A1, p, well);
  // limits -A^{+-}/f''(+-1)
  CHECK(w(30.0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(w(-30.0) == doctest::Approx(-1.0).epsilon(1e-8));
  // residual of the spectral equation and Fredholm orthogonality
  const auto& g = p.grid();
  Eigen::VectorXd r = g.D * (g.D * w.values());
  double fo = 0;
  for (int j = 0; j < g.size(); ++j) {
    r[j] -= well.d2f(p.values()[j]) * w.values()[j] + A1.a[j];
    fo += g.w[j] * r[j] * p.nodal(1)[j];
  }
  CHECK(r.segment(1, g.n - 1).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(std::abs(fo) < 1e-10);

  auto A2 = LineRHS::sample(th2, p);
  auto w2 = solve_linearized(A2, p, well);
  auto w12 = solve_linearized(LineRHS::combine(2.0, A1, -3.0, A2), p, well);
  CHECK((w12.values() - (2.0 * w.values() - 3.0 * w2.values())).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("c2 identity differentiates consistently") {
  const auto& p = theta0();
  auto well = DoubleWell::standard();
  const double a = 0.7, g0 = -1.3;
  // -c'' + f'' c = a theta0'' - theta0' rho g0
  auto rhs = LineRHS::sample([&](double r) { return -(a * th2(r) - th1(r) * r * g0); }, p);
  auto c = solve_linearized(rhs, p, well);
  CHECK(c(0.0) == 0.0);
  const auto& g = p.grid();
  Eigen::VectorXd c1 = c.nodal(1), c3 = g.D * c.nodal(2);
  double e = 0;
  for (int j = 1; j < g.n; ++j) {
    const double r = g.x[j], t = p.values()[j];
    const double lhs = -c3[j] + well.d2f(t) * c1[j] + well.d3f(t) * p.nodal(1)[j] * c.values()[j];
    const double th3 = p.eval(r, 3);
    const double rr = a * th3 - (p.nodal(2)[j] * r + p.nodal(1)[j]) * g0;
    e = std::max(e, std::abs(lhs - rr));
  }
  CHECK(e < 1e-5);
}

TEST_CASE("viscous solve") {
  const auto& p = theta0();
  auto one = [](double) { return 1.0; };
  auto w = solve_viscous(LineRHS::sample(th2, p), p, one);
  double e = 0;
  for (int j = 0; j < p.grid().size(); ++j) e = std::max(e, std::abs(w.values()[j] - th(p.grid().x[j])));
  CHECK(e <= 1e-9);
  CHECK_THROWS_AS(solve_viscous(LineRHS::sample(th1, p), p, one), IncompatibleRHS);
  auto z = solve_viscous(LineRHS::sample([](double) { return 0.0; }, p), p, one);
  CHECK(z.values().lpNorm<Eigen::Infinity>() == 0.0);

  // double cumulative trapezoid oracle, Richardson-extrapolated over two step sizes
  auto Bf = [](double r) { return std::exp(-r * r) * (1 - 2 * r * r) * 2; };  // (2 r e^{-r^2})'
  auto wv = solve_viscous(LineRHS::sample(Bf, p), p, one);
  const double L = 24;
  auto trap = [&](int n) {
    const double h = 2 * L / n;
    std::vector<double> I(n + 1, 0.0), W(n + 1, 0.0);
    for (int i = 1; i <= n; ++i) I[i] = I[i - 1] + 0.5 * h * (Bf(-L + (i - 1) * h) + Bf(-L + i * h));
    for (int i = n / 2 + 1; i <= n; ++i) W[i] = W[i - 1] + 0.5 * h * (I[i - 1] + I[i]);
    for (int i = n / 2 - 1; i >= 0; --i) W[i] = W[i + 1] - 0.5 * h * (I[i + 1] + I[i]);
    return W;
  };
  const int n = 960000;
  auto Wf = trap(n), Wc = trap(n / 2);
  double ev = 0;
  for (int i = 0; i <= n; i += 1000) {
    const double rich = (4 * Wf[i] - Wc[i / 2]) / 3;
    ev = std::max(ev, std::abs(wv(-L + i * (2 * L / n)) - rich));
  }
  CHECK(ev < 1e-9);

  // variable viscosity: residual of (nu w')' = B
  auto nu = [](double c) { return 1.0 + 0.5 * (1.0 + c) * 4.5; };
  auto wn = solve_viscous(LineRHS::sample(th2, p), p, nu);
  const auto& g = p.grid();
  Eigen::VectorXd flux(g.size());
  for (int j = 0; j < g.size(); ++j) flux[j] = nu(p.values()[j]) * wn.nodal(1)[j];
  Eigen::VectorXd res = g.D * flux;
  for (int j = 0; j < g.size(); ++j) res[j] -= th2(g.x[j]);
  CHECK(res.lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(wn(0.0) == 0.0);
}

TEST_CASE("matching residual fits") {
  const auto& p = theta0();
  auto f = matching_residual(p, 1.0, -1.0, 1.0);
  CHECK(f.alpha_plus == doctest::Approx(1.0).epsilon(0.02));
  CHECK(f.alpha_minus == doctest::Approx(1.0).epsilon(0.02));
  CHECK(f.pass);
  auto c = sample_profile([](double) { return 2.0; }, 64, 20.0, 2.0, 2.0, 1.0, 1.0);
  auto fc = matching_residual(c, 2.0, 2.0, 1.0);
  CHECK(std::isinf(fc.alpha_plus));
  CHECK(fc.c_plus == 0.0);
  auto well = DoubleWell::standard();
  auto w = solve_linearized(LineRHS::sample(th2, p), p, well);
  auto fw = matching_residual(w, 0.0, 0.0, 1.0);
  CHECK(fw.pass);
  auto bad = sample_profile([](double r) { return 1.0 + 1e-3 * std::sin(r); }, 320, 24.0, 1.0, 1.0, 1.0, 1.0);
  CHECK_THROWS_AS(matching_residual(bad, 1.0, 1.0, 1.0), NoDecay);
}
