#include <cmath>
#include <memory>
#include <random>

#include <doctest.h>

#include "nsac/errors.hpp"
#include "nsac/spectral.hpp"

using namespace nsac;

namespace {

ScalarField2D circle_state(const Grid2D& g, double R, double eps) {
  ScalarField2D c(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) c(i, j) = std::tanh((R - std::hypot(g.x(i), g.y(j))) / (2 * eps));
  return c;
}

const Profile& theta0() {
  static const Profile p = optimal_profile(DoubleWell::standard());
  return p;
}

}  // namespace

TEST_CASE("constant states") {
  const double eps = 0.1;
  for (auto kind : {LaplacianKind::Spectral, LaplacianKind::FivePoint}) {
    const auto g = Grid2D::periodic(32, 32, -1, 1, -1, 1);
    const LinearizedOperator one(ScalarField2D(g, 1.0), eps, DoubleWell::standard(), kind);
    const auto e1 = min_eigenvalue(one);
    CHECK(e1.lambda == doctest::Approx(1 / (eps * eps)).epsilon(1e-12));
    CHECK((e1.vector.array() - e1.vector.mean()).abs().maxCoeff() < 1e-8);
    const LinearizedOperator zero(ScalarField2D(g, 0.0), eps, DoubleWell::standard(), kind);
    CHECK(min_eigenvalue(zero).lambda == doctest::Approx(-0.5 / (eps * eps)).epsilon(1e-12));
  }
  const auto gc = Grid2D::cells(20, 12, -1, 1, -1, 1);
  const LinearizedOperator nat(ScalarField2D(gc, 1.0), eps);
  CHECK(nat.kind() == LaplacianKind::FivePoint);
  CHECK(min_eigenvalue(nat).lambda == doctest::Approx(1 / (eps * eps)).epsilon(1e-12));
  CHECK_THROWS_AS(LinearizedOperator(ScalarField2D(gc, 1.0), eps, DoubleWell::standard(), LaplacianKind::Spectral),
                  std::invalid_argument);
}

TEST_CASE("translation zero mode on a line") {
  const int n = 1024;
  const auto g = Grid2D::cells(n, 1, -30, 30, 0, 60.0 / n);
  ScalarField2D c(g);
  Eigen::VectorXd mode(n);
  for (int i = 0; i < n; ++i) {
    c(i, 0) = std::tanh(g.x(i) / 2);
    mode[i] = 0.5 / std::pow(std::cosh(g.x(i) / 2), 2);
  }
  const LinearizedOperator op(c, 1.0);
  const auto e = min_eigenvalue(op, 1e-10);
  CHECK(std::abs(e.lambda) <= 1e-4);
  const double cosine = std::abs(e.vector.dot(mode)) / mode.norm();
  CHECK(1 - cosine <= 1e-3);
}

TEST_CASE("operator symmetry") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  const auto g = Grid2D::periodic(48, 40, -2, 2, -2, 1.5);
  const auto c = circle_state(g, 1.0, 0.1);
  for (auto kind : {LaplacianKind::Spectral, LaplacianKind::FivePoint}) {
    const LinearizedOperator op(c, 0.1, DoubleWell::standard(), kind);
    Eigen::VectorXd a(g.size()), b(g.size());
    for (int k = 0; k < g.size(); ++k) {
      a[k] = nd(rng);
      b[k] = nd(rng);
    }
    const double ab = op.inner(op.apply(a), b), ba = op.inner(a, op.apply(b));
    CHECK(std::abs(ab - ba) <= 1e-12 * (std::abs(ab) + op.inner(a, a) / (0.01)));
  }
}

TEST_CASE("circle: bounded minimum and quadratic form") {
  const double R = 1.5;
  for (double eps : {0.1, 0.05}) {
    const double h = eps / 3;
    const int n = 2 * static_cast<int>(std::ceil(2.0 / h));
    const auto g = Grid2D::periodic(n, n, -2, 2, -2, 2);
    const auto c = circle_state(g, R, eps);
    const LinearizedOperator op(c, eps);
    const auto e = min_eigenvalue(op, 1e-8);
    MESSAGE("eps " << eps << " lambda_min " << e.lambda << " steps " << e.iterations << " shifts "
                   << e.factorizations);
    // the curvature term of a radial fiber mode: about -1/(4 R^2)
    CHECK(e.lambda > -0.5);
    CHECK(e.lambda < 0.0);
    CHECK(e.residual <= 1e-8);
    // Rayleigh quotient identity
    const Eigen::VectorXd& v = e.vector;
    CHECK(quadratic_form(op, v) / op.inner(v, v) == doctest::Approx(eps * e.lambda).epsilon(1e-6));
    CHECK(quadratic_form(op, Eigen::VectorXd::Zero(g.size())) == 0.0);
    // a fiber mode costs O(eps), not O(1/eps)
    Eigen::VectorXd fiber(g.size());
    for (int k = 0; k < g.size(); ++k) fiber[k] = (1 - c.v[k] * c.v[k]) / 2;
    CHECK(std::abs(quadratic_form(op, fiber) / op.inner(fiber, fiber)) < 2 * eps);
    // tangential gradient retention with C = 1
    const TubularMap tub(Interface::circle(R, 128), 0.375);
    Eigen::VectorXd mask(g.size());
    const auto ts = tub.sample(g);
    for (int k = 0; k < g.size(); ++k) mask[k] = (!ts.saturated[k] && std::abs(ts.d.v[k]) < 0.375) ? 1.0 : 0.0;
    const double lam = quadratic_form(op, v, &mask);
    CHECK(tangential_energy(op, v, tub, 0.375) <= lam / eps + 1.0 * op.inner(v, v));
  }
}

TEST_CASE("fiber decomposition") {
  const double eps = 0.05, R = 1.0, delta = 0.25;
  const auto g = Grid2D::periodic(160, 160, -2, 2, -2, 2);
  const TubularMap tub(Interface::circle(R, 128), delta);
  const auto ts = tub.sample(g);
  const double beta = fiber_beta(theta0(), eps, delta);
  // int_{-L}^{L} sech^4(r/2)/4 = T - T^3/3 with T = tanh(L/2)
  const double T = std::tanh(delta / eps / 2);
  CHECK(1 / (beta * beta) == doctest::Approx(T - T * T * T / 3).epsilon(1e-8));

  // one fiber mode with Z = 1
  ScalarField2D psi(g);
  for (int k = 0; k < g.size(); ++k)
    if (!ts.saturated[k] && std::abs(ts.d.v[k]) < delta)
      psi.v[k] = beta * theta0().d1(ts.d.v[k] / eps) / std::sqrt(eps);
  auto fd = fiber_decompose(psi, tub, theta0(), eps);
  CHECK(!fd.truncation_warning);
  CHECK((fd.Z.array() - 1).abs().maxCoeff() < 1e-6);
  CHECK(fd.remainder.v.lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(fd.points.minCoeff() > 0);

  // theta0'' g(s) is orthogonal to theta0' in d rho; the Jacobian 1 - eps rho H
  // leaves a = eps H g / 2
  ScalarField2D odd(g);
  for (int k = 0; k < g.size(); ++k)
    if (!ts.saturated[k] && std::abs(ts.d.v[k]) < delta)
      odd.v[k] = theta0().d2(ts.d.v[k] / eps) * (1 + 0.5 * std::cos(2 * M_PI * ts.s[k]));
  fd = fiber_decompose(odd, tub, theta0(), eps);
  for (int j = 0; j < fd.s.size(); ++j) {
    const double a = eps * (1 + 0.5 * std::cos(2 * M_PI * fd.s[j])) / 2;
    CHECK(fd.Z[j] == doctest::Approx(std::sqrt(eps) * a / beta).epsilon(0.05));
  }
  CHECK(fd.remainder_fraction() > 0.99);

  // projector identities for a generic field
  ScalarField2D gen(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) gen(i, j) = std::sin(3 * g.x(i)) * std::exp(-g.y(j) * g.y(j)) + 0.3 * g.x(i);
  fd = fiber_decompose(gen, tub, theta0(), eps);
  CHECK(std::abs(fd.norm2 - fd.projection_norm2 - fd.remainder_norm2) <= 1e-12 * fd.norm2);
  const auto again = fiber_decompose(fd.projection, tub, theta0(), eps);
  CHECK((again.projection.v - fd.projection.v).lpNorm<Eigen::Infinity>() <=
        1e-12 * fd.projection.v.lpNorm<Eigen::Infinity>());
  CHECK(again.remainder.v.lpNorm<Eigen::Infinity>() <= 1e-12 * fd.projection.v.lpNorm<Eigen::Infinity>());

  // a wide layer in a thin tube is flagged
  CHECK(fiber_decompose(gen, tub, theta0(), 0.1).truncation_warning);
}
