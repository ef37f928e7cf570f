#include <array>
#include <cmath>
#include <map>
#include <numbers>

#include "nsac/diffuse.hpp"
#include "nsac/errors.hpp"

namespace nsac {

namespace {

constexpr int kStencil = 8;

// Local tensor Lagrange interpolant of degree kStencil - 1.
class LocalInterp {
public:
  explicit LocalInterp(const ScalarField2D& c) : c_(c), g_(c.grid) {}

  // value and gradient at x
  double eval(const Vec2& x, Vec2* grad = nullptr) const {
    std::array<double, kStencil> wx, dx, wy, dy;
    std::array<int, kStencil> ix, iy;
    weights(x.x(), g_.x0, g_.hx, g_.nx, wx, dx, ix);
    weights(x.y(), g_.y0, g_.hy, g_.ny, wy, dy, iy);
    double v = 0, gx = 0, gy = 0;
    for (int b = 0; b < kStencil; ++b)
      for (int a = 0; a < kStencil; ++a) {
        const double f = c_.v[g_.idx(ix[a], iy[b])];
        v += wx[a] * wy[b] * f;
        gx += dx[a] * wy[b] * f;
        gy += wx[a] * dy[b] * f;
      }
    if (grad) *grad = Vec2(gx, gy);
    return v;
  }

private:
  const ScalarField2D& c_;
  const Grid2D& g_;

  void weights(double x, double x0, double h, int n, std::array<double, kStencil>& w, std::array<double, kStencil>& dw,
               std::array<int, kStencil>& idx) const {
    const double q = (x - x0) / h;
    int start = static_cast<int>(std::floor(q)) - kStencil / 2 + 1;
    const bool periodic = g_.bc == Boundary::Periodic;
    if (!periodic) start = std::clamp(start, 0, n - kStencil);
    const double t = q - start;  // position in stencil units
    for (int a = 0; a < kStencil; ++a) {
      int k = start + a;
      if (periodic) k = ((k % n) + n) % n;
      idx[a] = k;
      double num = 1, den = 1, dsum = 0;
      bool hit = false;
      for (int b = 0; b < kStencil; ++b) {
        if (b == a) continue;
        den *= a - b;
        num *= t - b;
        if (t - b == 0) hit = true;
      }
      w[a] = num / den;
      // derivative of the Lagrange basis
      if (!hit) {
        for (int b = 0; b < kStencil; ++b)
          if (b != a) dsum += 1.0 / (t - b);
        dw[a] = w[a] * dsum / h;
      } else {
        double d = 0;
        for (int m = 0; m < kStencil; ++m) {
          if (m == a) continue;
          double p = 1;
          for (int b = 0; b < kStencil; ++b)
            if (b != a && b != m) p *= t - b;
          d += p;
        }
        dw[a] = d / den / h;
      }
    }
  }
};

// zero crossings on grid edges, linked into closed polygons
std::vector<std::vector<Vec2>> marching_squares(const ScalarField2D& c) {
  const Grid2D& g = c.grid;
  const bool periodic = g.bc == Boundary::Periodic;
  const int sx = periodic ? g.nx : g.nx - 1, sy = periodic ? g.ny : g.ny - 1;
  auto val = [&](int i, int j) { return c.v[g.idx(i % g.nx, j % g.ny)]; };
  // edge keys: 2 * (i + nx j) for the edge to (i+1, j), +1 for the edge to (i, j+1)
  auto hkey = [&](int i, int j) { return 2L * ((i % g.nx) + g.nx * (j % g.ny)); };
  auto vkey = [&](int i, int j) { return 2L * ((i % g.nx) + g.nx * (j % g.ny)) + 1; };
  std::map<long, Vec2> point;
  std::map<long, std::vector<long>> adj;
  auto crossing = [&](int i0, int j0, int i1, int j1) {
    const double a = val(i0, j0), b = val(i1, j1);
    const double t = a / (a - b);
    return Vec2(g.x(i0) + t * (i1 - i0) * g.hx, g.y(j0) + t * (j1 - j0) * g.hy);
  };
  auto add_edge = [&](long key, int i0, int j0, int i1, int j1) {
    if (!point.count(key)) point[key] = crossing(i0, j0, i1, j1);
    return key;
  };
  for (int j = 0; j < sy; ++j)
    for (int i = 0; i < sx; ++i) {
      const double v00 = val(i, j), v10 = val(i + 1, j), v11 = val(i + 1, j + 1), v01 = val(i, j + 1);
      std::vector<long> e;
      // edges in cyclic order: bottom, right, top, left
      if ((v00 > 0) != (v10 > 0)) e.push_back(add_edge(hkey(i, j), i, j, i + 1, j));
      if ((v10 > 0) != (v11 > 0)) e.push_back(add_edge(vkey(i + 1, j), i + 1, j, i + 1, j + 1));
      if ((v01 > 0) != (v11 > 0)) e.push_back(add_edge(hkey(i, j + 1), i, j + 1, i + 1, j + 1));
      if ((v00 > 0) != (v01 > 0)) e.push_back(add_edge(vkey(i, j), i, j, i, j + 1));
      if (e.empty()) continue;
      if (e.size() == 2) {
        adj[e[0]].push_back(e[1]);
        adj[e[1]].push_back(e[0]);
      } else if (e.size() == 4) {
        // saddle: the centre value decides which corners connect
        const bool centre = (v00 + v10 + v11 + v01) > 0;
        const bool pair01 = centre == (v00 > 0) ? false : true;
        if (pair01) {
          adj[e[0]].push_back(e[3]);
          adj[e[3]].push_back(e[0]);
          adj[e[1]].push_back(e[2]);
          adj[e[2]].push_back(e[1]);
        } else {
          adj[e[0]].push_back(e[1]);
          adj[e[1]].push_back(e[0]);
          adj[e[2]].push_back(e[3]);
          adj[e[3]].push_back(e[2]);
        }
      }
    }
  std::vector<std::vector<Vec2>> loops;
  std::map<long, bool> used;
  for (const auto& [key, nb] : adj) {
    if (used[key]) continue;
    std::vector<Vec2> poly;
    long prev = -1, cur = key;
    bool closed = false;
    while (true) {
      used[cur] = true;
      poly.push_back(point[cur]);
      const auto& n = adj[cur];
      long next = -1;
      for (long k : n)
        if (k != prev && !used[k]) {
          next = k;
          break;
        }
      if (next < 0) {
        for (long k : n)
          if (k == key && poly.size() > 2) closed = true;
        break;
      }
      prev = cur;
      cur = next;
    }
    if (!closed) throw NoCrossing("zero level set is not a closed curve inside the domain");
    loops.push_back(std::move(poly));
  }
  return loops;
}

std::vector<Vec2> uniform_polygon(const std::vector<Vec2>& poly, int n) {
  const int m = static_cast<int>(poly.size());
  std::vector<double> cum(m + 1, 0.0);
  for (int k = 0; k < m; ++k) cum[k + 1] = cum[k] + (poly[(k + 1) % m] - poly[k]).norm();
  std::vector<Vec2> out(n);
  int seg = 0;
  for (int j = 0; j < n; ++j) {
    const double s = cum[m] * j / n;
    while (seg + 1 < m && cum[seg + 1] < s) ++seg;
    const double t = (s - cum[seg]) / std::max(cum[seg + 1] - cum[seg], 1e-300);
    out[j] = poly[seg] + t * (poly[(seg + 1) % m] - poly[seg]);
  }
  return out;
}

// Newton along the gradient onto the zero set of the interpolant
void project_points(std::vector<Vec2>& pts, const LocalInterp& P) {
  for (auto& x : pts) {
    for (int it = 0; it < 30; ++it) {
      Vec2 gr;
      const double v = P.eval(x, &gr);
      const double g2 = gr.squaredNorm();
      if (g2 == 0) throw NoCrossing("flat level set during projection");
      const Vec2 dx = (v / g2) * gr;
      x -= dx;
      if (dx.norm() < 1e-14) break;
    }
  }
}

}  // namespace

Interface zero_level_set(const ScalarField2D& c, int n) {
  auto loops = marching_squares(c);
  if (loops.empty()) throw NoCrossing("no zero crossing");
  if (loops.size() > 1) throw MultipleComponents("zero level set has " + std::to_string(loops.size()) + " components");
  const auto& poly = loops.front();
  double len = 0;
  for (size_t k = 0; k < poly.size(); ++k) len += (poly[(k + 1) % poly.size()] - poly[k]).norm();
  const double h = std::min(c.grid.hx, c.grid.hy);
  if (n <= 0) n = std::max(64, 2 * static_cast<int>(std::ceil(len / h / 2)));
  if (n % 2) ++n;
  const LocalInterp P(c);
  // alternate chord-length resampling and projection; the parametrisation
  // becomes smooth once the points sit on the curve
  std::vector<Vec2> pts = poly;
  project_points(pts, P);
  for (int pass = 0; pass < 3; ++pass) {
    pts = uniform_polygon(pts, n);
    project_points(pts, P);
  }
  Interface iface(pts);
  // orient so that the normal points into {c > 0}
  Vec2 gr;
  P.eval(iface.node(0), &gr);
  if (gr.dot(iface.node_normal(0)) < 0) iface = Interface(std::vector<Vec2>(pts.rbegin(), pts.rend()));
  return iface;
}

double level_set_radius(const Interface& iface) { return std::sqrt(std::abs(iface.area()) / std::numbers::pi); }

}  // namespace nsac
