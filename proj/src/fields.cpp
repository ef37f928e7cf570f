#include "nsac/fields.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace nsac {

Grid2D Grid2D::periodic(int nx, int ny, double xmin, double xmax, double ymin, double ymax) {
  Grid2D g;
  g.nx = nx;
  g.ny = ny;
  g.hx = (xmax - xmin) / nx;
  g.hy = (ymax - ymin) / ny;
  g.x0 = xmin;
  g.y0 = ymin;
  g.bc = Boundary::Periodic;
  return g;
}

Grid2D Grid2D::cells(int nx, int ny, double xmin, double xmax, double ymin, double ymax) {
  Grid2D g;
  g.nx = nx;
  g.ny = ny;
  g.hx = (xmax - xmin) / nx;
  g.hy = (ymax - ymin) / ny;
  g.x0 = xmin + 0.5 * g.hx;
  g.y0 = ymin + 0.5 * g.hy;
  g.bc = Boundary::Dirichlet;
  return g;
}

VectorField2D::VectorField2D(const Grid2D& g, Staggering s) : grid(g), stag(s) {
  u = Eigen::VectorXd::Zero(u_size());
  v = Eigen::VectorXd::Zero(v_size());
}

SpectralOps::SpectralOps(const Grid2D& g)
    : grid_(g), fft_(g.nx, g.ny, g.lx(), g.ly()), w1_(fft_.spectral_size()), w2_(fft_.spectral_size()) {
  if (g.bc != Boundary::Periodic) throw std::invalid_argument("SpectralOps needs a periodic grid");
}

void SpectralOps::dx(const Eigen::VectorXd& f, Eigen::VectorXd& out) const {
  fft_.forward(f.data(), w1_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) w1_[j + nh * l] *= cplx(0.0, fft_.kxd(j));
  out.resize(f.size());
  fft_.backward(w1_.data(), out.data());
}

void SpectralOps::dy(const Eigen::VectorXd& f, Eigen::VectorXd& out) const {
  fft_.forward(f.data(), w1_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) w1_[j + nh * l] *= cplx(0.0, fft_.kyd(l));
  out.resize(f.size());
  fft_.backward(w1_.data(), out.data());
}

void SpectralOps::grad(const Eigen::VectorXd& f, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const {
  fft_.forward(f.data(), w1_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) {
      const int k = j + nh * l;
      w2_[k] = w1_[k] * cplx(0.0, fft_.kyd(l));
      w1_[k] *= cplx(0.0, fft_.kxd(j));
    }
  gx.resize(f.size());
  gy.resize(f.size());
  fft_.backward(w1_.data(), gx.data());
  fft_.backward(w2_.data(), gy.data());
}

void SpectralOps::laplacian(const Eigen::VectorXd& f, Eigen::VectorXd& out) const {
  fft_.forward(f.data(), w1_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) w1_[j + nh * l] *= -fft_.k2(j, l);
  out.resize(f.size());
  fft_.backward(w1_.data(), out.data());
}

void SpectralOps::divergence(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
  fft_.forward(u.data(), w1_.data());
  fft_.forward(v.data(), w2_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) {
      const int k = j + nh * l;
      w1_[k] = cplx(0.0, fft_.kxd(j)) * w1_[k] + cplx(0.0, fft_.kyd(l)) * w2_[k];
    }
  out.resize(u.size());
  fft_.backward(w1_.data(), out.data());
}

void SpectralOps::helmholtz_inverse(const Eigen::VectorXd& f, double a, double b, Eigen::VectorXd& out) const {
  fft_.forward(f.data(), w1_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) {
      const double den = a + b * fft_.k2(j, l);
      if (den != 0.0) w1_[j + nh * l] /= den;
    }
  out.resize(f.size());
  fft_.backward(w1_.data(), out.data());
}

void SpectralOps::leray(Eigen::VectorXd& u, Eigen::VectorXd& v) const {
  fft_.forward(u.data(), w1_.data());
  fft_.forward(v.data(), w2_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) {
      const int k = j + nh * l;
      const double ax = fft_.kxd(j), ay = fft_.kyd(l);
      const double kk = ax * ax + ay * ay;
      if (kk == 0.0) continue;
      const cplx dot = (ax * w1_[k] + ay * w2_[k]) / kk;
      w1_[k] -= ax * dot;
      w2_[k] -= ay * dot;
    }
  fft_.backward(w1_.data(), u.data());
  fft_.backward(w2_.data(), v.data());
}

void SpectralOps::gradient_potential(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& p) const {
  fft_.forward(u.data(), w1_.data());
  fft_.forward(v.data(), w2_.data());
  const int nh = fft_.nxh();
  for (int l = 0; l < grid_.ny; ++l)
    for (int j = 0; j < nh; ++j) {
      const int k = j + nh * l;
      const double ax = fft_.kxd(j), ay = fft_.kyd(l);
      const double kk = ax * ax + ay * ay;
      // i k p_hat = k (k . w_hat)/|k|^2
      w1_[k] = kk == 0.0 ? cplx(0.0) : (ax * w1_[k] + ay * w2_[k]) / (cplx(0.0, 1.0) * kk);
    }
  p.resize(u.size());
  fft_.backward(w1_.data(), p.data());
}

namespace {
const char kMagic[8] = {'N', 'S', 'A', 'C', 'F', 'L', 'D', '1'};

nlohmann::json grid_json(const Grid2D& g) {
  return {{"nx", g.nx}, {"ny", g.ny}, {"x0", g.x0}, {"y0", g.y0}, {"hx", g.hx}, {"hy", g.hy},
          {"bc", g.bc == Boundary::Periodic ? "periodic" : "dirichlet"}};
}
}  // namespace

void write_snapshot(const std::string& path, const std::vector<std::pair<std::string, const ScalarField2D*>>& fields,
                    double t) {
  nlohmann::json h;
  h["t"] = t;
  h["dtype"] = "float64-le";
  h["fields"] = nlohmann::json::array();
  for (const auto& [name, f] : fields)
    h["fields"].push_back({{"name", name}, {"grid", grid_json(f->grid)}, {"boundary_value", f->boundary_value},
                           {"count", f->v.size()}});
  const std::string hs = h.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, 8);
  const uint64_t len = hs.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, f] : fields)
    os.write(reinterpret_cast<const char*>(f->v.data()), static_cast<std::streamsize>(f->v.size() * sizeof(double)));
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("not a snapshot: " + path);
  uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string hs(len, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(len));
  auto h = nlohmann::json::parse(hs);
  Snapshot s;
  s.t = h["t"].get<double>();
  for (const auto& f : h["fields"]) {
    const auto& gj = f["grid"];
    Grid2D g;
    g.nx = gj["nx"];
    g.ny = gj["ny"];
    g.x0 = gj["x0"];
    g.y0 = gj["y0"];
    g.hx = gj["hx"];
    g.hy = gj["hy"];
    g.bc = gj["bc"] == "periodic" ? Boundary::Periodic : Boundary::Dirichlet;
    ScalarField2D sf(g, 0.0, f["boundary_value"].get<double>());
    const long count = f["count"];
    sf.v.resize(count);
    is.read(reinterpret_cast<char*>(sf.v.data()), static_cast<std::streamsize>(count * sizeof(double)));
    s.fields.emplace_back(f["name"].get<std::string>(), std::move(sf));
  }
  if (!is) throw std::runtime_error("truncated snapshot: " + path);
  return s;
}

}  // namespace nsac
