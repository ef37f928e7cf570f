#include "nsac/fourier.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

namespace nsac {

namespace {

// the FFTW planner is not reentrant
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void dft_c2c(std::vector<cplx>& a, int sign) {
  const int n = static_cast<int>(a.size());
  auto* p = reinterpret_cast<fftw_complex*>(a.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, p, p, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace

std::vector<cplx> dft(const Eigen::VectorXd& v) {
  std::vector<cplx> a(v.size());
  for (int j = 0; j < v.size(); ++j) a[j] = v[j];
  dft_c2c(a, FFTW_FORWARD);
  return a;
}

Eigen::VectorXd idft_real(const std::vector<cplx>& c) {
  std::vector<cplx> a = c;
  dft_c2c(a, FFTW_BACKWARD);
  const int n = static_cast<int>(a.size());
  Eigen::VectorXd v(n);
  for (int j = 0; j < n; ++j) v[j] = a[j].real() / n;
  return v;
}

Eigen::VectorXd periodic_derivative(const Eigen::VectorXd& v, int order, double period) {
  const int n = static_cast<int>(v.size());
  if (order == 0) return v;
  auto c = dft(v);
  const double w = 2.0 * std::numbers::pi / period;
  for (int j = 0; j < n; ++j) {
    const int k = wavenumber(j, n);
    if (n % 2 == 0 && j == n / 2 && order % 2 == 1) {
      c[j] = 0.0;
      continue;
    }
    c[j] *= std::pow(cplx(0.0, w * k), order);
  }
  return idft_real(c);
}

Eigen::MatrixXd fourier_diff_matrix(int n, int order, double period) {
  Eigen::MatrixXd D(n, n);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    e.setZero();
    e[j] = 1.0;
    D.col(j) = periodic_derivative(e, order, period);
  }
  return D;
}

Eigen::VectorXd trig_resample(const Eigen::VectorXd& v, int m) {
  const int n = static_cast<int>(v.size());
  auto c = dft(v);
  std::vector<cplx> d(m, 0.0);
  auto put = [&](int k, cplx a) {
    if (2 * std::abs(k) > m) return;
    d[k >= 0 ? k : m + k] += a;
  };
  for (int j = 0; j < n; ++j) {
    const int k = wavenumber(j, n);
    if (n % 2 == 0 && j == n / 2) {
      // split the Nyquist coefficient between +k and -k
      put(k, 0.5 * c[j]);
      put(-k, 0.5 * c[j]);
    } else {
      put(k, c[j]);
    }
  }
  const double scale = static_cast<double>(m) / n;
  for (auto& x : d) x *= scale;
  return idft_real(d);
}

double trig_eval(const std::vector<cplx>& coef, double s, int order) {
  const int n = static_cast<int>(coef.size());
  const double w = 2.0 * std::numbers::pi;
  double sum = coef[0].real() * (order == 0 ? 1.0 : 0.0);
  const int kmax = (n - 1) / 2;
  for (int k = 1; k <= kmax; ++k) {
    const cplx ck = coef[k];
    const double a = w * k;
    const double ph = a * s;
    const double c = std::cos(ph), sn = std::sin(ph);
    // 2 Re(ck (i a)^m e^{i a s})
    cplx f = ck * std::pow(cplx(0.0, a), order) * cplx(c, sn);
    sum += 2.0 * f.real();
  }
  if (n % 2 == 0) {
    const double a = w * (n / 2);
    const double re = coef[n / 2].real();
    // Nyquist mode interpolates as a cosine
    switch (order % 4) {
      case 0: sum += re * std::pow(a, order) * std::cos(a * s); break;
      case 1: sum -= re * std::pow(a, order) * std::sin(a * s); break;
      case 2: sum -= re * std::pow(a, order) * std::cos(a * s); break;
      default: sum += re * std::pow(a, order) * std::sin(a * s); break;
    }
  }
  return sum / n;
}

Fft2::Fft2(int nx, int ny, double lx, double ly) : nx_(nx), ny_(ny) {
  if (nx < 2 || ny < 1) throw std::invalid_argument("Fft2: bad size");
  const double two_pi = 2.0 * std::numbers::pi;
  kx_.resize(nxh());
  kxd_.resize(nxh());
  for (int j = 0; j < nxh(); ++j) {
    kx_[j] = two_pi * j / lx;
    kxd_[j] = (nx % 2 == 0 && j == nx / 2) ? 0.0 : kx_[j];
  }
  ky_.resize(ny);
  kyd_.resize(ny);
  for (int l = 0; l < ny; ++l) {
    const int k = wavenumber(l, ny);
    ky_[l] = ny == 1 ? 0.0 : two_pi * k / ly;
    kyd_[l] = (ny % 2 == 0 && l == ny / 2) ? 0.0 : ky_[l];
  }
  rbuf_ = fftw_alloc_real(static_cast<size_t>(nx) * ny);
  cbuf_ = fftw_alloc_complex(static_cast<size_t>(spectral_size()));
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* cb = static_cast<fftw_complex*>(cbuf_);
  if (ny == 1) {
    plan_f_ = fftw_plan_dft_r2c_1d(nx, rbuf_, cb, FFTW_ESTIMATE);
    plan_b_ = fftw_plan_dft_c2r_1d(nx, cb, rbuf_, FFTW_ESTIMATE);
  } else {
    plan_f_ = fftw_plan_dft_r2c_2d(ny, nx, rbuf_, cb, FFTW_ESTIMATE);
    plan_b_ = fftw_plan_dft_c2r_2d(ny, nx, cb, rbuf_, FFTW_ESTIMATE);
  }
}

Fft2::~Fft2() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_f_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_b_));
  fftw_free(rbuf_);
  fftw_free(cbuf_);
}

void Fft2::forward(const double* in, cplx* out) const {
  const size_t n = static_cast<size_t>(nx_) * ny_;
  std::copy(in, in + n, rbuf_);
  fftw_execute(static_cast<fftw_plan>(plan_f_));
  auto* cb = reinterpret_cast<cplx*>(cbuf_);
  std::copy(cb, cb + spectral_size(), out);
}

void Fft2::backward(const cplx* in, double* out) const {
  auto* cb = reinterpret_cast<cplx*>(cbuf_);
  std::copy(in, in + spectral_size(), cb);
  fftw_execute(static_cast<fftw_plan>(plan_b_));
  const size_t n = static_cast<size_t>(nx_) * ny_;
  const double s = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) out[i] = rbuf_[i] * s;
}

}  // namespace nsac
