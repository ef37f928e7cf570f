#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace nsac {

using cplx = std::complex<double>;

// Periodic samples v_j = v(j/n) on [0,1).  Forward transform is unnormalized.
std::vector<cplx> dft(const Eigen::VectorXd& v);
Eigen::VectorXd idft_real(const std::vector<cplx>& c);

// signed wavenumber of coefficient index j for length n
inline int wavenumber(int j, int n) { return j <= n / 2 ? j : j - n; }

// m-th derivative in s (period `period`); odd orders drop the Nyquist mode
Eigen::VectorXd periodic_derivative(const Eigen::VectorXd& v, int order, double period = 1.0);

// dense matrix of the same operator
Eigen::MatrixXd fourier_diff_matrix(int n, int order, double period = 1.0);

// band-limited resampling to m equispaced points
Eigen::VectorXd trig_resample(const Eigen::VectorXd& v, int m);

// value (or derivative) of the trigonometric interpolant at arbitrary s
double trig_eval(const std::vector<cplx>& coef, double s, int order = 0);

// Real 2D transforms on a periodic ny x nx array stored row by row (x fastest).
// Instances hold scratch buffers: one instance per thread.
class Fft2 {
public:
  Fft2(int nx, int ny, double lx, double ly);
  ~Fft2();
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nxh() const { return nx_ / 2 + 1; }
  int spectral_size() const { return ny_ * nxh(); }

  void forward(const double* in, cplx* out) const;
  void backward(const cplx* in, double* out) const;  // includes 1/(nx ny)

  // wavenumbers: full (for the Laplacian) and derivative (Nyquist zeroed)
  double kx(int j) const { return kx_[j]; }
  double ky(int l) const { return ky_[l]; }
  double kxd(int j) const { return kxd_[j]; }
  double kyd(int l) const { return kyd_[l]; }
  double k2(int j, int l) const { return kx_[j] * kx_[j] + ky_[l] * ky_[l]; }

private:
  int nx_, ny_;
  std::vector<double> kx_, ky_, kxd_, kyd_;
  double* rbuf_;
  void* cbuf_;
  void* plan_f_;
  void* plan_b_;
};

}  // namespace nsac
