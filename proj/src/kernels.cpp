#include "kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace hetgp {

void KernelSpec::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("kernel: eta must be positive");
  for (double r : rho) {
    if (!(r > 0.0)) throw std::invalid_argument("kernel: length-scales must be positive");
  }
  if (!(sigma >= 0.0)) throw std::invalid_argument("kernel: sigma must be non-negative");
  if (!(c >= 0.0)) throw std::invalid_argument("kernel: c must be non-negative");
}

KernelSpec se_iso(double eta, double rho, double c, double sigma) {
  KernelSpec s;
  s.family = KernelFamily::SeIso;
  s.eta = eta;
  s.rho = {rho};
  s.c = c;
  s.sigma = sigma;
  return s;
}

KernelSpec se_ard(double eta, std::vector<double> rho, double c, double sigma) {
  KernelSpec s;
  s.family = KernelFamily::SeArd;
  s.eta = eta;
  s.rho = std::move(rho);
  s.c = c;
  s.sigma = sigma;
  return s;
}

namespace {

double scaled_sq_dist(const KernelSpec& spec, Point a, Point b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel: input dimension mismatch");
  double d = 0.0;
  if (spec.family == KernelFamily::SeIso) {
    if (spec.rho.size() != 1) throw std::invalid_argument("kernel: SE_ISO needs one length-scale");
    for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
    return d / (spec.rho[0] * spec.rho[0]);
  }
  if (spec.rho.size() != a.size()) throw std::invalid_argument("kernel: rho dimension mismatch");
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = (a[k] - b[k]) / spec.rho[k];
    d += t * t;
  }
  return d;
}

}  // namespace

double cov_se_ard(const KernelSpec& spec, Point a, Point b) {
  return spec.c * spec.c + spec.eta * spec.eta * std::exp(-scaled_sq_dist(spec, a, b));
}

double cov_linear_ard(const KernelSpec& spec, Point a, Point b) {
  if (a.size() != b.size() || spec.gamma.size() != a.size()) {
    throw std::invalid_argument("kernel: gamma dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += spec.gamma[k] * spec.gamma[k] * a[k] * b[k];
  return s;
}

double cov(const KernelSpec& spec, Point a, Point b) {
  switch (spec.family) {
    case KernelFamily::SeIso:
    case KernelFamily::SeArd:
      return cov_se_ard(spec, a, b);
    case KernelFamily::LinearArd:
      return cov_linear_ard(spec, a, b);
    case KernelFamily::Sum:
      return cov_se_ard(spec, a, b) + cov_linear_ard(spec, a, b);
  }
  return 0.0;
}

double cov_gplc(const KernelSpec& spec, Point x_i, double w_i, Point x_j, double w_j) {
  const std::size_t p = x_i.size();
  if (x_j.size() != p || spec.rho.size() != p + 1) {
    throw std::invalid_argument("cov_gplc: need p+1 length-scales");
  }
  double d = 0.0;
  for (std::size_t k = 0; k < p; ++k) {
    const double t = (x_i[k] - x_j[k]) / spec.rho[k];
    d += t * t;
  }
  const double t = (w_i - w_j) / spec.rho[p];
  d += t * t;
  return spec.c * spec.c + spec.eta * spec.eta * std::exp(-d);
}

double cov_equiv_linear_w(const KernelSpec& k1, double sigma, Point x_i, double w_i, Point x_j,
                          double w_j) {
  return cov(k1, x_i, x_j) + sigma * sigma * w_i * w_j;
}

double cov_equiv_product(const KernelSpec& k1, const KernelSpec& k2, Point x_i, double w_i,
                         Point x_j, double w_j) {
  return cov(k1, x_i, x_j) + w_i * w_j * cov(k2, x_i, x_j);
}

Matrix cov_matrix(const KernelSpec& spec, const RowMatrix& x) {
  const Eigen::Index n = x.rows();
  Matrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = cov(spec, row_of(x, i), row_of(x, j));
      c(i, j) = v;
      c(j, i) = v;
    }
    c(i, i) = cov(spec, row_of(x, i), row_of(x, i)) + spec.sigma * spec.sigma;
  }
  return c;
}

RowMatrix augment(const RowMatrix& x, const Vector& w) {
  if (w.size() != x.rows()) throw std::invalid_argument("augment: latent length mismatch");
  RowMatrix out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()) = w;
  return out;
}

Matrix cov_matrix(const KernelSpec& spec, const RowMatrix& x, const Vector& w) {
  return cov_matrix(spec, augment(x, w));
}

Matrix cross_cov(const KernelSpec& spec, const RowMatrix& a, const RowMatrix& b) {
  Matrix k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = cov(spec, row_of(a, i), row_of(b, j));
  }
  return k;
}

}  // namespace hetgp
