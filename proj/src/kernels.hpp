#pragma once

#include "linalg.hpp"

#include <span>
#include <vector>

namespace hetgp {

enum class KernelFamily {
  SeIso,      // c² + η² exp(-|a-b|²/ρ²), single length-scale
  SeArd,      // c² + η² exp(-Σ (a_k-b_k)²/ρ_k²)
  LinearArd,  // Σ γ_k² a_k b_k
  Sum,        // SeArd + LinearArd over the same inputs
};

struct KernelSpec {
  KernelFamily family = KernelFamily::SeArd;
  double c = 0.1;
  double eta = 1.0;
  std::vector<double> rho;
  std::vector<double> gamma;
  double sigma = 0.0;  // added on the diagonal by cov_matrix only

  // Throws std::invalid_argument if eta <= 0, any rho <= 0, sigma < 0 or c < 0.
  void validate() const;
};

KernelSpec se_iso(double eta, double rho, double c = 0.1, double sigma = 0.0);
KernelSpec se_ard(double eta, std::vector<double> rho, double c = 0.1, double sigma = 0.0);

using Point = std::span<const double>;

double cov_se_ard(const KernelSpec& spec, Point a, Point b);
double cov_linear_ard(const KernelSpec& spec, Point a, Point b);

// Dispatches on spec.family. σ² is never included.
double cov(const KernelSpec& spec, Point a, Point b);

// SE-ARD over the augmented input (x, w); spec.rho has p+1 entries, the last
// one acting on w.
double cov_gplc(const KernelSpec& spec, Point x_i, double w_i, Point x_j, double w_j);

// K1(x_i, x_j) + σ² w_i w_j
double cov_equiv_linear_w(const KernelSpec& k1, double sigma, Point x_i, double w_i, Point x_j,
                          double w_j);

// K1(x_i, x_j) + w_i w_j K2(x_i, x_j)
double cov_equiv_product(const KernelSpec& k1, const KernelSpec& k2, Point x_i, double w_i,
                         Point x_j, double w_j);

// Rows of x are inputs. Returns the n×n covariance with σ² on the diagonal.
Matrix cov_matrix(const KernelSpec& spec, const RowMatrix& x);
// Same with each row augmented by its latent covariate w_i.
Matrix cov_matrix(const KernelSpec& spec, const RowMatrix& x, const Vector& w);

// Cross-covariance between rows of a and rows of b (no σ² term).
Matrix cross_cov(const KernelSpec& spec, const RowMatrix& a, const RowMatrix& b);

// Appends w as an extra column.
RowMatrix augment(const RowMatrix& x, const Vector& w);

inline Point row_of(const RowMatrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace hetgp
