#include "linalg.hpp"

#include <cmath>

namespace hetgp {

Matrix CholFactor::reconstruct() const {
  Matrix l = l_;
  return l * l.transpose();
}

void CholFactor::recompute_logdet() {
  double s = 0.0;
  for (Eigen::Index k = 0; k < l_.rows(); ++k) s += std::log(l_(k, k));
  logdet_ = 2.0 * s;
}

Result<CholFactor> cholesky_from(CholFactor prev, const Matrix& a, std::size_t first_row) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("cholesky: matrix not square");
  if (static_cast<Eigen::Index>(prev.size()) != n) {
    prev.l_ = LowerFactor::Zero(n, n);
    first_row = 0;
  }
  LowerFactor& l = prev.l_;
  // Row-oriented (Cholesky-Banachiewicz): row i depends on rows < i only.
  for (Eigen::Index i = static_cast<Eigen::Index>(first_row); i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double s = a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
      l(i, j) = s / l(j, j);
    }
    const double d = a(i, i) - l.row(i).head(i).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      return NotPositiveDefinite{static_cast<std::size_t>(i) + 1};
    }
    l(i, i) = std::sqrt(d);
    for (Eigen::Index j = i + 1; j < n; ++j) l(i, j) = 0.0;
  }
  prev.recompute_logdet();
  return prev;
}

Result<CholFactor> cholesky(const Matrix& a) { return cholesky_from(CholFactor{}, a, 0); }

std::size_t rank1_update_inplace(CholFactor& f, Vector v, int sign) {
  LowerFactor& l = f.l_;
  const Eigen::Index n = l.rows();
  if (v.size() != n) throw std::invalid_argument("rank1_update: dimension mismatch");
  Eigen::Index start = 0;
  while (start < n && v(start) == 0.0) ++start;
  for (Eigen::Index k = start; k < n; ++k) {
    const double lkk = l(k, k);
    const double r2 = lkk * lkk + sign * v(k) * v(k);
    if (!(r2 > 0.0) || !std::isfinite(r2)) return static_cast<std::size_t>(k) + 1;
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = v(k) / lkk;
    l(k, k) = r;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      l(i, k) = (l(i, k) + sign * s * v(i)) / c;
      v(i) = c * v(i) - s * l(i, k);
    }
  }
  f.recompute_logdet();
  return 0;
}

Result<CholFactor> rank1_update(const CholFactor& f, const Vector& v, UpdateSign sign) {
  CholFactor out = f;
  if (auto pivot = rank1_update_inplace(out, v, sign == UpdateSign::Plus ? 1 : -1)) {
    return NotPositiveDefinite{pivot};
  }
  return out;
}

Vector solve_lower(const CholFactor& f, const Vector& b) {
  if (static_cast<std::size_t>(b.size()) != f.size()) {
    throw std::invalid_argument("solve_lower: dimension mismatch");
  }
  return f.lower().triangularView<Eigen::Lower>().solve(b);
}

Matrix solve_lower(const CholFactor& f, const Matrix& b) {
  if (static_cast<std::size_t>(b.rows()) != f.size()) {
    throw std::invalid_argument("solve_lower: dimension mismatch");
  }
  return f.lower().triangularView<Eigen::Lower>().solve(b);
}

Vector solve_chol(const CholFactor& f, const Vector& b) {
  Vector u = solve_lower(f, b);
  return f.lower().transpose().triangularView<Eigen::Upper>().solve(u);
}

}  // namespace hetgp
