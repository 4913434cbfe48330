#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <variant>

namespace hetgp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using LowerFactor = RowMatrix;

// Pivot k (1-based) was not strictly positive. Recoverable: samplers treat it
// as a rejected proposal.
struct NotPositiveDefinite {
  std::size_t pivot = 0;
};

template <typename T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(NotPositiveDefinite err) : v_(err) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Result::value() on NotPositiveDefinite");
    return std::get<T>(v_);
  }
  T&& value() && {
    if (!ok()) throw std::logic_error("Result::value() on NotPositiveDefinite");
    return std::get<T>(std::move(v_));
  }
  NotPositiveDefinite error() const { return std::get<NotPositiveDefinite>(v_); }

 private:
  std::variant<T, NotPositiveDefinite> v_;
};

/// Lower-triangular Cholesky factor L of a symmetric positive definite matrix,
/// with log det(L Lᵀ) cached.
class CholFactor {
 public:
  CholFactor() = default;

  std::size_t size() const { return static_cast<std::size_t>(l_.rows()); }
  const LowerFactor& lower() const { return l_; }
  double logdet() const { return logdet_; }

  // Product L Lᵀ.
  Matrix reconstruct() const;

 private:
  friend Result<CholFactor> cholesky(const Matrix& a);
  friend Result<CholFactor> cholesky_from(CholFactor prev, const Matrix& a, std::size_t first_row);
  friend std::size_t rank1_update_inplace(CholFactor& f, Vector v, int sign);

  void recompute_logdet();

  LowerFactor l_;
  double logdet_ = 0.0;
};

enum class UpdateSign { Plus, Minus };

Result<CholFactor> cholesky(const Matrix& a);

// Refactors only rows first_row..n-1, reusing rows 0..first_row-1 of prev. Valid
// when a agrees with prev's source matrix on its leading first_row rows.
Result<CholFactor> cholesky_from(CholFactor prev, const Matrix& a, std::size_t first_row);

// Factor of L Lᵀ ± v vᵀ in O(n²). Leading zeros of v are skipped.
Result<CholFactor> rank1_update(const CholFactor& f, const Vector& v, UpdateSign sign);

// In-place form with sign = +1 or -1. Returns 0 on success, otherwise the
// failing 1-based pivot; f is then left unspecified.
std::size_t rank1_update_inplace(CholFactor& f, Vector v, int sign);

// Solves L u = b.
Vector solve_lower(const CholFactor& f, const Vector& b);
// Solves L L^T x = b.
Vector solve_chol(const CholFactor& f, const Vector& b);
// Solves L U = B column-wise.
Matrix solve_lower(const CholFactor& f, const Matrix& b);

}  // namespace hetgp
