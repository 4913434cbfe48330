#include "linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hetgp;

namespace {

Matrix random_spd(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix a(n, n);
  for (auto& v : a.reshaped()) v = nd(rng);
  Matrix s = a * a.transpose();
  s.diagonal().array() += static_cast<double>(n) * 0.1;
  return s;
}

Vector random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

double rel_frob(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("cholesky of the identity is the identity") {
  auto f = cholesky(Matrix::Identity(3, 3));
  REQUIRE(f.ok());
  CHECK((Matrix(f.value().lower()) - Matrix::Identity(3, 3)).norm() == 0.0);
  CHECK(f.value().logdet() == 0.0);
}

TEST_CASE("cholesky of a 2x2 hand example") {
  Matrix a(2, 2);
  a << 4, 2, 2, 5;
  auto f = cholesky(a);
  REQUIRE(f.ok());
  const auto& l = f.value().lower();
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(2.0));
  CHECK(f.value().logdet() == doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("indefinite matrix reports the failing pivot") {
  Matrix a(2, 2);
  a << 1, 2, 2, 1;
  auto f = cholesky(a);
  REQUIRE_FALSE(f.ok());
  CHECK(f.error().pivot == 2);
}

TEST_CASE("reconstruction and logdet agree with an LU oracle") {
  std::mt19937_64 rng(11);
  for (std::size_t n : {1, 2, 5, 20, 50}) {
    const Matrix a = random_spd(n, rng);
    auto f = cholesky(a);
    REQUIRE(f.ok());
    CHECK(rel_frob(f.value().reconstruct(), a) < 1e-8);
    const double lu_logdet = std::log(Eigen::FullPivLU<Matrix>(a).determinant());
    CHECK(std::abs(f.value().logdet() - lu_logdet) < 1e-8 * std::max(1.0, std::abs(lu_logdet)));
    for (Eigen::Index i = 0; i < a.rows(); ++i) CHECK(f.value().lower()(i, i) > 0.0);
  }
}

TEST_CASE("rank-1 update examples") {
  auto id = cholesky(Matrix::Identity(2, 2)).value();
  SUBCASE("zero vector leaves the factor unchanged") {
    auto g = rank1_update(id, Vector::Zero(2), UpdateSign::Plus);
    REQUIRE(g.ok());
    CHECK((Matrix(g.value().lower()) - Matrix(id.lower())).norm() == 0.0);
  }
  SUBCASE("e1 update doubles the leading entry of the matrix") {
    Vector v(2);
    v << 1, 0;
    auto g = rank1_update(id, v, UpdateSign::Plus);
    REQUIRE(g.ok());
    Matrix want(2, 2);
    want << 2, 0, 0, 1;
    CHECK((g.value().reconstruct() - want).norm() < 1e-14);
  }
  SUBCASE("downdate that breaks positivity is reported") {
    Vector v(2);
    v << 0, 1.5;
    auto g = rank1_update(id, v, UpdateSign::Minus);
    REQUIRE_FALSE(g.ok());
    CHECK(g.error().pivot == 2);
  }
}

TEST_CASE("rank-1 update matches full recomputation on random 20x20") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = random_spd(20, rng);
    const Vector v = random_vec(20, rng);
    auto f = cholesky(a).value();
    auto up = rank1_update(f, v, UpdateSign::Plus);
    REQUIRE(up.ok());
    auto full = cholesky(Matrix(a + v * v.transpose())).value();
    CHECK((Matrix(up.value().lower()) - Matrix(full.lower())).norm() < 1e-8);
    CHECK(std::abs(up.value().logdet() - full.logdet()) < 1e-8);

    auto back = rank1_update(up.value(), v, UpdateSign::Minus);
    REQUIRE(back.ok());
    CHECK((Matrix(back.value().lower()) - Matrix(f.lower())).norm() < 1e-6);
  }
}

TEST_CASE("partial refactorization from a row reuses the leading block") {
  std::mt19937_64 rng(9);
  const Matrix a = random_spd(12, rng);
  auto f = cholesky(a).value();
  Matrix b = a;
  b.diagonal().tail(5).array() += 1.0;  // rows 7.. change
  auto g = cholesky_from(f, b, 7);
  REQUIRE(g.ok());
  auto full = cholesky(b).value();
  CHECK((Matrix(g.value().lower()) - Matrix(full.lower())).norm() < 1e-10);
  CHECK(std::abs(g.value().logdet() - full.logdet()) < 1e-10);
}

TEST_CASE("solves") {
  SUBCASE("identity factor returns b") {
    auto id = cholesky(Matrix::Identity(3, 3)).value();
    Vector b(3);
    b << 1, -2, 3;
    CHECK((solve_chol(id, b) - b).norm() == 0.0);
  }
  SUBCASE("2x2 hand example") {
    Matrix a(2, 2);
    a << 4, 2, 2, 5;
    Vector b(2);
    b << 6, 7;
    const Vector x = solve_chol(cholesky(a).value(), b);
    CHECK(x(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x(1) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("random 10x10 residual") {
    std::mt19937_64 rng(3);
    const Matrix a = random_spd(10, rng);
    const Vector b = random_vec(10, rng);
    const Vector x = solve_chol(cholesky(a).value(), b);
    CHECK((a * x - b).norm() / b.norm() < 1e-10);
  }
  SUBCASE("dimension mismatch throws") {
    auto id = cholesky(Matrix::Identity(3, 3)).value();
    CHECK_THROWS_AS(solve_chol(id, Vector::Zero(2)), std::invalid_argument);
  }
}
