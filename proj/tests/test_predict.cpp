#include "predict.hpp"

#include "dense_oracle.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace hetgp;

namespace {

RowMatrix column(std::initializer_list<double> xs) {
  RowMatrix x(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double v : xs) x(i++, 0) = v;
  return x;
}

struct Draws {
  std::vector<StoredDraw> store;
  std::vector<const StoredDraw*> ptrs() const {
    std::vector<const StoredDraw*> out;
    for (const auto& d : store) out.push_back(&d);
    return out;
  }
  void add(std::vector<double> hyper, Vector latent = {}) { store.push_back({0, std::move(hyper), std::move(latent)}); }
};

PriorSpec no_constant() {
  PriorSpec p;
  p.c = 0.0;
  return p;
}

}  // namespace

TEST_CASE("STD two-point hand case") {
  // η = σ = 1 and ρ huge: C = [[2,1],[1,2]], k = (1,1), prior variance 1 + σ².
  const TrainingData d{column({0.0, 1.0}), Vector::Ones(2)};
  const Model m(ModelKind::Std, d, no_constant());
  Draws dr;
  dr.add({0.0, std::log(1e8), 0.0});
  const auto s = predict_std(m, dr.ptrs(), column({0.4}));
  CHECK(s.means(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  // σ̂² = v - kᵀC⁻¹k = 2 - 2/3
  CHECK(s.vars(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-10));
}

TEST_CASE("STD far from the data reverts to the prior") {
  const TrainingData d{column({0.0, 0.5, 1.0}), Vector::Constant(3, 2.0)};
  const Model m(ModelKind::Std, d, no_constant());
  Draws dr;
  dr.add({std::log(1.5), 0.0, std::log(0.3)});
  const auto s = predict_std(m, dr.ptrs(), column({1e3}));
  CHECK(s.means(0, 0) == doctest::Approx(0.0));
  CHECK(s.vars(0, 0) == doctest::Approx(1.5 * 1.5 + 0.3 * 0.3).epsilon(1e-12));
}

TEST_CASE("STD interpolates as the noise vanishes") {
  const TrainingData d{column({0.0, 1.0, 2.5}), Vector{{0.7, -1.2, 0.4}}};
  const Model m(ModelKind::Std, d);
  Draws dr;
  dr.add({0.0, 0.0, std::log(1e-6)});
  const auto s = predict_std(m, dr.ptrs(), column({1.0}));
  CHECK(std::abs(s.means(0, 0) - (-1.2)) < 1e-3);
  CHECK(s.vars(0, 0) < 1e-6);
  CHECK(s.vars(0, 0) >= 1e-12 * (1 - 1e-6));
}

TEST_CASE("pooled variance is the law of total variance") {
  std::mt19937_64 g(3);
  const auto rc = testutil::random_case(g, 15, 2);
  const Model m(ModelKind::Std, rc.data);
  Draws dr;
  for (int j = 0; j < 6; ++j) dr.add(testutil::random_hyper(g, m.n_hyper()));
  RowMatrix xt(8, 2);
  for (Eigen::Index i = 0; i < xt.size(); ++i) xt.data()[i] = std::normal_distribution<double>()(g);
  const auto s = predict_std(m, dr.ptrs(), xt);
  for (Eigen::Index i = 0; i < 8; ++i) {
    const double avg_var = s.vars.row(i).mean();
    const double avg_mean = s.means.row(i).mean();
    double spread = 0.0;
    for (Eigen::Index j = 0; j < s.means.cols(); ++j) spread += std::pow(s.means(i, j) - avg_mean, 2);
    spread /= static_cast<double>(s.means.cols());
    CHECK(s.pooled_mean(i) == doctest::Approx(avg_mean).epsilon(1e-12));
    CHECK(s.pooled_var(i) == doctest::Approx(avg_var + spread).epsilon(1e-12));
    CHECK(s.pooled_var(i) >= avg_var);
    CHECK((s.vars.row(i).array() > 0.0).all());
  }
}

TEST_CASE("GPLC ignoring w matches STD") {
  std::mt19937_64 g(5);
  const auto rc = testutil::random_case(g, 12, 1);
  const Model gplc(ModelKind::Gplc, rc.data), std_m(ModelKind::Std, rc.data);
  Draws dc, ds;
  for (int j = 0; j < 3; ++j) {
    const double eta = 0.3 * j - 0.2, rho = 0.1 * j, sigma = std::log(0.3 + 0.1 * j);
    dc.add({eta, rho, std::log(1e6), sigma}, testutil::random_latent(g, 12));
    ds.add({eta, rho, sigma});
  }
  RowMatrix xt = column({-1.0, 0.0, 0.3, 2.0});
  const auto a = predict_gplc(gplc, dc.ptrs(), xt, 4, 11);
  const auto b = predict_std(std_m, ds.ptrs(), xt);
  REQUIRE(a.components() == 12);
  for (Eigen::Index j = 0; j < 12; ++j) {
    const Eigen::Index jb = j / 4;
    CHECK((a.means.col(j) - b.means.col(jb)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((a.vars.col(j) - b.vars.col(jb)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("GPLC w* Monte-Carlo consistency") {
  std::mt19937_64 g(6);
  const auto rc = testutil::random_case(g, 20, 1);
  const Model m(ModelKind::Gplc, rc.data);
  Draws dr;
  dr.add({0.2, 0.0, 0.0, std::log(0.2)}, testutil::random_latent(g, 20));
  RowMatrix xt(60, 1);
  for (Eigen::Index i = 0; i < 60; ++i) xt(i, 0) = -2.0 + 4.0 * i / 59.0;
  const auto one = predict_gplc(m, dr.ptrs(), xt, 1, 1);
  const auto many = predict_gplc(m, dr.ptrs(), xt, 100, 2);
  int outliers = 0;
  for (Eigen::Index i = 0; i < 60; ++i) {
    const double mu = many.pooled_mean(i);
    double sd = 0.0;
    for (Eigen::Index j = 0; j < 100; ++j) sd += std::pow(many.means(i, j) - mu, 2);
    sd = std::sqrt(sd / 99.0 * (1.0 + 1.0 / 100.0));
    outliers += std::abs(one.pooled_mean(i) - mu) > 3.0 * sd + 1e-12;
  }
  CHECK(outliers <= 2);
}

TEST_CASE("GPLC prediction is reproducible per test case") {
  std::mt19937_64 g(7);
  const auto rc = testutil::random_case(g, 10, 1);
  const Model m(ModelKind::Gplc, rc.data);
  Draws dr;
  dr.add({0.0, 0.0, 0.0, -1.0}, testutil::random_latent(g, 10));
  const RowMatrix xt = column({0.1, 0.2, 0.3});
  const auto a = predict_gplc(m, dr.ptrs(), xt, 5, 9);
  const auto b = predict_gplc(m, dr.ptrs(), RowMatrix(xt.topRows(2)), 5, 9);
  CHECK(a.means.topRows(2) == b.means);
  CHECK_THROWS_AS(predict_gplc(m, dr.ptrs(), xt, 0, 9), std::invalid_argument);
}

TEST_CASE("GPLV with a flat log-SD process is homoscedastic") {
  std::mt19937_64 g(8);
  const auto rc = testutil::random_case(g, 15, 1);
  const Model gplv(ModelKind::Gplv, rc.data), std_m(ModelKind::Std, rc.data);
  const double kappa = std::log(0.4);
  Draws dv, ds;
  dv.add({0.1, -0.3, -20.0, 0.0}, Vector::Constant(15, kappa));
  ds.add({0.1, -0.3, kappa});
  const RowMatrix xt = column({-1.5, 0.0, 0.7});
  const auto a = predict_gplv(gplv, dv.ptrs(), xt, 3);
  const auto b = predict_std(std_m, ds.ptrs(), xt);
  CHECK((a.means - b.means).cwiseAbs().maxCoeff() < 1e-10);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(a.vars(i, 0) == doctest::Approx(b.vars(i, 0)).epsilon(1e-2));
}

TEST_CASE("GPLV latent conditional") {
  std::mt19937_64 g(9);
  const auto rc = testutil::random_case(g, 10, 2);
  const Model m(ModelKind::Gplv, rc.data);
  const std::vector<double> h{0.0, 0.2, -0.1, 0.1, 0.3, -0.2};
  const Vector z = testutil::random_latent(g, 10, 0.5);

  SUBCASE("matches the dense conditional Gaussian") {
    RowMatrix xt(4, 2);
    for (Eigen::Index i = 0; i < xt.size(); ++i) xt.data()[i] = std::normal_distribution<double>()(g);
    const auto lc = gplv_latent_conditional(m, h, z, xt);
    const oracle::Mat cz = oracle::gplv_cz(rc.problem, h);
    const oracle::Mat inv = cz.fullPivLu().inverse();
    const std::vector<double> rz{std::exp(h[4]), std::exp(h[5])};
    const double eta = std::exp(h[3]), c = rc.problem.c;
    for (Eigen::Index t = 0; t < 4; ++t) {
      oracle::Vec k(10);
      for (std::size_t i = 0; i < 10; ++i) k(i) = oracle::se(&xt(t, 0), &rc.problem.x[i * 2], rz, c, eta);
      const double mean = k.dot(inv * z);
      const double var = std::max(c * c + eta * eta + 1e-6 - k.dot(inv * k), 1e-6);
      CHECK(lc.mean(t) == doctest::Approx(mean).epsilon(1e-8));
      CHECK(lc.var(t) == doctest::Approx(var).epsilon(1e-8));
    }
  }
  SUBCASE("collapses onto z_i at a training input") {
    const auto lc = gplv_latent_conditional(m, h, z, RowMatrix(rc.data.x.row(3)));
    CHECK(std::abs(lc.mean(0) - z(3)) < 1e-2);
    CHECK(lc.var(0) < 1e-5);
    CHECK(lc.var(0) >= 1e-6);
  }
}

TEST_CASE("predict argument checks") {
  std::mt19937_64 g(10);
  const auto rc = testutil::random_case(g, 5, 1);
  const Model m(ModelKind::Std, rc.data);
  Draws none;
  CHECK_THROWS_AS(predict(m, none.ptrs(), column({0.0}), 1, 0), std::invalid_argument);
  Draws dr;
  dr.add({0.0, 0.0, 0.0});
  CHECK_THROWS_AS(predict(m, dr.ptrs(), RowMatrix::Zero(1, 2), 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(predict_gplv(m, dr.ptrs(), column({0.0}), 0), std::invalid_argument);
}
