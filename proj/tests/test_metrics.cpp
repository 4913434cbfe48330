#include "metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace hetgp;

namespace {

std::vector<double> ar1(double phi, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(m);
  double x = std_normal(rng) / std::sqrt(1.0 - phi * phi);
  for (auto& out : v) {
    x = phi * x + std_normal(rng);
    out = x;
  }
  return v;
}

ChainRecord synthetic_chain(ModelKind kind, std::size_t n_iter, const std::vector<std::vector<double>>& hyper,
                            const std::vector<double>& zsum, const std::vector<double>& zsq) {
  ChainRecord c;
  c.model = kind;
  c.n_iter = n_iter;
  c.burn_in = burn_in_length(n_iter);
  c.hyper_names = {"eta", "rho1", "sigma"};
  c.hyper_trace = hyper;
  c.lpd_trace.assign(n_iter, 0.0);
  c.cpu_per_iter.assign(n_iter, 0.002);
  c.latent_sum = zsum;
  c.latent_sumsq = zsq;
  return c;
}

}  // namespace

TEST_CASE("mse examples") {
  const std::vector<double> f{0.5, -1.0, 2.0};
  CHECK(mse(f, f) == 0.0);
  std::vector<double> shifted = f;
  for (auto& v : shifted) v += 0.3;
  CHECK(mse(shifted, f) == doctest::Approx(0.09));
  CHECK(mse(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0}) == doctest::Approx(2.5));
  CHECK(mse(Vector{{1.0, 2.0}}, Vector{{0.0, 0.0}}) == doctest::Approx(2.5));
  CHECK_THROWS_AS(mse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(mse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("mixture NLPD examples") {
  const double one[] = {0.7}, unit[] = {1.0};
  CHECK(mixture_nlpd_term(one, unit, 0.7) == doctest::Approx(0.5 * std::log(2.0 * std::numbers::pi)));
  CHECK(mixture_nlpd_term(one, unit, 0.7) == doctest::Approx(0.91894).epsilon(1e-5));
  const double twice[] = {0.7, 0.7}, unit2[] = {1.0, 1.0};
  CHECK(mixture_nlpd_term(twice, unit2, 1.3) == doctest::Approx(mixture_nlpd_term(one, unit, 1.3)));
  const double mu[] = {0.0, 2.0};
  // -log((φ(0) + φ(2)) / 2) with φ(0) = 0.398942, φ(2) = 0.053991
  CHECK(mixture_nlpd_term(mu, unit2, 0.0) == doctest::Approx(1.4851577).epsilon(1e-6));
  const double bad[] = {1.0, 0.0};
  CHECK_THROWS_AS(mixture_nlpd_term(mu, bad, 0.0), std::invalid_argument);
}

TEST_CASE("mixture NLPD is stable far in the tails") {
  const double mu[] = {0.0, 1.0}, var[] = {1e-4, 1e-4};
  const double v = mixture_nlpd_term(mu, var, 50.0);
  CHECK(std::isfinite(v));
  // Dominated by the component at 1: (49)²/(2·1e-4) + ½log(2π·1e-4) + log 2
  CHECK(v == doctest::Approx(49.0 * 49.0 / 2e-4 + 0.5 * std::log(2.0 * std::numbers::pi * 1e-4) + std::log(2.0))
                 .epsilon(1e-12));
}

TEST_CASE("nlpd and evaluate average the per-case terms") {
  Matrix means(2, 2), vars(2, 2);
  means << 0.0, 2.0, 1.0, 1.0;
  vars << 1.0, 1.0, 0.5, 0.5;
  const Vector y{{0.0, 1.0}};
  const double t0 = 1.4851577, t1 = 0.5 * std::log(2.0 * std::numbers::pi * 0.5);
  CHECK(nlpd(means, vars, y) == doctest::Approx((t0 + t1) / 2.0).epsilon(1e-5));
  const EvalReport r = evaluate(means.rowwise().mean(), means, vars, Vector{{1.0, 1.0}}, y);
  CHECK(r.mse == doctest::Approx(0.0));
  REQUIRE(r.nlpd_terms.size() == 2);
  CHECK(r.nlpd == doctest::Approx((r.nlpd_terms[0] + r.nlpd_terms[1]) / 2.0));
  CHECK_THROWS_AS(nlpd(means, vars, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("autocorrelation time examples") {
  SUBCASE("iid normal") {
    const ActReport r = act_time(ar1(0.0, 100000, 1));
    CHECK(r.tau_hat >= 0.9);
    CHECK(r.tau_hat <= 1.1);
  }
  SUBCASE("AR(1) with phi 0.5") {
    const ActReport r = act_time(ar1(0.5, 1000000, 2), 0.01);
    CHECK(r.tau_hat == doctest::Approx(3.0).epsilon(0.1));
    CHECK(r.tau_tilde == doctest::Approx(r.tau_hat * 0.01));
  }
  SUBCASE("constant series") {
    const std::vector<double> c(500, 4.2);
    CHECK(act_time(c).tau_hat == 1.0);
  }
  SUBCASE("too short") { CHECK_THROWS_AS(act_time(std::vector<double>(5, 1.0)), std::invalid_argument); }
  SUBCASE("cutoff never exceeds a tenth of the series") {
    const auto v = ar1(0.999, 2000, 3);
    const ActReport r = act_time(v);
    CHECK(r.cutoff_k <= 200);
    CHECK(r.tau_hat >= 1.0);
  }
}

TEST_CASE("autocorrelations") {
  const std::vector<double> alt{1.0, -1.0, 1.0, -1.0, 1.0, -1.0};
  const auto g = autocorrelations(alt, 2);
  REQUIRE(g.size() == 2);
  CHECK(g[0] == doctest::Approx(-5.0 / 6.0));
  CHECK(g[1] == doctest::Approx(4.0 / 6.0));
  const auto z = autocorrelations(std::vector<double>(10, 3.0), 3);
  CHECK(z == std::vector<double>(3, 0.0));
}

TEST_CASE("duplicating every state roughly doubles the autocorrelation time") {
  const auto v = ar1(0.5, 200000, 4);
  std::vector<double> dup;
  for (double x : v) {
    dup.push_back(x);
    dup.push_back(x);
  }
  const double a = act_time(v).tau_hat, b = act_time(dup).tau_hat;
  CHECK(b / a == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("act_summary over a chain of independent states") {
  const std::size_t n = 4000;
  Rng rng(5);
  std::vector<std::vector<double>> h(n, std::vector<double>(3));
  std::vector<double> s(n), s2(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (auto& v : h[t]) v = std_normal(rng);
    s[t] = std_normal(rng);
    s2[t] = std::pow(std_normal(rng), 2);
  }
  SUBCASE("latent model reports every quantity") {
    const auto rep = act_summary(synthetic_chain(ModelKind::Gplv, n, h, s, s2));
    REQUIRE(rep.size() == 5);
    CHECK(rep[0].quantity == "eta");
    CHECK(rep[3].quantity == "sum_z");
    CHECK(rep[4].quantity == "sum_z2");
    for (const auto& r : rep) {
      CHECK(r.tau_hat == doctest::Approx(1.0).epsilon(0.2));
      CHECK(r.cpu_per_iter == doctest::Approx(0.002));
    }
  }
  SUBCASE("STD omits the latent sums") {
    CHECK(act_summary(synthetic_chain(ModelKind::Std, n, h, {}, {})).size() == 3);
  }
  SUBCASE("short chains are rejected") {
    std::vector<std::vector<double>> few(h.begin(), h.begin() + 120);
    CHECK_THROWS_AS(act_summary(synthetic_chain(ModelKind::Std, 120, few, {}, {})), std::invalid_argument);
  }
}
