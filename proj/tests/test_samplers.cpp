#include "samplers.hpp"

#include "metrics.hpp"
#include "synthdata.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace hetgp;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}

// Standard error of the mean allowing for autocorrelation.
double se_mean(const std::vector<double>& v) {
  const double tau = std::max(1.0, act_time(v).tau_hat);
  return std::sqrt(var_of(v) * tau / v.size());
}

std::vector<double> squares_centred(const std::vector<double>& v, double centre) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - centre) * (v[i] - centre);
  return out;
}

const auto std_normal_logp = [](double x) { return -0.5 * x * x; };

}  // namespace

TEST_CASE("slice sampling a standard normal") {
  Rng rng(101);
  double x = 0.0, lp = 0.0;
  std::vector<double> xs;
  xs.reserve(100000);
  for (int t = 0; t < 100000; ++t) {
    const Draw1D d = slice_1d(x, lp, std_normal_logp, SliceConfig{}, rng);
    x = d.value;
    lp = d.log_density;
    xs.push_back(x);
  }
  CHECK(std::abs(mean_of(xs)) < 0.02);
  CHECK(var_of(xs) >= 0.94);
  CHECK(var_of(xs) <= 1.06);
}

TEST_CASE("flat slice accepts within the initial interval") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    SliceConfig cfg;
    cfg.max_stepouts = 0;  // on a flat target stepping out would never stop
    const Draw1D d = slice_1d(2.0, 0.0, [](double) { return 0.0; }, cfg, rng);
    CHECK(d.moved);
    CHECK(std::abs(d.value - 2.0) <= cfg.width);
    CHECK(d.evaluations == 1);
  }
}

TEST_CASE("step-out cap bounds the work on a flat target") {
  Rng rng(4);
  SliceConfig cfg;
  cfg.max_stepouts = 50;
  const Draw1D d = slice_1d(0.0, 0.0, [](double) { return 0.0; }, cfg, rng);
  CHECK(d.evaluations <= 51);
  CHECK(std::isfinite(d.value));
}

TEST_CASE("Metropolis examples") {
  SUBCASE("tiny proposal scale is essentially always accepted") {
    Rng rng(5);
    double x = 0.3, lp = std_normal_logp(0.3);
    int acc = 0;
    for (int t = 0; t < 10000; ++t) {
      const Draw1D d = metro_1d(x, lp, std_normal_logp, 1e-12, rng);
      acc += d.moved;
      x = d.value;
      lp = d.log_density;
    }
    CHECK(acc >= 9990);
    CHECK(std::abs(x - 0.3) < 1e-6);
  }
  SUBCASE("proposals with minus-infinity density are always rejected") {
    Rng rng(6);
    const auto logp = [](double x) { return x == 1.0 ? 0.0 : -std::numeric_limits<double>::infinity(); };
    for (int t = 0; t < 1000; ++t) CHECK_FALSE(metro_1d(1.0, 0.0, logp, 0.5, rng).moved);
  }
  SUBCASE("acceptance rate with sd 2.4 on a standard normal") {
    Rng rng(7);
    double x = 0.0, lp = 0.0;
    int acc = 0;
    const int iters = 100000;
    for (int t = 0; t < iters; ++t) {
      const Draw1D d = metro_1d(x, lp, std_normal_logp, 2.4, rng);
      acc += d.moved;
      x = d.value;
      lp = d.log_density;
    }
    const double rate = static_cast<double>(acc) / iters;
    CHECK(rate >= 0.35);
    CHECK(rate <= 0.55);
  }
}

TEST_CASE("coordinatewise kernels preserve a correlated 3-d Gaussian") {
  Matrix sigma(3, 3);
  sigma << 1.0, 0.5, 0.2, 0.5, 2.0, 0.3, 0.2, 0.3, 0.5;
  const Matrix prec = sigma.inverse();
  const LogDensityND logp = [&](const std::vector<double>& v) {
    const Eigen::Map<const Vector> x(v.data(), 3);
    return -0.5 * x.dot(prec * x);
  };
  for (const bool slice : {true, false}) {
    CAPTURE(slice);
    Rng rng(slice ? 11 : 12);
    std::vector<double> point{0.0, 0.0, 0.0};
    std::vector<std::vector<double>> trace(3);
    MetroConfig mc{{1.5, 2.0, 1.0}};
    for (int t = 0; t < 100000; ++t) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (slice) {
          slice_update_coord(point, k, logp, SliceConfig{}, rng);
        } else {
          metro_update_coord(point, k, logp, mc, rng);
        }
      }
      for (std::size_t k = 0; k < 3; ++k) trace[k].push_back(point[k]);
    }
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(mean_of(trace[k])) < 3.0 * se_mean(trace[k]));
      const auto sq = squares_centred(trace[k], 0.0);
      CHECK(std::abs(mean_of(sq) - sigma(k, k)) < 3.0 * se_mean(sq));
    }
  }
}

TEST_CASE("correlated proposal special cases") {
  Matrix cz(3, 3);
  cz << 1.0, 0.4, 0.1, 0.4, 1.0, 0.3, 0.1, 0.3, 1.0;
  const CholFactor l = cholesky(cz).value();
  const auto flat = [](const Vector&) { return 0.0; };

  SUBCASE("a = 0 is the identity") {
    Vector z = Vector::Ones(3);
    double cur = 0.0;
    Rng rng(1);
    for (int t = 0; t < 20; ++t) corr_prop_update(z, l, flat, cur, CorrPropConfig{0.0, 1}, rng);
    CHECK(z == Vector::Ones(3));
  }
  SUBCASE("a near 0 barely moves z") {
    Vector z = Vector::Ones(3);
    double cur = 0.0;
    Rng rng(1);
    corr_prop_update(z, l, flat, cur, CorrPropConfig{1e-12, 1}, rng);
    CHECK((z - Vector::Ones(3)).norm() < 1e-10);
  }
  SUBCASE("a = 1 gives a fresh prior draw independent of z") {
    Vector z1 = Vector::Ones(3), z2 = -5.0 * Vector::Ones(3);
    double c1 = 0.0, c2 = 0.0;
    Rng r1(9), r2(9);
    CHECK(corr_prop_update(z1, l, flat, c1, CorrPropConfig{1.0, 1}, r1));
    CHECK(corr_prop_update(z2, l, flat, c2, CorrPropConfig{1.0, 1}, r2));
    CHECK((z1 - z2).norm() < 1e-12);
  }
}

TEST_CASE("correlated proposal keeps the prior invariant under a flat likelihood") {
  Matrix cz(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) cz(i, j) = 0.01 + std::exp(-0.5 * (i - j) * (i - j));
  }
  cz.diagonal().array() += 1e-6;
  const CholFactor l = cholesky(cz).value();
  Rng rng(21);
  Vector z = Vector::Zero(4);
  double cur = 0.0;
  const auto flat = [](const Vector&) { return 0.0; };
  std::vector<std::vector<double>> tr(4);
  std::vector<std::vector<double>> prod(6);
  for (int t = 0; t < 10000; ++t) {
    corr_prop_update(z, l, flat, cur, CorrPropConfig{0.3, 1}, rng);
    int q = 0;
    for (int i = 0; i < 4; ++i) {
      tr[i].push_back(z(i));
      for (int j = i + 1; j < 4; ++j) prod[q++].push_back(z(i) * z(j));
    }
  }
  int q = 0;
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(mean_of(tr[i])) < 3.0 * se_mean(tr[i]));
    const auto sq = squares_centred(tr[i], 0.0);
    CHECK(std::abs(mean_of(sq) - cz(i, i)) < 3.0 * se_mean(sq));
    for (int j = i + 1; j < 4; ++j, ++q) CHECK(std::abs(mean_of(prod[q]) - cz(i, j)) < 3.0 * se_mean(prod[q]));
  }
}

TEST_CASE("per-sweep update and factorization counts") {
  std::mt19937_64 g(1);
  const auto rc = testutil::random_case(g, 30, 1);
  ScheduleConfig cfg;
  Rng rng(2);

  SUBCASE("STD: p+2 updates, one factorization per evaluation") {
    const Model m(ModelKind::Std, rc.data);
    ModelState s = m.initial_state();
    cfg.sampler = SamplerKind::Metropolis;
    Tuning t = Tuning::uniform(s.dim(), 0.5, m.n_hyper(), 0.5);
    const SweepResult r = sweep(m, s, rng, cfg, t);
    CHECK(r.counts.main_hyper_updates == 3);
    CHECK(r.ops.main_factorizations == 3);
  }
  SUBCASE("GPLC: p+3 hyperparameter and n latent updates") {
    const Model m(ModelKind::Gplc, rc.data);
    ModelState s = m.initial_state();
    cfg.sampler = SamplerKind::Metropolis;
    Tuning t = Tuning::uniform(s.dim(), 0.5, m.n_hyper(), 0.5);
    const SweepResult r = sweep(m, s, rng, cfg, t);
    CHECK(r.counts.main_hyper_updates == 4);
    CHECK(r.counts.latent_updates == 30);
    CHECK(r.ops.main_factorizations == 4 + 30);
    CHECK(r.ops.row_rebuilds == 30);
  }
  SUBCASE("GPLV modified: (p+1) + (p+1)(1+m) factor-level events") {
    const Model m(ModelKind::Gplv, rc.data);
    ModelState s = m.initial_state();
    cfg.sampler = SamplerKind::ModifiedMetropolis;
    Tuning t = Tuning::uniform(s.dim(), 0.5, m.n_hyper(), 0.5);
    const SweepResult r = sweep(m, s, rng, cfg, t);
    CHECK(r.counts.main_hyper_updates == 2);
    CHECK(r.counts.z_hyper_updates == 2);
    CHECK(r.counts.latent_vector_updates == 2 * 40);
    CHECK(r.ops.main_factorizations == 2 + 2 * 40);
    CHECK(r.ops.z_factorizations == 2);
    CHECK(r.ops.main_factorizations + r.ops.z_factorizations == 2 + 2 * (1 + 40));
  }
  SUBCASE("GPLV single-site: z updates use rank-1 paths") {
    const Model m(ModelKind::Gplv, rc.data);
    ModelState s = m.initial_state();
    cfg.sampler = SamplerKind::Metropolis;
    Tuning t = Tuning::uniform(s.dim(), 0.5, m.n_hyper(), 0.5);
    const SweepResult r = sweep(m, s, rng, cfg, t);
    CHECK(r.counts.latent_updates == 30);
    CHECK(r.ops.rank1_updates + (r.ops.main_factorizations - 2) == 30);
  }
}

TEST_CASE("incompatible pairings are rejected") {
  ScheduleConfig cfg;
  cfg.sampler = SamplerKind::ModifiedMetropolis;
  CHECK_THROWS_AS(cfg.validate(ModelKind::Std), std::invalid_argument);
  CHECK_THROWS_AS(cfg.validate(ModelKind::Gplc), std::invalid_argument);
  CHECK_NOTHROW(cfg.validate(ModelKind::Gplv));
  CHECK(parse_sampler_kind("modified-metropolis") == SamplerKind::ModifiedMetropolis);
  CHECK_THROWS_AS(parse_sampler_kind("gibbs"), std::invalid_argument);
}

TEST_CASE("run_chain determinism and burn-in") {
  const Dataset d = generate("U1", 3, 25);
  const Model m(ModelKind::Gplv, TrainingData{d.x, d.y});
  ScheduleConfig cfg;
  cfg.sampler = SamplerKind::ModifiedMetropolis;
  const ChainRecord a = run_chain(m, 30, 42, cfg);
  const ChainRecord b = run_chain(m, 30, 42, cfg);
  CHECK(a.lpd_trace == b.lpd_trace);
  CHECK(a.hyper_trace == b.hyper_trace);
  const ChainRecord c = run_chain(m, 4, 42, cfg);
  CHECK(c.burn_in == 1);
  CHECK(c.lpd_trace.size() == 4);
  CHECK(c.cpu_per_iter.size() == 4);
  CHECK_THROWS_AS(run_chain(m, 3, 42, cfg), std::invalid_argument);
}

TEST_CASE("GPLC latent updates target the N(0,1) prior when the likelihood ignores w") {
  // With a single case the covariance is c² + η² + σ² whatever w is.
  const TrainingData d{RowMatrix::Zero(1, 1), Vector::Constant(1, 0.3)};
  const Model m(ModelKind::Gplc, d);
  ScheduleConfig cfg;
  cfg.thin = 1;
  const ChainRecord ch = run_chain(m, 20000, 5, cfg);
  std::vector<double> w;
  for (const auto* s : ch.post_burn_in()) w.push_back(s->latent(0));
  CHECK(std::abs(mean_of(w)) < 3.0 * se_mean(w));
  const auto sq = squares_centred(w, 0.0);
  CHECK(std::abs(mean_of(sq) - 1.0) < 3.0 * se_mean(sq));
}

TEST_CASE("GPLC log posterior is symmetric in the sign of w") {
  std::mt19937_64 g(8);
  const auto rc = testutil::random_case(g, 12, 1);
  const Model m(ModelKind::Gplc, rc.data);
  const auto h = testutil::random_hyper(g, m.n_hyper());
  const Vector w = testutil::random_latent(g, 12);
  ModelState a = testutil::make_state(m, h, w), b = testutil::make_state(m, h, -w);
  CHECK(log_post(m, a) == doctest::Approx(log_post(m, b)).epsilon(1e-12));
}

TEST_CASE("STD on U1 recovers the residual scale") {
  const Dataset d = generate("U1", 1, 100);
  const Model m(ModelKind::Std, TrainingData{d.x, d.y});
  const ChainRecord ch = run_chain(m, 2000, 17, ScheduleConfig{});
  double s = 0.0;
  const auto draws = ch.post_burn_in();
  for (const auto* dr : draws) s += std::exp(dr->hyper.back());
  const double post_sigma = s / draws.size();
  const double avg_sd = d.sd_true.mean();
  CHECK(post_sigma > 0.5 * avg_sd);
  CHECK(post_sigma < 1.5 * avg_sd);
}

TEST_CASE("STD with zero responses drives sigma to the low end of its prior") {
  const Dataset d = generate("U1", 2, 20);
  const Model m(ModelKind::Std, TrainingData{d.x, Vector::Zero(20)});
  const ChainRecord ch = run_chain(m, 400, 3, ScheduleConfig{});
  double s = 0.0;
  const auto draws = ch.post_burn_in();
  for (const auto* dr : draws) s += dr->hyper.back();
  CHECK(s / draws.size() < -4.0);  // two prior standard deviations below the prior mean
}

TEST_CASE("modified Metropolis on U1") {
  const Dataset d = generate("U1", 1, 100);
  const Model m(ModelKind::Gplv, TrainingData{d.x, d.y});
  ScheduleConfig cfg;
  cfg.sampler = SamplerKind::ModifiedMetropolis;
  const ChainRecord ch = run_chain(m, 2000, 99, cfg);

  SUBCASE("LPD settles early") {
    const std::vector<double>& lpd = ch.lpd_trace;
    std::vector<double> tail(lpd.end() - lpd.size() / 4, lpd.end());
    std::nth_element(tail.begin(), tail.begin() + tail.size() / 2, tail.end());
    const double med = tail[tail.size() / 2];
    double cpu = 0.0;
    double reach = -1.0;
    for (std::size_t i = 0; i < lpd.size(); ++i) {
      cpu += ch.cpu_per_iter[i];
      if (reach < 0.0 && std::abs(lpd[i] - med) <= 5.0) reach = cpu;
    }
    REQUIRE(reach >= 0.0);
    CHECK(reach <= 0.10 * ch.total_cpu());
  }
  SUBCASE("z proposals: low per-proposal acceptance, frequent per-sweep refresh") {
    // Post-burn-in rates from a separate accounting run over the last 500 sweeps.
    ModelState s = m.initial_state();
    Rng rng(99);
    Tuning t = Tuning::uniform(s.dim(), cfg.initial_hyper_sd, m.n_hyper(), cfg.initial_latent_sd);
    for (int it = 0; it < 500; ++it) sweep(m, s, rng, cfg, t);
    t.adapting = false;
    std::uint64_t proposed = 0, accepted = 0, sweeps_with_move = 0;
    for (int it = 0; it < 500; ++it) {
      const SweepResult r = sweep(m, s, rng, cfg, t);
      proposed += r.acceptance.latent.proposed;
      accepted += r.acceptance.latent.accepted;
      sweeps_with_move += r.acceptance.latent.accepted > 0;
    }
    const double rate = static_cast<double>(accepted) / proposed;
    MESSAGE("per-proposal z acceptance " << rate << ", sweeps refreshing z " << sweeps_with_move / 500.0);
    CHECK(sweeps_with_move >= 250);
    CHECK(rate >= 0.01);
    CHECK(rate <= 0.03);
  }
}
