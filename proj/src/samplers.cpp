#include "samplers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace hetgp {

double std_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double uniform01(Rng& rng) {
  double u;
  do {
    u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  } while (u <= 0.0);
  return u;
}

void CorrPropConfig::validate() const {
  if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("corr-prop: a must lie in (0, 1]");
  if (m < 1) throw std::invalid_argument("corr-prop: m must be at least 1");
}

Draw1D slice_1d(double x0, double logp0, const LogDensity1D& logp, const SliceConfig& cfg, Rng& rng) {
  if (!std::isfinite(logp0)) throw std::invalid_argument("slice_1d: log density not finite at start");
  if (!(cfg.width > 0.0)) throw std::invalid_argument("slice_1d: width must be positive");
  Draw1D out{x0, logp0, false, 0};
  const double level = logp0 + std::log(uniform01(rng));
  auto f = [&](double x) {
    ++out.evaluations;
    return logp(x);
  };

  double lo = x0 - cfg.width * uniform01(rng);
  double hi = lo + cfg.width;
  if (cfg.max_stepouts > 0) {
    // Split the expansion budget at random between the two ends.
    auto j = static_cast<std::uint64_t>(std::floor(static_cast<double>(cfg.max_stepouts) * uniform01(rng)));
    std::uint64_t k = cfg.max_stepouts - 1 - j;
    while (j > 0 && f(lo) > level) {
      lo -= cfg.width;
      --j;
    }
    while (k > 0 && f(hi) > level) {
      hi += cfg.width;
      --k;
    }
  }

  for (int shrink = 0; shrink < 10'000; ++shrink) {
    const double x1 = lo + uniform01(rng) * (hi - lo);
    const double l1 = f(x1);
    if (l1 > level) {
      out.value = x1;
      out.log_density = l1;
      out.moved = x1 != x0;
      return out;
    }
    if (x1 < x0) {
      lo = x1;
    } else {
      hi = x1;
    }
  }
  return out;
}

Draw1D metro_1d(double x0, double logp0, const LogDensity1D& logp, double proposal_sd, Rng& rng) {
  Draw1D out{x0, logp0, false, 0};
  const double x1 = x0 + proposal_sd * std_normal(rng);
  const double l1 = logp(x1);
  out.evaluations = 1;
  if (std::log(uniform01(rng)) < l1 - logp0) {
    out.value = x1;
    out.log_density = l1;
    out.moved = true;
  }
  return out;
}

void slice_update_coord(std::vector<double>& point, std::size_t coord, const LogDensityND& logp,
                        const SliceConfig& cfg, Rng& rng) {
  std::vector<double> work = point;
  auto f = [&](double v) {
    work[coord] = v;
    return logp(work);
  };
  const Draw1D d = slice_1d(point[coord], logp(point), f, cfg, rng);
  point[coord] = d.value;
}

bool metro_update_coord(std::vector<double>& point, std::size_t coord, const LogDensityND& logp,
                        const MetroConfig& cfg, Rng& rng) {
  std::vector<double> work = point;
  auto f = [&](double v) {
    work[coord] = v;
    return logp(work);
  };
  const Draw1D d = metro_1d(point[coord], logp(point), f, cfg.proposal_sd.at(coord), rng);
  point[coord] = d.value;
  return d.moved;
}

bool corr_prop_update(Vector& z, const CholFactor& chol_cz,
                      const std::function<double(const Vector&)>& loglik, double& current_loglik,
                      const CorrPropConfig& cfg, Rng& rng) {
  const Eigen::Index n = z.size();
  Vector u(n);
  for (Eigen::Index i = 0; i < n; ++i) u(i) = std_normal(rng);
  const Vector proposal = std::sqrt(1.0 - cfg.a * cfg.a) * z + cfg.a * (chol_cz.lower() * u);
  const double ll = loglik(proposal);
  if (std::log(uniform01(rng)) < ll - current_loglik) {
    z = proposal;
    current_loglik = ll;
    return true;
  }
  return false;
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Slice:
      return "slice";
    case SamplerKind::Metropolis:
      return "metropolis";
    case SamplerKind::ModifiedMetropolis:
      return "modified-metropolis";
  }
  return "?";
}

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "slice") return SamplerKind::Slice;
  if (name == "metropolis") return SamplerKind::Metropolis;
  if (name == "modified-metropolis") return SamplerKind::ModifiedMetropolis;
  throw std::invalid_argument("unknown sampler '" + name +
                              "' (expected slice, metropolis or modified-metropolis)");
}

void ScheduleConfig::validate(ModelKind model) const {
  if (sampler == SamplerKind::ModifiedMetropolis && model != ModelKind::Gplv) {
    throw std::invalid_argument("modified-metropolis applies to GPLV only");
  }
  if (gplv_hyper == SamplerKind::ModifiedMetropolis) {
    throw std::invalid_argument("GPLV hyperparameters use slice or metropolis updates");
  }
  if (!(slice.width > 0.0)) throw std::invalid_argument("slice width must be positive");
  if (!(initial_hyper_sd > 0.0) || !(initial_latent_sd > 0.0)) {
    throw std::invalid_argument("proposal sd must be positive");
  }
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  corr.validate();
}

SweepCounts& SweepCounts::operator+=(const SweepCounts& o) {
  main_hyper_updates += o.main_hyper_updates;
  z_hyper_updates += o.z_hyper_updates;
  latent_updates += o.latent_updates;
  latent_vector_updates += o.latent_vector_updates;
  return *this;
}

Tuning Tuning::uniform(std::size_t dim, double hyper_sd, std::size_t n_hyper, double latent_sd) {
  Tuning t;
  t.log_sd.assign(dim, std::log(latent_sd));
  for (std::size_t k = 0; k < std::min(dim, n_hyper); ++k) t.log_sd[k] = std::log(hyper_sd);
  t.updates.assign(dim, 0);
  return t;
}

double Tuning::sd(std::size_t k) const { return std::exp(log_sd[k]); }

void Tuning::record(std::size_t k, bool accepted) {
  if (!adapting) return;
  ++updates[k];
  const double gain = std::pow(static_cast<double>(updates[k]), -0.6);
  log_sd[k] += gain * ((accepted ? 1.0 : 0.0) - 0.5);
  log_sd[k] = std::clamp(log_sd[k], std::log(1e-5), std::log(1e2));
}

namespace {

void add(BlockAcceptance& b, bool accepted) {
  ++b.proposed;
  if (accepted) ++b.accepted;
}

void accumulate(Acceptance& into, const Acceptance& from) {
  for (auto [dst, src] : {std::pair{&into.hyper_main, &from.hyper_main},
                          std::pair{&into.hyper_z, &from.hyper_z},
                          std::pair{&into.latent, &from.latent}}) {
    dst->proposed += src->proposed;
    dst->accepted += src->accepted;
  }
}

// One univariate update of `coord`. `trial` is scratch storage; on a move it
// is swapped with `state`, so it always holds the last evaluated point.
class CoordinateUpdater {
 public:
  CoordinateUpdater(const Model& model, const ScheduleConfig& cfg, Tuning& tuning, Rng& rng,
                    SweepResult& result)
      : model_(model), cfg_(cfg), tuning_(tuning), rng_(rng), result_(result) {}

  void operator()(ModelState& state, std::size_t coord, SamplerKind kind) {
    const Change change = model_.change_for(coord);
    const std::size_t index = coord >= model_.n_hyper() ? coord - model_.n_hyper() : 0;
    const double x0 = state.coord(coord);
    const double lp0 = log_post(model_, state);
    auto f = [&](double v) {
      trial_ = state;
      trial_.set_coord(coord, v);
      refresh_cache(model_, trial_, change, index, &result_.ops);
      return log_post(model_, trial_);
    };
    const Draw1D d = kind == SamplerKind::Slice ? slice_1d(x0, lp0, f, cfg_.slice, rng_)
                                                : metro_1d(x0, lp0, f, tuning_.sd(coord), rng_);
    if (kind == SamplerKind::Metropolis) tuning_.record(coord, d.moved);
    if (d.moved) std::swap(state, trial_);

    BlockAcceptance& block = change == Change::Latent   ? result_.acceptance.latent
                             : change == Change::HyperZ ? result_.acceptance.hyper_z
                                                        : result_.acceptance.hyper_main;
    add(block, d.moved);
    switch (change) {
      case Change::Latent:
        ++result_.counts.latent_updates;
        break;
      case Change::HyperZ:
        ++result_.counts.z_hyper_updates;
        break;
      default:
        ++result_.counts.main_hyper_updates;
        break;
    }
  }

  ModelState& scratch() { return trial_; }

 private:
  const Model& model_;
  const ScheduleConfig& cfg_;
  Tuning& tuning_;
  Rng& rng_;
  SweepResult& result_;
  ModelState trial_;
};

SamplerKind coordinate_sampler(SamplerKind k) {
  return k == SamplerKind::Metropolis ? SamplerKind::Metropolis : SamplerKind::Slice;
}

}  // namespace

SweepResult sweep_std(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                      Tuning& tuning) {
  SweepResult r;
  CoordinateUpdater update(model, cfg, tuning, rng, r);
  for (std::size_t k = 0; k < model.n_hyper(); ++k) update(state, k, coordinate_sampler(cfg.sampler));
  return r;
}

SweepResult sweep_gplc(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                       Tuning& tuning) {
  SweepResult r;
  CoordinateUpdater update(model, cfg, tuning, rng, r);
  const SamplerKind kind = coordinate_sampler(cfg.sampler);
  for (std::size_t k = 0; k < state.dim(); ++k) update(state, k, kind);
  return r;
}

SweepResult sweep_gplv(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                       Tuning& tuning) {
  SweepResult r;
  CoordinateUpdater update(model, cfg, tuning, rng, r);
  const std::size_t p = model.p();
  const SamplerKind hyper_kind = coordinate_sampler(cfg.gplv_hyper);
  const bool modified = cfg.sampler == SamplerKind::ModifiedMetropolis;

  for (std::size_t k = 0; k <= p; ++k) update(state, k, hyper_kind);

  ModelState& trial = update.scratch();
  for (std::size_t k = p + 1; k < model.n_hyper(); ++k) {
    update(state, k, hyper_kind);
    if (!modified) continue;
    const auto z_side = state.cache.z;  // C_z is fixed for the m proposals below
    if (!z_side || !z_side->chol) continue;
    bool any = false;
    for (std::size_t rep = 0; rep < cfg.corr.m; ++rep) {
      auto loglik = [&](const Vector& z) {
        trial = state;
        trial.latent = z;
        refresh_cache(model, trial, Change::LatentVector, 0, &r.ops);
        return trial.cache.main_loglik;
      };
      Vector z = state.latent;
      double current = state.cache.main_loglik;
      const bool accepted = corr_prop_update(z, *z_side->chol, loglik, current, cfg.corr, rng);
      if (accepted) {
        std::swap(state, trial);
        any = true;
      }
      add(r.acceptance.latent, accepted);
      ++r.counts.latent_vector_updates;
    }
    if (any || state.cache.z_logprior_stale) refresh_cache(model, state, Change::ZPrior);
  }

  if (!modified) {
    const SamplerKind latent_kind = coordinate_sampler(cfg.sampler);
    for (std::size_t i = 0; i < model.n(); ++i) update(state, model.n_hyper() + i, latent_kind);
  }
  return r;
}

SweepResult sweep(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                  Tuning& tuning) {
  switch (model.kind()) {
    case ModelKind::Std:
      return sweep_std(model, state, rng, cfg, tuning);
    case ModelKind::Gplc:
      return sweep_gplc(model, state, rng, cfg, tuning);
    case ModelKind::Gplv:
      return sweep_gplv(model, state, rng, cfg, tuning);
  }
  throw std::logic_error("unreachable");
}

std::size_t burn_in_length(std::size_t n_iter) { return (n_iter + 3) / 4; }

std::vector<const StoredDraw*> ChainRecord::post_burn_in() const {
  std::vector<const StoredDraw*> out;
  for (const auto& d : draws) {
    if (d.iteration >= burn_in) out.push_back(&d);
  }
  return out;
}

double ChainRecord::total_cpu() const {
  double s = 0.0;
  for (double t : cpu_per_iter) s += t;
  return s;
}

double ChainRecord::mean_cpu_per_iter(std::size_t from) const {
  if (from >= cpu_per_iter.size()) return 0.0;
  double s = 0.0;
  for (std::size_t i = from; i < cpu_per_iter.size(); ++i) s += cpu_per_iter[i];
  return s / static_cast<double>(cpu_per_iter.size() - from);
}

ChainRecord run_chain(const Model& model, std::size_t n_iter, std::uint64_t seed,
                      const ScheduleConfig& cfg) {
  return run_chain(model, model.initial_state(), n_iter, seed, cfg);
}

ChainRecord run_chain(const Model& model, ModelState state, std::size_t n_iter, std::uint64_t seed,
                      const ScheduleConfig& cfg) {
  if (n_iter < 4) throw std::invalid_argument("run_chain: n_iter must be at least 4");
  cfg.validate(model.kind());
  Rng rng(seed);

  if (cfg.latent_init == LatentInit::PriorDraw && model.n_latent() > 0) {
    refresh_cache(model, state, Change::All);
    Vector u(static_cast<Eigen::Index>(model.n_latent()));
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = std_normal(rng);
    if (model.kind() == ModelKind::Gplv && state.cache.z && state.cache.z->chol) {
      state.latent = state.cache.z->chol->lower() * u;
    } else {
      state.latent = u;
    }
    state.cache.valid = false;
  }
  refresh_cache(model, state, Change::All);
  if (!std::isfinite(log_post(model, state))) {
    throw std::runtime_error("run_chain: log posterior is not finite at the initial state");
  }

  ChainRecord rec;
  rec.model = model.kind();
  rec.sampler = cfg.sampler;
  rec.seed = seed;
  rec.thin = cfg.thin;
  rec.hyper_names = model.hyper_names();
  const std::size_t expect = std::min<std::size_t>(n_iter, 100'000);
  rec.lpd_trace.reserve(expect);
  rec.cpu_per_iter.reserve(expect);

  Tuning tuning = Tuning::uniform(state.dim(), cfg.initial_hyper_sd, model.n_hyper(),
                                  cfg.initial_latent_sd);
  const std::size_t adapt = cfg.adapt_iterations ? cfg.adapt_iterations : burn_in_length(n_iter);
  double elapsed = 0.0;
  std::size_t done = 0;
  for (std::size_t it = 0; it < n_iter; ++it) {
    // Under a time budget with no explicit adaptation length, tune during the
    // first quarter of the budget.
    tuning.adapting = cfg.time_budget_seconds > 0.0 && cfg.adapt_iterations == 0
                          ? elapsed < cfg.time_budget_seconds / 4.0
                          : it < adapt;
    const auto t0 = std::chrono::steady_clock::now();
    const SweepResult r = sweep(model, state, rng, cfg, tuning);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    rec.cpu_per_iter.push_back(dt);
    rec.lpd_trace.push_back(log_post(model, state));
    rec.hyper_trace.push_back(state.hyper);
    rec.latent_sum.push_back(state.latent.sum());
    rec.latent_sumsq.push_back(state.latent.squaredNorm());
    accumulate(rec.acceptance, r.acceptance);
    rec.counts += r.counts;
    rec.ops += r.ops;
    if ((it + 1) % cfg.thin == 0) rec.draws.push_back({it, state.hyper, state.latent});
    ++done;
    elapsed += dt;
    if (cfg.time_budget_seconds > 0.0 && elapsed >= cfg.time_budget_seconds) break;
  }
  rec.n_iter = done;
  rec.burn_in = burn_in_length(done);
  return rec;
}

}  // namespace hetgp
