#pragma once

#include "models.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace hetgp {

using Rng = std::mt19937_64;

double std_normal(Rng& rng);
double uniform01(Rng& rng);  // in (0, 1)

struct SliceConfig {
  double width = 1.0;
  std::uint64_t max_stepouts = 1'000'000;  // 0 disables stepping out
};

struct MetroConfig {
  std::vector<double> proposal_sd;
};

struct CorrPropConfig {
  double a = 0.3;
  std::size_t m = 40;

  void validate() const;
};

// Result of a univariate update.
struct Draw1D {
  double value = 0.0;
  double log_density = 0.0;
  bool moved = false;
  std::size_t evaluations = 0;
};

using LogDensity1D = std::function<double(double)>;
using LogDensityND = std::function<double(const std::vector<double>&)>;

// Step-out and shrinkage slice sampling on one variable.
Draw1D slice_1d(double x0, double logp0, const LogDensity1D& logp, const SliceConfig& cfg, Rng& rng);
// Gaussian random-walk Metropolis on one variable.
Draw1D metro_1d(double x0, double logp0, const LogDensity1D& logp, double proposal_sd, Rng& rng);

// Coordinate-wise forms over a plain parameter vector; `logp` is evaluated at
// `point` with the coordinate replaced.
void slice_update_coord(std::vector<double>& point, std::size_t coord, const LogDensityND& logp,
                        const SliceConfig& cfg, Rng& rng);
bool metro_update_coord(std::vector<double>& point, std::size_t coord, const LogDensityND& logp,
                        const MetroConfig& cfg, Rng& rng);

// Proposal z' = sqrt(1-a²) z + a L u, accepted on the likelihood ratio only.
// `loglik` evaluates the (main-GP) log likelihood at a latent vector;
// `current_loglik` is updated on acceptance.
bool corr_prop_update(Vector& z, const CholFactor& chol_cz, const std::function<double(const Vector&)>& loglik,
                      double& current_loglik, const CorrPropConfig& cfg, Rng& rng);

enum class SamplerKind { Slice, Metropolis, ModifiedMetropolis };

std::string to_string(SamplerKind kind);
// "slice", "metropolis", "modified-metropolis".
SamplerKind parse_sampler_kind(const std::string& name);

enum class LatentInit { PriorMean, PriorDraw };

struct ScheduleConfig {
  // STD/GPLC: used for every coordinate (Slice or Metropolis).
  // GPLV: scheme for z; hyperparameters use gplv_hyper.
  SamplerKind sampler = SamplerKind::Slice;
  SamplerKind gplv_hyper = SamplerKind::Metropolis;
  SliceConfig slice;
  double initial_hyper_sd = 0.5;
  double initial_latent_sd = 0.5;
  CorrPropConfig corr;
  std::size_t thin = 5;
  LatentInit latent_init = LatentInit::PriorMean;
  // Robbins-Monro proposal tuning runs for this many iterations; 0 means the
  // burn-in length ceil(n_iter / 4), or the first quarter of a time budget.
  std::size_t adapt_iterations = 0;
  // When positive, stop once the summed sweep time reaches this many seconds.
  double time_budget_seconds = 0.0;

  // Throws std::invalid_argument on an incompatible model/sampler pairing.
  void validate(ModelKind model) const;
};

struct BlockAcceptance {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;

  double rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct Acceptance {
  BlockAcceptance hyper_main;
  BlockAcceptance hyper_z;
  BlockAcceptance latent;
};

// Update events per sweep, by the kind of cache work they trigger.
struct SweepCounts {
  std::uint64_t main_hyper_updates = 0;
  std::uint64_t z_hyper_updates = 0;
  std::uint64_t latent_updates = 0;         // single-coordinate latent updates
  std::uint64_t latent_vector_updates = 0;  // whole-vector z proposals

  SweepCounts& operator+=(const SweepCounts& o);
};

struct SweepResult {
  SweepCounts counts;
  OpCounts ops;
  Acceptance acceptance;
};

// Per-coordinate Metropolis proposal scales, adapted toward 50% acceptance
// while `adapting` is set.
struct Tuning {
  std::vector<double> log_sd;
  std::vector<std::uint64_t> updates;
  bool adapting = true;

  static Tuning uniform(std::size_t dim, double hyper_sd, std::size_t n_hyper, double latent_sd);
  double sd(std::size_t k) const;
  void record(std::size_t k, bool accepted);
};

SweepResult sweep_std(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                      Tuning& tuning);
SweepResult sweep_gplc(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                       Tuning& tuning);
SweepResult sweep_gplv(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                       Tuning& tuning);
SweepResult sweep(const Model& model, ModelState& state, Rng& rng, const ScheduleConfig& cfg,
                  Tuning& tuning);

struct StoredDraw {
  std::size_t iteration = 0;
  std::vector<double> hyper;
  Vector latent;
};

struct ChainRecord {
  ModelKind model = ModelKind::Std;
  SamplerKind sampler = SamplerKind::Slice;
  std::uint64_t seed = 0;
  std::size_t n_iter = 0;
  std::size_t burn_in = 0;  // ceil(n_iter / 4); kept in the record, dropped at analysis time
  std::size_t thin = 1;
  std::vector<std::string> hyper_names;

  std::vector<StoredDraw> draws;  // every thin-th iteration
  std::vector<double> lpd_trace;
  std::vector<double> cpu_per_iter;  // seconds spent inside the sweep
  std::vector<std::vector<double>> hyper_trace;  // [iteration][coordinate], log scale
  std::vector<double> latent_sum;
  std::vector<double> latent_sumsq;
  Acceptance acceptance;
  SweepCounts counts;
  OpCounts ops;

  std::vector<const StoredDraw*> post_burn_in() const;
  double total_cpu() const;
  double mean_cpu_per_iter(std::size_t from = 0) const;
};

std::size_t burn_in_length(std::size_t n_iter);

ChainRecord run_chain(const Model& model, std::size_t n_iter, std::uint64_t seed,
                      const ScheduleConfig& cfg);
// Same, starting from a caller-supplied state.
ChainRecord run_chain(const Model& model, ModelState start, std::size_t n_iter, std::uint64_t seed,
                      const ScheduleConfig& cfg);

}  // namespace hetgp
