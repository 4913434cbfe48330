#pragma once

#include "kernels.hpp"
#include "linalg.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hetgp {

enum class ModelKind { Std, Gplc, Gplv };

std::string to_string(ModelKind kind);
// Accepts "STD", "GPLC", "GPLV" (case-insensitive). Throws std::invalid_argument.
ModelKind parse_model_kind(const std::string& name);

struct NormalPrior {
  double mean = 0.0;
  double sd = 2.0;

  double log_density(double v) const;
};

// Priors on the log of every hyperparameter, plus fixed model constants.
struct PriorSpec {
  NormalPrior hyper;
  // Per-coordinate overrides, indexed like ModelState::hyper. Empty = use `hyper`.
  std::vector<NormalPrior> overrides;
  double c = 0.1;
  double jitter_sd = 1e-3;    // σ_J on the GPLV log-SD process
  double sigma_floor = 1e-4;  // lower bound on the GPLC jitter σ

  const NormalPrior& for_coord(std::size_t k) const;
};

struct TrainingData {
  RowMatrix x;  // n × p
  Vector y;     // n
};

struct OpCounts {
  std::uint64_t main_factorizations = 0;  // C (STD, GPLC) or C_y (GPLV), full or trailing
  std::uint64_t z_factorizations = 0;     // C_z
  std::uint64_t rank1_updates = 0;        // C_y diagonal change
  std::uint64_t row_rebuilds = 0;         // GPLC row/column i of C

  OpCounts& operator+=(const OpCounts& o);
};

struct ZSide {
  Matrix cov;                       // C_z + σ_J² I
  std::optional<CholFactor> chol;   // empty when not positive definite
};

struct StateCache {
  bool valid = false;
  Matrix main_cov;                     // C or C_y, σ² / exp(2z) on the diagonal
  std::optional<CholFactor> main_chol;
  double main_loglik = 0.0;            // log N(y | 0, C)
  RowMatrix inputs;                    // GPLC: x augmented with w
  Vector noise_var;                    // GPLV: exp(2 z_i) currently on main_cov's diagonal
  std::shared_ptr<const ZSide> z;      // GPLV only; shared between copies of a state
  double z_logprior = 0.0;             // log N(z | 0, C_z + σ_J² I)
  bool z_logprior_stale = false;
};

/// One MCMC state. Hyperparameters live on the log scale:
///   STD  [log η, log ρ_1..ρ_p, log σ]                      p+2
///   GPLC [log η, log ρ_1..ρ_p, log ρ_w, log σ]              p+3
///   GPLV [log η_y, log ρ_y1..ρ_yp, log η_z, log ρ_z1..ρ_zp] 2p+2
/// `latent` holds w (GPLC) or z (GPLV), and is empty for STD.
struct ModelState {
  std::vector<double> hyper;
  Vector latent;
  StateCache cache;

  std::size_t dim() const { return hyper.size() + static_cast<std::size_t>(latent.size()); }
  double coord(std::size_t k) const;
  void set_coord(std::size_t k, double v);
};

enum class Change {
  All,
  HyperMain,     // any STD/GPLC hyperparameter, or GPLV θ_y
  HyperZ,        // GPLV θ_z
  Latent,        // one latent coordinate (index given separately)
  LatentVector,  // GPLV: all of z; refreshes C_y only, leaves the z prior stale
  ZPrior,        // GPLV: recompute the stale z prior term
};

class Model {
 public:
  Model(ModelKind kind, TrainingData data, PriorSpec prior = {});

  ModelKind kind() const { return kind_; }
  const TrainingData& data() const { return data_; }
  const PriorSpec& prior() const { return prior_; }
  std::size_t n() const { return static_cast<std::size_t>(data_.y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(data_.x.cols()); }
  std::size_t n_hyper() const;
  std::size_t n_latent() const { return kind_ == ModelKind::Std ? 0 : n(); }
  std::vector<std::string> hyper_names() const;

  // GPLV coordinates 0..p belong to θ_y; the rest to θ_z. STD/GPLC: all main.
  bool is_z_hyper(std::size_t k) const;
  Change change_for(std::size_t coord) const;

  KernelSpec main_kernel(const std::vector<double>& hyper) const;
  KernelSpec z_kernel(const std::vector<double>& hyper) const;
  double log_prior(const std::vector<double>& hyper) const;

  // Log-hyperparameters at their prior means and a zero latent vector, cache filled.
  ModelState initial_state() const;

 private:
  ModelKind kind_;
  TrainingData data_;
  PriorSpec prior_;
};

// log N(y | 0, L Lᵀ) including the -(n/2) log 2π term.
double gaussian_loglik(const CholFactor& chol, const Vector& y);

void refresh_cache(const Model& model, ModelState& state, Change change, std::size_t index = 0,
                   OpCounts* ops = nullptr);

// Full log posterior (with normalising constants). Refreshes an invalid cache first.
// Returns -inf when any covariance matrix is not positive definite.
double log_post(const Model& model, ModelState& state);
double log_post_std(const Model& model, ModelState& state);
double log_post_gplc(const Model& model, ModelState& state);
double log_post_gplv(const Model& model, ModelState& state);

}  // namespace hetgp
