#include "models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hetgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::vector<double> exp_range(const std::vector<double>& h, std::size_t first, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = std::exp(h[first + k]);
  return out;
}

void count(OpCounts* ops, std::uint64_t OpCounts::*field) {
  if (ops) ++(ops->*field);
}

void refresh_main(const Model& model, ModelState& s, OpCounts* ops) {
  const auto& data = model.data();
  const KernelSpec spec = model.main_kernel(s.hyper);
  StateCache& c = s.cache;
  switch (model.kind()) {
    case ModelKind::Std:
      c.main_cov = cov_matrix(spec, data.x);
      break;
    case ModelKind::Gplc:
      c.inputs = augment(data.x, s.latent);
      c.main_cov = cov_matrix(spec, c.inputs);
      break;
    case ModelKind::Gplv: {
      c.main_cov = cov_matrix(spec, data.x);
      c.noise_var = (2.0 * s.latent.array()).exp().matrix();
      const double kdiag = spec.c * spec.c + spec.eta * spec.eta;
      for (Eigen::Index i = 0; i < c.noise_var.size(); ++i) c.main_cov(i, i) = kdiag + c.noise_var(i);
      break;
    }
  }
  auto chol = cholesky(c.main_cov);
  count(ops, &OpCounts::main_factorizations);
  if (chol) {
    c.main_chol = std::move(chol).value();
    c.main_loglik = gaussian_loglik(*c.main_chol, data.y);
  } else {
    c.main_chol.reset();
    c.main_loglik = kNegInf;
  }
}

void refresh_z_prior(ModelState& s) {
  StateCache& c = s.cache;
  c.z_logprior = c.z && c.z->chol ? gaussian_loglik(*c.z->chol, s.latent) : kNegInf;
  c.z_logprior_stale = false;
}

void refresh_z(const Model& model, ModelState& s, OpCounts* ops) {
  auto side = std::make_shared<ZSide>();
  side->cov = cov_matrix(model.z_kernel(s.hyper), model.data().x);
  auto chol = cholesky(side->cov);
  count(ops, &OpCounts::z_factorizations);
  if (chol) side->chol = std::move(chol).value();
  s.cache.z = std::move(side);
  refresh_z_prior(s);
}

void refresh_gplc_latent(const Model& model, ModelState& s, std::size_t i, OpCounts* ops) {
  const auto& data = model.data();
  const KernelSpec spec = model.main_kernel(s.hyper);
  StateCache& c = s.cache;
  const auto ii = static_cast<Eigen::Index>(i);
  const auto n = static_cast<Eigen::Index>(model.n());
  c.inputs(ii, static_cast<Eigen::Index>(model.p())) = s.latent(ii);
  const Point xi = row_of(c.inputs, ii);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == ii) continue;
    const double v = cov(spec, xi, row_of(c.inputs, j));
    c.main_cov(ii, j) = v;
    c.main_cov(j, ii) = v;
  }
  c.main_cov(ii, ii) = cov(spec, xi, xi) + spec.sigma * spec.sigma;
  count(ops, &OpCounts::row_rebuilds);

  // Rows above i of the factor depend only on the unchanged leading block.
  auto chol = c.main_chol ? cholesky_from(std::move(*c.main_chol), c.main_cov, i)
                          : cholesky(c.main_cov);
  count(ops, &OpCounts::main_factorizations);
  if (chol) {
    c.main_chol = std::move(chol).value();
    c.main_loglik = gaussian_loglik(*c.main_chol, data.y);
  } else {
    c.main_chol.reset();
    c.main_loglik = kNegInf;
  }
}

void refresh_gplv_latent(const Model& model, ModelState& s, std::size_t i, OpCounts* ops) {
  const auto& data = model.data();
  StateCache& c = s.cache;
  const auto ii = static_cast<Eigen::Index>(i);
  const KernelSpec spec = model.main_kernel(s.hyper);
  const double fresh = std::exp(2.0 * s.latent(ii));
  const double delta = fresh - c.noise_var(ii);
  c.noise_var(ii) = fresh;
  c.main_cov(ii, ii) = spec.c * spec.c + spec.eta * spec.eta + fresh;

  bool updated = false;
  if (c.main_chol && delta != 0.0) {
    Vector v = Vector::Zero(c.main_cov.rows());
    v(ii) = std::sqrt(std::abs(delta));
    updated = rank1_update_inplace(*c.main_chol, std::move(v), delta > 0.0 ? 1 : -1) == 0;
    count(ops, &OpCounts::rank1_updates);
  } else if (c.main_chol) {
    updated = true;
  }
  if (!updated) {
    // Downdate lost positivity (or no factor yet): refactor from scratch.
    auto chol = cholesky(c.main_cov);
    count(ops, &OpCounts::main_factorizations);
    if (chol) {
      c.main_chol = std::move(chol).value();
    } else {
      c.main_chol.reset();
    }
  }
  c.main_loglik = c.main_chol ? gaussian_loglik(*c.main_chol, data.y) : kNegInf;
  refresh_z_prior(s);
}

void refresh_gplv_latent_vector(const Model& model, ModelState& s, OpCounts* ops) {
  const auto& data = model.data();
  StateCache& c = s.cache;
  const KernelSpec spec = model.main_kernel(s.hyper);
  const double kdiag = spec.c * spec.c + spec.eta * spec.eta;
  c.noise_var = (2.0 * s.latent.array()).exp().matrix();
  for (Eigen::Index i = 0; i < c.noise_var.size(); ++i) c.main_cov(i, i) = kdiag + c.noise_var(i);
  auto chol = cholesky(c.main_cov);
  count(ops, &OpCounts::main_factorizations);
  if (chol) {
    c.main_chol = std::move(chol).value();
    c.main_loglik = gaussian_loglik(*c.main_chol, data.y);
  } else {
    c.main_chol.reset();
    c.main_loglik = kNegInf;
  }
  c.z_logprior_stale = true;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Std:
      return "STD";
    case ModelKind::Gplc:
      return "GPLC";
    case ModelKind::Gplv:
      return "GPLV";
  }
  return "?";
}

ModelKind parse_model_kind(const std::string& name) {
  std::string u = name;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (u == "STD") return ModelKind::Std;
  if (u == "GPLC") return ModelKind::Gplc;
  if (u == "GPLV") return ModelKind::Gplv;
  throw std::invalid_argument("unknown model '" + name + "' (expected STD, GPLC or GPLV)");
}

double NormalPrior::log_density(double v) const {
  const double t = (v - mean) / sd;
  return -0.5 * t * t - std::log(sd) - kHalfLog2Pi;
}

const NormalPrior& PriorSpec::for_coord(std::size_t k) const {
  return k < overrides.size() ? overrides[k] : hyper;
}

OpCounts& OpCounts::operator+=(const OpCounts& o) {
  main_factorizations += o.main_factorizations;
  z_factorizations += o.z_factorizations;
  rank1_updates += o.rank1_updates;
  row_rebuilds += o.row_rebuilds;
  return *this;
}

double ModelState::coord(std::size_t k) const {
  return k < hyper.size() ? hyper[k] : latent(static_cast<Eigen::Index>(k - hyper.size()));
}

void ModelState::set_coord(std::size_t k, double v) {
  if (k < hyper.size()) {
    hyper[k] = v;
  } else {
    latent(static_cast<Eigen::Index>(k - hyper.size())) = v;
  }
}

Model::Model(ModelKind kind, TrainingData data, PriorSpec prior)
    : kind_(kind), data_(std::move(data)), prior_(std::move(prior)) {
  if (data_.x.rows() != data_.y.size()) throw std::invalid_argument("model: x/y size mismatch");
  if (data_.y.size() == 0) throw std::invalid_argument("model: empty training set");
  if (!(prior_.hyper.sd > 0.0)) throw std::invalid_argument("model: prior sd must be positive");
  for (const auto& o : prior_.overrides) {
    if (!(o.sd > 0.0)) throw std::invalid_argument("model: prior sd must be positive");
  }
}

std::size_t Model::n_hyper() const {
  switch (kind_) {
    case ModelKind::Std:
      return p() + 2;
    case ModelKind::Gplc:
      return p() + 3;
    case ModelKind::Gplv:
      return 2 * p() + 2;
  }
  return 0;
}

std::vector<std::string> Model::hyper_names() const {
  std::vector<std::string> names;
  const std::size_t p_ = p();
  auto rhos = [&](const std::string& prefix) {
    for (std::size_t k = 1; k <= p_; ++k) names.push_back(prefix + std::to_string(k));
  };
  switch (kind_) {
    case ModelKind::Std:
      names.push_back("eta");
      rhos("rho");
      names.push_back("sigma");
      break;
    case ModelKind::Gplc:
      names.push_back("eta");
      rhos("rho");
      names.push_back("rho_w");
      names.push_back("sigma");
      break;
    case ModelKind::Gplv:
      names.push_back("eta_y");
      rhos("rho_y");
      names.push_back("eta_z");
      rhos("rho_z");
      break;
  }
  return names;
}

bool Model::is_z_hyper(std::size_t k) const { return kind_ == ModelKind::Gplv && k > p() && k < n_hyper(); }

Change Model::change_for(std::size_t coord) const {
  if (coord >= n_hyper()) return Change::Latent;
  return is_z_hyper(coord) ? Change::HyperZ : Change::HyperMain;
}

KernelSpec Model::main_kernel(const std::vector<double>& h) const {
  const std::size_t p_ = p();
  switch (kind_) {
    case ModelKind::Std:
      return se_ard(std::exp(h[0]), exp_range(h, 1, p_), prior_.c, std::exp(h[p_ + 1]));
    case ModelKind::Gplc:
      return se_ard(std::exp(h[0]), exp_range(h, 1, p_ + 1), prior_.c,
                    std::max(std::exp(h[p_ + 2]), prior_.sigma_floor));
    case ModelKind::Gplv:
      return se_ard(std::exp(h[0]), exp_range(h, 1, p_), prior_.c, 0.0);
  }
  throw std::logic_error("unreachable");
}

KernelSpec Model::z_kernel(const std::vector<double>& h) const {
  if (kind_ != ModelKind::Gplv) throw std::logic_error("z_kernel: only GPLV has a log-SD process");
  const std::size_t p_ = p();
  return se_ard(std::exp(h[p_ + 1]), exp_range(h, p_ + 2, p_), prior_.c, prior_.jitter_sd);
}

double Model::log_prior(const std::vector<double>& h) const {
  double lp = 0.0;
  for (std::size_t k = 0; k < h.size(); ++k) lp += prior_.for_coord(k).log_density(h[k]);
  return lp;
}

ModelState Model::initial_state() const {
  ModelState s;
  s.hyper.resize(n_hyper());
  for (std::size_t k = 0; k < s.hyper.size(); ++k) s.hyper[k] = prior_.for_coord(k).mean;
  s.latent = Vector::Zero(static_cast<Eigen::Index>(n_latent()));
  refresh_cache(*this, s, Change::All);
  return s;
}

double gaussian_loglik(const CholFactor& chol, const Vector& y) {
  const Vector u = solve_lower(chol, y);
  return -0.5 * u.squaredNorm() - 0.5 * chol.logdet() -
         static_cast<double>(y.size()) * kHalfLog2Pi;
}

void refresh_cache(const Model& model, ModelState& s, Change change, std::size_t index,
                   OpCounts* ops) {
  if (s.hyper.size() != model.n_hyper() ||
      static_cast<std::size_t>(s.latent.size()) != model.n_latent()) {
    throw std::invalid_argument("refresh_cache: state does not match model");
  }
  if (!s.cache.valid) change = Change::All;
  const bool gplv = model.kind() == ModelKind::Gplv;
  switch (change) {
    case Change::All:
      refresh_main(model, s, ops);
      if (gplv) refresh_z(model, s, ops);
      s.cache.valid = true;
      break;
    case Change::HyperMain:
      refresh_main(model, s, ops);
      break;
    case Change::HyperZ:
      if (!gplv) throw std::logic_error("refresh_cache: HyperZ on a non-GPLV model");
      refresh_z(model, s, ops);
      break;
    case Change::Latent:
      if (index >= model.n_latent()) throw std::out_of_range("refresh_cache: latent index");
      if (gplv) {
        refresh_gplv_latent(model, s, index, ops);
      } else {
        refresh_gplc_latent(model, s, index, ops);
      }
      break;
    case Change::LatentVector:
      if (!gplv) throw std::logic_error("refresh_cache: LatentVector on a non-GPLV model");
      refresh_gplv_latent_vector(model, s, ops);
      break;
    case Change::ZPrior:
      if (!gplv) throw std::logic_error("refresh_cache: ZPrior on a non-GPLV model");
      refresh_z_prior(s);
      break;
  }
}

double log_post(const Model& model, ModelState& s) {
  if (!s.cache.valid) refresh_cache(model, s, Change::All);
  if (s.cache.z_logprior_stale) throw std::logic_error("log_post: z prior term is stale");
  if (!s.cache.main_chol) return kNegInf;
  double lp = model.log_prior(s.hyper) + s.cache.main_loglik;
  switch (model.kind()) {
    case ModelKind::Std:
      break;
    case ModelKind::Gplc:
      lp += -0.5 * s.latent.squaredNorm() - static_cast<double>(s.latent.size()) * kHalfLog2Pi;
      break;
    case ModelKind::Gplv:
      if (!s.cache.z || !s.cache.z->chol) return kNegInf;
      lp += s.cache.z_logprior;
      break;
  }
  return std::isnan(lp) ? kNegInf : lp;
}

double log_post_std(const Model& model, ModelState& s) {
  if (model.kind() != ModelKind::Std) throw std::invalid_argument("log_post_std: model is not STD");
  return log_post(model, s);
}

double log_post_gplc(const Model& model, ModelState& s) {
  if (model.kind() != ModelKind::Gplc) throw std::invalid_argument("log_post_gplc: model is not GPLC");
  return log_post(model, s);
}

double log_post_gplv(const Model& model, ModelState& s) {
  if (model.kind() != ModelKind::Gplv) throw std::invalid_argument("log_post_gplv: model is not GPLV");
  return log_post(model, s);
}

}  // namespace hetgp
