#include "predict.hpp"

#include <cmath>
#include <stdexcept>

namespace hetgp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CholFactor factor_or_throw(const Matrix& c) {
  auto chol = cholesky(c);
  if (!chol) {
    throw std::runtime_error("predict: stored draw has a covariance matrix that is not positive definite");
  }
  return std::move(chol).value();
}

// Conditional mean and variance (without added noise) of the latent function
// at test inputs whose cross-covariances with the training inputs are the rows
// of k_test.
void conditional(const CholFactor& chol, const Vector& alpha, const Matrix& k_test, double prior_var,
                 Eigen::Ref<Vector> mean, Vector& var) {
  mean = k_test * alpha;
  const Matrix v = solve_lower(chol, Matrix(k_test.transpose()));
  var = (prior_var - v.colwise().squaredNorm().transpose().array()).max(0.0).matrix();
}

void check_inputs(const Model& model, const std::vector<const StoredDraw*>& draws, const RowMatrix& x_test) {
  if (draws.empty()) throw std::invalid_argument("predict: need at least one posterior draw");
  if (static_cast<std::size_t>(x_test.cols()) != model.p()) {
    throw std::invalid_argument("predict: test inputs have the wrong dimension");
  }
}

}  // namespace

Rng case_stream(std::uint64_t seed, std::size_t i) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(i) + 1)));
}

void pool(PredictiveSummary& s) {
  const double m = static_cast<double>(s.means.cols());
  s.pooled_mean = s.means.rowwise().mean();
  const Matrix centred = s.means.colwise() - s.pooled_mean;
  s.pooled_var = s.vars.rowwise().mean() + centred.rowwise().squaredNorm() / m;
}

PredictiveSummary predict_std(const Model& model, const std::vector<const StoredDraw*>& draws,
                              const RowMatrix& x_test) {
  if (model.kind() != ModelKind::Std) throw std::invalid_argument("predict_std: model is not STD");
  check_inputs(model, draws, x_test);
  const auto& data = model.data();
  const Eigen::Index nt = x_test.rows();
  PredictiveSummary s;
  s.means.resize(nt, static_cast<Eigen::Index>(draws.size()));
  s.vars.resize(nt, static_cast<Eigen::Index>(draws.size()));
  for (std::size_t j = 0; j < draws.size(); ++j) {
    const KernelSpec spec = model.main_kernel(draws[j]->hyper);
    const CholFactor chol = factor_or_throw(cov_matrix(spec, data.x));
    const Vector alpha = solve_chol(chol, data.y);
    Vector var;
    const auto col = static_cast<Eigen::Index>(j);
    conditional(chol, alpha, cross_cov(spec, x_test, data.x), spec.c * spec.c + spec.eta * spec.eta,
                s.means.col(col), var);
    s.vars.col(col) = (var.array() + spec.sigma * spec.sigma).matrix();
  }
  pool(s);
  return s;
}

PredictiveSummary predict_gplc(const Model& model, const std::vector<const StoredDraw*>& draws,
                               const RowMatrix& x_test, std::size_t n_wstar, std::uint64_t seed) {
  if (model.kind() != ModelKind::Gplc) throw std::invalid_argument("predict_gplc: model is not GPLC");
  if (n_wstar < 1) throw std::invalid_argument("predict_gplc: n_wstar must be at least 1");
  check_inputs(model, draws, x_test);
  const auto& data = model.data();
  const Eigen::Index nt = x_test.rows();
  const auto m = static_cast<Eigen::Index>(draws.size() * n_wstar);
  PredictiveSummary s;
  s.means.resize(nt, m);
  s.vars.resize(nt, m);

  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(nt));
  for (Eigen::Index i = 0; i < nt; ++i) streams.push_back(case_stream(seed, static_cast<std::size_t>(i)));

  Vector wstar(nt);
  for (std::size_t j = 0; j < draws.size(); ++j) {
    const KernelSpec spec = model.main_kernel(draws[j]->hyper);
    const RowMatrix train = augment(data.x, draws[j]->latent);
    const CholFactor chol = factor_or_throw(cov_matrix(spec, train));
    const Vector alpha = solve_chol(chol, data.y);
    for (std::size_t k = 0; k < n_wstar; ++k) {
      for (Eigen::Index i = 0; i < nt; ++i) wstar(i) = std_normal(streams[static_cast<std::size_t>(i)]);
      const auto col = static_cast<Eigen::Index>(j * n_wstar + k);
      Vector var;
      conditional(chol, alpha, cross_cov(spec, augment(x_test, wstar), train),
                  spec.c * spec.c + spec.eta * spec.eta, s.means.col(col), var);
      s.vars.col(col) = (var.array() + spec.sigma * spec.sigma).matrix();
    }
  }
  pool(s);
  return s;
}

LatentConditional gplv_latent_conditional(const Model& model, const std::vector<double>& hyper,
                                          const Vector& z, const RowMatrix& x_test) {
  const KernelSpec zspec = model.z_kernel(hyper);
  const CholFactor chol = factor_or_throw(cov_matrix(zspec, model.data().x));
  const Vector alpha = solve_chol(chol, z);
  const double jitter2 = zspec.sigma * zspec.sigma;
  LatentConditional out;
  out.mean.resize(x_test.rows());
  conditional(chol, alpha, cross_cov(zspec, x_test, model.data().x),
              zspec.c * zspec.c + zspec.eta * zspec.eta + jitter2, out.mean, out.var);
  out.var = out.var.array().max(jitter2).matrix();
  return out;
}

PredictiveSummary predict_gplv(const Model& model, const std::vector<const StoredDraw*>& draws,
                               const RowMatrix& x_test, std::uint64_t seed) {
  if (model.kind() != ModelKind::Gplv) throw std::invalid_argument("predict_gplv: model is not GPLV");
  check_inputs(model, draws, x_test);
  const auto& data = model.data();
  const Eigen::Index nt = x_test.rows();
  PredictiveSummary s;
  s.means.resize(nt, static_cast<Eigen::Index>(draws.size()));
  s.vars.resize(nt, static_cast<Eigen::Index>(draws.size()));

  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(nt));
  for (Eigen::Index i = 0; i < nt; ++i) streams.push_back(case_stream(seed, static_cast<std::size_t>(i)));

  for (std::size_t j = 0; j < draws.size(); ++j) {
    const auto& hyper = draws[j]->hyper;
    const Vector& z = draws[j]->latent;
    const LatentConditional zc = gplv_latent_conditional(model, hyper, z, x_test);

    const KernelSpec spec = model.main_kernel(hyper);
    Matrix c = cov_matrix(spec, data.x);
    c.diagonal() += (2.0 * z.array()).exp().matrix();
    const CholFactor chol = factor_or_throw(c);
    const Vector alpha = solve_chol(chol, data.y);
    Vector var;
    const auto col = static_cast<Eigen::Index>(j);
    conditional(chol, alpha, cross_cov(spec, x_test, data.x), spec.c * spec.c + spec.eta * spec.eta,
                s.means.col(col), var);
    for (Eigen::Index i = 0; i < nt; ++i) {
      const double zstar =
          zc.mean(i) + std::sqrt(zc.var(i)) * std_normal(streams[static_cast<std::size_t>(i)]);
      s.vars(i, col) = var(i) + std::exp(2.0 * zstar);
    }
  }
  pool(s);
  return s;
}

PredictiveSummary predict(const Model& model, const std::vector<const StoredDraw*>& draws,
                          const RowMatrix& x_test, std::size_t n_wstar, std::uint64_t seed) {
  switch (model.kind()) {
    case ModelKind::Std:
      return predict_std(model, draws, x_test);
    case ModelKind::Gplc:
      return predict_gplc(model, draws, x_test, n_wstar, seed);
    case ModelKind::Gplv:
      return predict_gplv(model, draws, x_test, seed);
  }
  throw std::logic_error("unreachable");
}

}  // namespace hetgp
