#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hetgp {

double mse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("mse: length mismatch");
  if (pred.empty()) throw std::invalid_argument("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double mse(const Vector& pred, const Vector& truth) {
  return mse(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
             std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

double mixture_nlpd_term(std::span<const double> means, std::span<const double> vars, double y) {
  if (means.size() != vars.size() || means.empty()) {
    throw std::invalid_argument("nlpd: need matching, non-empty component lists");
  }
  static const double log2pi = std::log(2.0 * std::numbers::pi);
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(means.size());
  for (std::size_t j = 0; j < means.size(); ++j) {
    if (!(vars[j] > 0.0)) throw std::invalid_argument("nlpd: component variance must be positive");
    const double d = y - means[j];
    logs[j] = -0.5 * (log2pi + std::log(vars[j]) + d * d / vars[j]);
    top = std::max(top, logs[j]);
  }
  double s = 0.0;
  for (double l : logs) s += std::exp(l - top);
  return -(top + std::log(s / static_cast<double>(means.size())));
}

double nlpd(const Matrix& means, const Matrix& vars, const Vector& y) {
  if (means.rows() != y.size() || vars.rows() != y.size() || means.cols() != vars.cols()) {
    throw std::invalid_argument("nlpd: shape mismatch");
  }
  const Eigen::Index m = means.cols();
  std::vector<double> mu(static_cast<std::size_t>(m)), var(static_cast<std::size_t>(m));
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      mu[static_cast<std::size_t>(j)] = means(i, j);
      var[static_cast<std::size_t>(j)] = vars(i, j);
    }
    s += mixture_nlpd_term(mu, var, y(i));
  }
  return s / static_cast<double>(y.size());
}

EvalReport evaluate(const Vector& pooled_mean, const Matrix& means, const Matrix& vars,
                    const Vector& f_true, const Vector& y) {
  if (pooled_mean.size() != f_true.size() || y.size() != f_true.size()) {
    throw std::invalid_argument("evaluate: length mismatch");
  }
  EvalReport r;
  const Eigen::Index n = y.size();
  const Eigen::Index m = means.cols();
  std::vector<double> mu(static_cast<std::size_t>(m)), var(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = pooled_mean(i) - f_true(i);
    r.mse_terms.push_back(d * d);
    for (Eigen::Index j = 0; j < m; ++j) {
      mu[static_cast<std::size_t>(j)] = means(i, j);
      var[static_cast<std::size_t>(j)] = vars(i, j);
    }
    r.nlpd_terms.push_back(mixture_nlpd_term(mu, var, y(i)));
  }
  double a = 0.0, b = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    a += r.mse_terms[static_cast<std::size_t>(i)];
    b += r.nlpd_terms[static_cast<std::size_t>(i)];
  }
  r.mse = a / static_cast<double>(n);
  r.nlpd = b / static_cast<double>(n);
  return r;
}

namespace {

struct Centred {
  double mean = 0.0;
  double c0 = 0.0;
};

Centred centre(std::span<const double> series) {
  Centred c;
  for (double v : series) c.mean += v;
  c.mean /= static_cast<double>(series.size());
  for (double v : series) c.c0 += (v - c.mean) * (v - c.mean);
  return c;
}

double lag_autocorr(std::span<const double> series, const Centred& c, std::size_t lag) {
  double s = 0.0;
  for (std::size_t t = 0; t + lag < series.size(); ++t) s += (series[t] - c.mean) * (series[t + lag] - c.mean);
  return s / c.c0;
}

}  // namespace

std::vector<double> autocorrelations(std::span<const double> series, std::size_t max_lag) {
  const Centred c = centre(series);
  if (c.c0 <= 0.0) return std::vector<double>(max_lag, 0.0);
  std::vector<double> gamma;
  gamma.reserve(max_lag);
  for (std::size_t lag = 1; lag <= max_lag && lag < series.size(); ++lag) {
    gamma.push_back(lag_autocorr(series, c, lag));
  }
  return gamma;
}

ActReport act_time(std::span<const double> series, double cpu_per_iter) {
  if (series.size() < 10) throw std::invalid_argument("act_time: need at least 10 values");
  const std::size_t m = series.size();
  ActReport r;
  r.cpu_per_iter = cpu_per_iter;
  const Centred c = centre(series);
  // Exact comparison: rounding in the mean makes c0 a tiny positive number.
  const bool constant =
      std::all_of(series.begin(), series.end(), [&](double v) { return v == series.front(); });
  if (constant || !(c.c0 > 0.0)) {
    r.tau_hat = 1.0;
    r.tau_tilde = cpu_per_iter;
    return r;
  }
  const std::size_t cap = std::max<std::size_t>(1, m / 10);
  const double band = 2.0 / std::sqrt(static_cast<double>(m));
  // Lags are computed on demand: a run of three below the band ends the scan,
  // and three extra lags past the cap let a run starting there be checked.
  std::vector<double> gamma;
  std::size_t k = cap;
  std::size_t below = 0;
  for (std::size_t lag = 1; lag <= cap + 3 && lag < m; ++lag) {
    gamma.push_back(lag_autocorr(series, c, lag));
    below = gamma.back() < band ? below + 1 : 0;
    if (below == 3) {
      k = lag - 3;
      break;
    }
  }
  k = std::min(k, cap);
  double tau = 1.0;
  for (std::size_t i = 1; i <= k; ++i) tau += 2.0 * gamma[i - 1];
  r.tau_hat = tau;
  r.cutoff_k = k;
  r.tau_tilde = tau * cpu_per_iter;
  return r;
}

std::vector<ActReport> act_summary(const ChainRecord& chain) {
  const std::size_t start = chain.burn_in;
  if (chain.lpd_trace.size() < start + 100) {
    throw std::invalid_argument("act_summary: need at least 100 post-burn-in iterations");
  }
  const double cpu = chain.mean_cpu_per_iter(start);
  std::vector<ActReport> out;
  std::vector<double> series;
  for (std::size_t k = 0; k < chain.hyper_names.size(); ++k) {
    series.clear();
    for (std::size_t t = start; t < chain.hyper_trace.size(); ++t) series.push_back(chain.hyper_trace[t][k]);
    ActReport r = act_time(series, cpu);
    r.quantity = chain.hyper_names[k];
    out.push_back(r);
  }
  if (chain.model != ModelKind::Std) {
    const std::span<const double> sum(chain.latent_sum);
    const std::span<const double> sumsq(chain.latent_sumsq);
    ActReport a = act_time(sum.subspan(start), cpu);
    a.quantity = "sum_z";
    out.push_back(a);
    ActReport b = act_time(sumsq.subspan(start), cpu);
    b.quantity = "sum_z2";
    out.push_back(b);
  }
  return out;
}

}  // namespace hetgp
