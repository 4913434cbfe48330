#pragma once

#include "linalg.hpp"
#include "samplers.hpp"

#include <span>
#include <string>
#include <vector>

namespace hetgp {

struct EvalReport {
  std::string model;
  std::string dataset;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double nlpd = 0.0;
  std::vector<double> mse_terms;   // per test case; average to mse
  std::vector<double> nlpd_terms;  // per test case; average to nlpd
};

// (1/N) Σ (ŷ_i - f_i)²
double mse(std::span<const double> pred, std::span<const double> truth);
double mse(const Vector& pred, const Vector& truth);

// Negative log of the equal-weight Gaussian mixture density at y, via log-sum-exp.
double mixture_nlpd_term(std::span<const double> means, std::span<const double> vars, double y);
// Average over test cases; row i of means/vars holds case i's components.
double nlpd(const Matrix& means, const Matrix& vars, const Vector& y);

EvalReport evaluate(const Vector& pooled_mean, const Matrix& means, const Matrix& vars,
                    const Vector& f_true, const Vector& y);

struct ActReport {
  std::string quantity;
  double tau_hat = 1.0;
  std::size_t cutoff_k = 0;
  double cpu_per_iter = 0.0;
  double tau_tilde = 0.0;  // tau_hat × cpu_per_iter
};

// Biased (1/M) sample autocorrelations at lags 1..max_lag.
std::vector<double> autocorrelations(std::span<const double> series, std::size_t max_lag);

// τ̂ = 1 + 2 Σ_{i≤k} γ̂_i, with k one less than the first lag starting a run of
// three consecutive γ̂ below 2/√M, capped at M/10. A constant series gives 1.
ActReport act_time(std::span<const double> series, double cpu_per_iter = 0.0);

// Post-burn-in reports for every hyperparameter, plus Σz_i and Σz_i² for latent models.
std::vector<ActReport> act_summary(const ChainRecord& chain);

}  // namespace hetgp
