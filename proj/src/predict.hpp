#pragma once

#include "models.hpp"
#include "samplers.hpp"

#include <cstdint>
#include <vector>

namespace hetgp {

/// Monte-Carlo mixture predictive for N test cases. Column j of `means` and
/// `vars` is the Gaussian component from posterior draw j (and, for GPLC, one
/// auxiliary w* draw).
struct PredictiveSummary {
  Matrix means;  // N × M
  Matrix vars;   // N × M, strictly positive
  Vector pooled_mean;
  Vector pooled_var;  // mean of vars + variance of means, per test case

  std::size_t cases() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t components() const { return static_cast<std::size_t>(means.cols()); }
};

// Fills pooled_mean / pooled_var from the component matrices.
void pool(PredictiveSummary& s);

PredictiveSummary predict_std(const Model& model, const std::vector<const StoredDraw*>& draws,
                              const RowMatrix& x_test);

// w* ~ N(0, 1) is drawn n_wstar times per posterior draw and test case, from a
// per-test-case random stream derived from `seed`.
PredictiveSummary predict_gplc(const Model& model, const std::vector<const StoredDraw*>& draws,
                               const RowMatrix& x_test, std::size_t n_wstar, std::uint64_t seed);

// One z* per posterior draw and test case from the log-SD process conditional.
PredictiveSummary predict_gplv(const Model& model, const std::vector<const StoredDraw*>& draws,
                               const RowMatrix& x_test, std::uint64_t seed);

struct LatentConditional {
  Vector mean;
  Vector var;  // clamped below at σ_J²
};

// Conditional of z* at x_test given the training z under draw hyperparameters.
LatentConditional gplv_latent_conditional(const Model& model, const std::vector<double>& hyper,
                                          const Vector& z, const RowMatrix& x_test);

PredictiveSummary predict(const Model& model, const std::vector<const StoredDraw*>& draws,
                          const RowMatrix& x_test, std::size_t n_wstar, std::uint64_t seed);

// Independent stream for test case i.
Rng case_stream(std::uint64_t seed, std::size_t i);

}  // namespace hetgp
