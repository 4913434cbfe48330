#pragma once

#include "linalg.hpp"
#include "samplers.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace hetgp {

struct Dataset {
  std::string name;  // U1, U2, M1, M2 or a caller-supplied label
  std::uint64_t seed = 0;
  RowMatrix x;       // n × p
  Vector y;
  Vector f_true;     // noise-free regression function
  Vector sd_true;    // residual standard deviation

  std::size_t n() const { return static_cast<std::size_t>(y.size()); }
  std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
};

inline constexpr double kEulerGamma = 0.57721566490153286061;

// Extreme value law with density (1/σ) e^{(ω-μ)/σ} exp(-e^{(ω-μ)/σ}). This is
// the minimum-type (left-skewed) law: E ω = μ - σγ, Var ω = π²σ²/6.
struct EVParams {
  double mu = 0.0;
  double sigma = 1.0;
};

double ev_density(const EVParams& params, double w);
double ev_sample(const EVParams& params, Rng& rng);
// Zero-mean draw with standard deviation target_sd.
double ev_standardized(double target_sd, Rng& rng);
// Scale σ giving standard deviation target_sd.
double ev_scale_for_sd(double target_sd);

double u_true_function(double x);
double u_residual_sd(double x);
double m_true_function(double x1, double x2, double x3);
double m_residual_sd(double x1, double x2, double x3);

// U1 (gaussian) / U2 (extreme value residuals), one covariate on [0, 1].
Dataset gen_u(std::uint64_t seed, std::size_t n, bool gaussian);
// M1 / M2, three standard-normal covariates.
Dataset gen_m(std::uint64_t seed, std::size_t n, bool gaussian);
// By name: "U1", "U2", "M1", "M2". Throws std::invalid_argument otherwise.
Dataset generate(const std::string& name, std::uint64_t seed, std::size_t n);
bool is_known_dataset(const std::string& name);

// Header `x1..xp,y,f_true,sd_true`; shortest round-trip decimal formatting.
void write_csv(const Dataset& d, std::ostream& out);
void write_csv(const Dataset& d, const std::string& path);
Dataset read_csv(const std::string& path);
// "<dataset>_<seed>.csv"
std::string csv_filename(const std::string& name, std::uint64_t seed);

// Shortest decimal string that parses back to exactly v.
std::string format_double(double v);

}  // namespace hetgp
