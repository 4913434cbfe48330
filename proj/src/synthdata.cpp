#include "synthdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hetgp {

double ev_density(const EVParams& params, double w) {
  const double t = (w - params.mu) / params.sigma;
  return std::exp(t - std::exp(t)) / params.sigma;
}

double ev_sample(const EVParams& params, Rng& rng) {
  if (!(params.sigma > 0.0)) throw std::invalid_argument("ev_sample: sigma must be positive");
  // Inverse CDF of F(w) = 1 - exp(-e^{(w-mu)/sigma}).
  const double u = uniform01(rng);
  return params.mu + params.sigma * std::log(-std::log1p(-u));
}

double ev_scale_for_sd(double target_sd) { return target_sd * std::sqrt(6.0) / std::numbers::pi; }

double ev_standardized(double target_sd, Rng& rng) {
  if (!(target_sd > 0.0)) throw std::invalid_argument("ev_standardized: target_sd must be positive");
  const double sigma = ev_scale_for_sd(target_sd);
  // Location σγ puts the mean at zero.
  return ev_sample({sigma * kEulerGamma, sigma}, rng);
}

double u_true_function(double x) { return std::pow(1.0 + std::sin(4.0 * x), 1.1); }

double u_residual_sd(double x) { return 0.2 + 0.3 * std::exp(-30.0 * (x - 0.5) * (x - 0.5)); }

double m_true_function(double x1, double x2, double x3) {
  return std::pow(1.0 + std::sin(x1 / 1.5 + 2.0), 0.9) -
         std::pow(1.0 + std::sin(x2 / 2.0 + x3 / 3.0 - 2.0), 1.5);
}

double m_residual_sd(double x1, double x2, double x3) {
  return 0.1 + 0.4 * std::exp(-0.2 * (x1 - 1.0) * (x1 - 1.0) - 0.3 * (x2 - 2.0) * (x2 - 2.0)) +
         0.3 * std::exp(-0.3 * (x3 + 2.0) * (x3 + 2.0));
}

namespace {

double residual(double sd, bool gaussian, Rng& rng) {
  return gaussian ? sd * std_normal(rng) : ev_standardized(sd, rng);
}

void check_n(std::size_t n) {
  if (n < 1) throw std::invalid_argument("dataset size must be at least 1");
}

}  // namespace

Dataset gen_u(std::uint64_t seed, std::size_t n, bool gaussian) {
  check_n(n);
  Rng rng(seed);
  Dataset d;
  d.name = gaussian ? "U1" : "U2";
  d.seed = seed;
  const auto nn = static_cast<Eigen::Index>(n);
  d.x.resize(nn, 1);
  d.y.resize(nn);
  d.f_true.resize(nn);
  d.sd_true.resize(nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    d.x(i, 0) = x;
    d.f_true(i) = u_true_function(x);
    d.sd_true(i) = u_residual_sd(x);
    d.y(i) = d.f_true(i) + residual(d.sd_true(i), gaussian, rng);
  }
  return d;
}

Dataset gen_m(std::uint64_t seed, std::size_t n, bool gaussian) {
  check_n(n);
  Rng rng(seed);
  Dataset d;
  d.name = gaussian ? "M1" : "M2";
  d.seed = seed;
  const auto nn = static_cast<Eigen::Index>(n);
  d.x.resize(nn, 3);
  d.y.resize(nn);
  d.f_true.resize(nn);
  d.sd_true.resize(nn);
  for (Eigen::Index i = 0; i < nn; ++i) {
    for (Eigen::Index k = 0; k < 3; ++k) d.x(i, k) = std_normal(rng);
    d.f_true(i) = m_true_function(d.x(i, 0), d.x(i, 1), d.x(i, 2));
    d.sd_true(i) = m_residual_sd(d.x(i, 0), d.x(i, 1), d.x(i, 2));
    d.y(i) = d.f_true(i) + residual(d.sd_true(i), gaussian, rng);
  }
  return d;
}

bool is_known_dataset(const std::string& name) {
  return name == "U1" || name == "U2" || name == "M1" || name == "M2";
}

Dataset generate(const std::string& name, std::uint64_t seed, std::size_t n) {
  if (name == "U1") return gen_u(seed, n, true);
  if (name == "U2") return gen_u(seed, n, false);
  if (name == "M1") return gen_m(seed, n, true);
  if (name == "M2") return gen_m(seed, n, false);
  throw std::invalid_argument("unknown dataset '" + name + "' (expected U1, U2, M1 or M2)");
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_filename(const std::string& name, std::uint64_t seed) {
  return name + "_" + std::to_string(seed) + ".csv";
}

void write_csv(const Dataset& d, std::ostream& out) {
  for (std::size_t k = 1; k <= d.p(); ++k) out << 'x' << k << ',';
  out << "y,f_true,sd_true\n";
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    for (Eigen::Index k = 0; k < d.x.cols(); ++k) out << format_double(d.x(i, k)) << ',';
    out << format_double(d.y(i)) << ',' << format_double(d.f_true(i)) << ','
        << format_double(d.sd_true(i)) << '\n';
  }
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(d, out);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  std::size_t cols = 1;
  for (char ch : line) cols += ch == ',' ? 1 : 0;
  if (cols < 4) throw std::runtime_error(path + ": expected x1..xp,y,f_true,sd_true header");
  const std::size_t p = cols - 3;

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    const char* first = line.data();
    const char* last = line.data() + line.size();
    while (first <= last) {
      const char* comma = std::find(first, last, ',');
      double v = 0.0;
      const auto res = std::from_chars(first, comma, v);
      if (res.ec != std::errc{} || res.ptr != comma) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number");
      }
      row.push_back(v);
      first = comma + 1;
    }
    if (row.size() != cols) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": wrong column count");
    }
    rows.push_back(std::move(row));
  }

  Dataset d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.x.resize(n, static_cast<Eigen::Index>(p));
  d.y.resize(n);
  d.f_true.resize(n);
  d.sd_true.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < p; ++k) d.x(i, static_cast<Eigen::Index>(k)) = r[k];
    d.y(i) = r[p];
    d.f_true(i) = r[p + 1];
    d.sd_true(i) = r[p + 2];
  }
  return d;
}

}  // namespace hetgp
