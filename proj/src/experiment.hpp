#pragma once

#include "metrics.hpp"
#include "models.hpp"
#include "samplers.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetgp {

// Bad configuration: carries the 1-based line (0 when not tied to a line) and
// the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string source, std::size_t line, std::string field, const std::string& what);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

// A chain or prediction could not be carried out (non-finite start, non-PD matrices).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LatentInitChoice { Auto, PriorMean, PriorDraw };

struct StudyConfig {
  std::string dataset = "U1";
  std::uint64_t seed = 1;
  std::size_t repeats = 5;
  double budget_seconds = 60.0;
  std::vector<SamplerKind> samplers{SamplerKind::Slice, SamplerKind::Metropolis,
                                    SamplerKind::ModifiedMetropolis};
};

struct ExperimentConfig {
  std::vector<std::string> datasets{"U1", "U2", "M1", "M2"};
  std::vector<ModelKind> models{ModelKind::Std, ModelKind::Gplc, ModelKind::Gplv};
  std::vector<std::uint64_t> seeds;
  std::size_t n = 100;
  std::size_t n_test = 1000;
  std::uint64_t test_seed = 20000;
  std::size_t n_iter = 2000;
  std::size_t thin = 5;
  std::size_t n_wstar = 10;
  std::size_t workers = 1;
  std::string output_dir = "results";

  PriorSpec prior;

  // Unset: slice for STD and GPLC, modified-metropolis for GPLV.
  std::optional<SamplerKind> sampler;
  SamplerKind gplv_hyper = SamplerKind::Metropolis;
  double slice_width = 1.0;
  std::uint64_t max_stepouts = 1'000'000;
  double hyper_sd = 0.5;
  double latent_sd = 0.5;
  double corr_a = 0.3;
  std::size_t corr_m = 40;
  LatentInitChoice latent_init = LatentInitChoice::Auto;

  StudyConfig study;

  // Where each field was set, for diagnostics ("section.key" -> line).
  std::string source = "config";
  std::map<std::string, std::size_t> field_lines;

  SamplerKind sampler_for(ModelKind model) const;
  ScheduleConfig schedule_for(ModelKind model) const;
  // Throws ConfigError on the first invalid field. Seeds are only required
  // for grid runs.
  void validate(bool need_seeds = true) const;
};

// INI-style text:
//   [section]
//   key = value        ; '#' or ';' starts a comment
// Sections: experiment, prior, sampler, study. Lists are comma separated;
// seeds also accept ranges such as 1-10.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

// Stable FNV-1a hash over everything that determines a cell's output.
std::string cell_hash(const ExperimentConfig& cfg, const std::string& dataset, ModelKind model,
                      std::uint64_t seed);

struct ResultRow {
  std::string dataset;
  std::string model;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double nlpd = 0.0;
  double runtime_s = 0.0;
  std::size_t n_iter = 0;
  double accept_rate = 0.0;

  bool operator==(const ResultRow&) const = default;
};

std::string results_header();
std::string serialize_rows(const std::vector<ResultRow>& rows);
// Throws std::runtime_error with a line number on malformed input.
std::vector<ResultRow> parse_rows(const std::string& text, const std::string& source = "results");
std::vector<ResultRow> read_rows(const std::string& path);
void write_rows(const std::vector<ResultRow>& rows, const std::string& path);

struct ExperimentReport {
  std::vector<ResultRow> rows;  // grid order: dataset, model, seed
  std::size_t cells_run = 0;
  std::size_t cells_skipped = 0;
  std::string results_path;
};

// Runs every (dataset, model, seed) cell, writing cells/<...>.json,
// traces/<...>.csv, results.csv and the pairwise summary under output_dir.
// Cells whose JSON already exists are loaded instead of recomputed.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// One cell, without touching the filesystem.
struct CellOutcome {
  ResultRow row;
  EvalReport eval;
  ChainRecord chain;
};
CellOutcome run_cell(const ExperimentConfig& cfg, const std::string& dataset, ModelKind model,
                     std::uint64_t seed);

struct PairSummary {
  std::string dataset;
  std::string metric;  // "nlpd" or "mse"
  std::string model_a;
  std::string model_b;
  std::size_t a_wins = 0;  // smaller value
  std::size_t b_wins = 0;
  std::size_t ties = 0;
  std::size_t paired = 0;
};

struct SummaryReport {
  std::vector<PairSummary> pairs;
  std::vector<std::string> missing;  // "dataset/model/seed" cells absent from the results
  const PairSummary* find(const std::string& dataset, const std::string& metric, const std::string& a,
                          const std::string& b) const;
};

SummaryReport summarize_rows(const std::vector<ResultRow>& rows);
// Reads <dir>/results.csv; writes <dir>/summary.csv and <dir>/pairs/*.csv.
SummaryReport summarize(const std::string& dir);

struct StudyRun {
  std::size_t repeat = 0;
  SamplerKind sampler = SamplerKind::Slice;
  std::size_t n_iter = 0;
  double total_cpu = 0.0;
  double cpu_per_iter = 0.0;
  std::vector<ActReport> act;
  std::vector<double> lpd_trace;
  std::vector<double> cum_cpu;
  // CPU seconds until the LPD first comes within 5 of the repeat's reference
  // level; infinity if it never does.
  double reach_cpu = 0.0;
};

struct StudyReport {
  std::vector<StudyRun> runs;
  std::vector<double> reference_lpd;  // per repeat
  std::string output_dir;
  const StudyRun* find(std::size_t repeat, SamplerKind sampler) const;
};

// Median of the final quarter of a trace.
double final_quartile_median(const std::vector<double>& trace);
// First cumulative CPU time at which |lpd - level| <= tol; infinity if never.
double cpu_to_reach(const std::vector<double>& lpd, const std::vector<double>& cum_cpu, double level,
                    double tol);

// GPLV sampler comparison on one replicate; writes under <output_dir>/study.
StudyReport run_sampler_study(const ExperimentConfig& cfg);

}  // namespace hetgp
