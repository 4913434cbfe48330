#include "experiment.hpp"

#include "predict.hpp"
#include "synthdata.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace hetgp {

namespace fs = std::filesystem;
using nlohmann::json;

ConfigError::ConfigError(std::string source, std::size_t line, std::string field, const std::string& what)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) +
                         (field.empty() ? std::string() : ": field '" + field + "'") + ": " + what),
      line_(line),
      field_(std::move(field)) {}

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

struct Field {
  std::string source;
  std::size_t line;
  std::string name;
  std::string value;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(source, line, name, what); }

  double real() const {
    double v = 0.0;
    if (!parse_number(value, v) || !std::isfinite(v)) fail("expected a number, got '" + value + "'");
    return v;
  }
  double positive() const {
    const double v = real();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }
  double non_negative() const {
    const double v = real();
    if (v < 0.0) fail("must not be negative");
    return v;
  }
  std::uint64_t count(std::uint64_t min = 0) const {
    std::uint64_t v = 0;
    if (!parse_number(value, v)) fail("expected a non-negative integer, got '" + value + "'");
    if (v < min) fail("must be at least " + std::to_string(min));
    return v;
  }
  std::string text() const {
    if (value.empty()) fail("must not be empty");
    return value;
  }
  SamplerKind sampler() const {
    try {
      return parse_sampler_kind(lower(value));
    } catch (const std::exception&) {
      fail("unknown sampler '" + value + "' (expected slice, metropolis or modified-metropolis)");
    }
  }
  std::vector<SamplerKind> samplers() const {
    std::vector<SamplerKind> out;
    for (const auto& s : split_list(value)) out.push_back(Field{source, line, name, s}.sampler());
    if (out.empty()) fail("must list at least one sampler");
    return out;
  }
  std::vector<std::string> datasets() const {
    std::vector<std::string> out;
    for (auto s : split_list(value)) {
      for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (!is_known_dataset(s)) fail("unknown dataset '" + s + "' (expected U1, U2, M1 or M2)");
      out.push_back(s);
    }
    if (out.empty()) fail("must list at least one dataset");
    return out;
  }
  std::vector<ModelKind> models() const {
    std::vector<ModelKind> out;
    for (const auto& s : split_list(value)) {
      try {
        out.push_back(parse_model_kind(s));
      } catch (const std::exception&) {
        fail("unknown model '" + s + "' (expected STD, GPLC or GPLV)");
      }
    }
    if (out.empty()) fail("must list at least one model");
    return out;
  }
  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> out;
    for (const auto& s : split_list(value)) {
      const auto dash = s.find('-');
      if (dash != std::string::npos && dash > 0) {
        std::uint64_t a = 0, b = 0;
        if (!parse_number(trim(s.substr(0, dash)), a) || !parse_number(trim(s.substr(dash + 1)), b) || b < a) {
          fail("bad seed range '" + s + "'");
        }
        if (b - a > 1'000'000) fail("seed range '" + s + "' is too large");
        for (std::uint64_t v = a; v <= b; ++v) out.push_back(v);
      } else {
        std::uint64_t v = 0;
        if (!parse_number(s, v)) fail("bad seed '" + s + "'");
        out.push_back(v);
      }
    }
    return out;
  }
};

void apply(ExperimentConfig& c, const std::string& section, const std::string& key, const Field& f) {
  if (section == "experiment") {
    if (key == "datasets" || key == "dataset") c.datasets = f.datasets();
    else if (key == "models" || key == "model") c.models = f.models();
    else if (key == "seeds") c.seeds = f.seeds();
    else if (key == "n") c.n = f.count(1);
    else if (key == "n_test") c.n_test = f.count(1);
    else if (key == "test_seed") c.test_seed = f.count();
    else if (key == "n_iter") c.n_iter = f.count(4);
    else if (key == "thin") c.thin = f.count(1);
    else if (key == "n_wstar") c.n_wstar = f.count(1);
    else if (key == "workers") c.workers = f.count(1);
    else if (key == "output_dir") c.output_dir = f.text();
    else f.fail("unknown key in [experiment]");
  } else if (section == "prior") {
    if (key == "mean") c.prior.hyper.mean = f.real();
    else if (key == "sd") c.prior.hyper.sd = f.positive();
    else if (key == "c") c.prior.c = f.non_negative();
    else if (key == "jitter_sd") c.prior.jitter_sd = f.positive();
    else if (key == "sigma_floor") c.prior.sigma_floor = f.non_negative();
    else f.fail("unknown key in [prior]");
  } else if (section == "sampler") {
    if (key == "kind" || key == "sampler") c.sampler = f.sampler();
    else if (key == "gplv_hyper") c.gplv_hyper = f.sampler();
    else if (key == "width") c.slice_width = f.positive();
    else if (key == "max_stepouts") c.max_stepouts = f.count();
    else if (key == "hyper_sd") c.hyper_sd = f.positive();
    else if (key == "latent_sd") c.latent_sd = f.positive();
    else if (key == "a") c.corr_a = f.positive();
    else if (key == "m") c.corr_m = f.count(1);
    else if (key == "latent_init") {
      const std::string v = lower(f.value);
      if (v == "auto") c.latent_init = LatentInitChoice::Auto;
      else if (v == "prior-mean") c.latent_init = LatentInitChoice::PriorMean;
      else if (v == "prior-draw") c.latent_init = LatentInitChoice::PriorDraw;
      else f.fail("expected auto, prior-mean or prior-draw");
    } else f.fail("unknown key in [sampler]");
  } else if (section == "study") {
    if (key == "dataset") {
      const auto d = f.datasets();
      if (d.size() != 1) f.fail("the study uses exactly one dataset");
      c.study.dataset = d.front();
    } else if (key == "seed") c.study.seed = f.count();
    else if (key == "repeats") c.study.repeats = f.count(1);
    else if (key == "budget_seconds") c.study.budget_seconds = f.positive();
    else if (key == "samplers") c.study.samplers = f.samplers();
    else f.fail("unknown key in [study]");
  } else {
    throw ConfigError(f.source, f.line, "", "unknown section [" + section + "]");
  }
}

}  // namespace

SamplerKind ExperimentConfig::sampler_for(ModelKind model) const {
  if (sampler) return *sampler;
  return model == ModelKind::Gplv ? SamplerKind::ModifiedMetropolis : SamplerKind::Slice;
}

ScheduleConfig ExperimentConfig::schedule_for(ModelKind model) const {
  ScheduleConfig s;
  s.sampler = sampler_for(model);
  s.gplv_hyper = gplv_hyper;
  s.slice.width = slice_width;
  s.slice.max_stepouts = max_stepouts;
  s.initial_hyper_sd = hyper_sd;
  s.initial_latent_sd = latent_sd;
  s.corr.a = corr_a;
  s.corr.m = corr_m;
  s.thin = thin;
  switch (latent_init) {
    case LatentInitChoice::Auto:
      s.latent_init = model == ModelKind::Gplc ? LatentInit::PriorDraw : LatentInit::PriorMean;
      break;
    case LatentInitChoice::PriorMean:
      s.latent_init = LatentInit::PriorMean;
      break;
    case LatentInitChoice::PriorDraw:
      s.latent_init = LatentInit::PriorDraw;
      break;
  }
  return s;
}

void ExperimentConfig::validate(bool need_seeds) const {
  auto fail = [&](const std::string& field, const std::string& what) {
    const auto it = field_lines.find(field);
    throw ConfigError(source, it == field_lines.end() ? 0 : it->second, field, what);
  };
  if (need_seeds && seeds.empty()) fail("experiment.seeds", "at least one seed is required");
  if (datasets.empty()) fail("experiment.datasets", "at least one dataset is required");
  if (models.empty()) fail("experiment.models", "at least one model is required");
  if (n_iter - burn_in_length(n_iter) < thin) {
    fail("experiment.thin", "no draws would be kept after burn-in; lower thin or raise n_iter");
  }
  if (sampler && *sampler == SamplerKind::ModifiedMetropolis) {
    for (ModelKind m : models) {
      if (m != ModelKind::Gplv) {
        fail("sampler.kind", "modified-metropolis only applies to GPLV, but models include " + to_string(m));
      }
    }
  }
  if (gplv_hyper == SamplerKind::ModifiedMetropolis) {
    fail("sampler.gplv_hyper", "hyperparameters use slice or metropolis");
  }
  if (corr_a > 1.0) fail("sampler.a", "must lie in (0, 1]");
  if (study.samplers.empty()) fail("study.samplers", "at least one sampler is required");
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  cfg.source = source;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, lineno, "", "unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (section != "experiment" && section != "prior" && section != "sampler" && section != "study") {
        throw ConfigError(source, lineno, "", "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, lineno, "", "expected 'key = value'");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(source, lineno, key, "key outside of any section");
    const std::string name = section + "." + key;
    if (!seen.insert(name).second) throw ConfigError(source, lineno, name, "set more than once");
    apply(cfg, section, key, Field{source, lineno, name, value});
    cfg.field_lines[name] = lineno;
  }
  // Aliases share a diagnostic slot with their canonical names.
  for (auto [alias, canon] : {std::pair{"experiment.dataset", "experiment.datasets"},
                              std::pair{"experiment.model", "experiment.models"},
                              std::pair{"sampler.sampler", "sampler.kind"}}) {
    if (auto it = cfg.field_lines.find(alias); it != cfg.field_lines.end()) cfg.field_lines[canon] = it->second;
  }
  cfg.validate(false);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 0, "", "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Hashing and seeds

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t chain_seed(const std::string& dataset, ModelKind model, std::uint64_t seed) {
  return mix(fnv1a(dataset + "/" + to_string(model)) ^ mix(seed));
}

}  // namespace

std::string cell_hash(const ExperimentConfig& c, const std::string& dataset, ModelKind model,
                      std::uint64_t seed) {
  const ScheduleConfig s = c.schedule_for(model);
  std::ostringstream o;
  o << "dataset=" << dataset << ";model=" << to_string(model) << ";seed=" << seed << ";n=" << c.n
    << ";n_test=" << c.n_test << ";test_seed=" << c.test_seed << ";n_iter=" << c.n_iter
    << ";thin=" << c.thin << ";n_wstar=" << (model == ModelKind::Gplc ? c.n_wstar : 0)
    << ";prior=" << format_double(c.prior.hyper.mean) << "," << format_double(c.prior.hyper.sd) << ","
    << format_double(c.prior.c) << "," << format_double(c.prior.jitter_sd) << ","
    << format_double(c.prior.sigma_floor) << ";sampler=" << to_string(s.sampler)
    << ";gplv_hyper=" << to_string(s.gplv_hyper) << ";width=" << format_double(s.slice.width)
    << ";stepouts=" << s.slice.max_stepouts << ";hyper_sd=" << format_double(s.initial_hyper_sd)
    << ";latent_sd=" << format_double(s.initial_latent_sd) << ";a=" << format_double(s.corr.a)
    << ";m=" << s.corr.m << ";init=" << static_cast<int>(s.latent_init);
  return hex(fnv1a(o.str()));
}

// ---------------------------------------------------------------------------
// Result rows

std::string results_header() { return "dataset,model,seed,mse,nlpd,runtime_s,n_iter,accept_rate"; }

std::string serialize_rows(const std::vector<ResultRow>& rows) {
  std::string out = results_header() + "\n";
  for (const auto& r : rows) {
    if (r.dataset.find_first_of(",\n") != std::string::npos || r.model.find_first_of(",\n") != std::string::npos) {
      throw std::invalid_argument("serialize_rows: dataset and model names cannot contain commas or newlines");
    }
    out += r.dataset + "," + r.model + "," + std::to_string(r.seed) + "," + format_double(r.mse) + "," +
           format_double(r.nlpd) + "," + format_double(r.runtime_s) + "," + std::to_string(r.n_iter) + "," +
           format_double(r.accept_rate) + "\n";
  }
  return out;
}

std::vector<ResultRow> parse_rows(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || trim(line) != results_header()) {
    throw std::runtime_error(source + ":1: expected header '" + results_header() + "'");
  }
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 8) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": expected 8 fields, got " +
                               std::to_string(f.size()));
    }
    auto bad = [&](const char* what) {
      return std::runtime_error(source + ":" + std::to_string(lineno) + ": bad " + what);
    };
    ResultRow r;
    r.dataset = f[0];
    r.model = f[1];
    if (r.dataset.empty() || r.model.empty()) throw bad("dataset/model name");
    if (!parse_number(f[2], r.seed)) throw bad("seed");
    if (!parse_number(f[3], r.mse)) throw bad("mse");
    if (!parse_number(f[4], r.nlpd)) throw bad("nlpd");
    if (!parse_number(f[5], r.runtime_s)) throw bad("runtime_s");
    if (!parse_number(f[6], r.n_iter)) throw bad("n_iter");
    if (!parse_number(f[7], r.accept_rate)) throw bad("accept_rate");
    rows.push_back(r);
  }
  return rows;
}

std::vector<ResultRow> read_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rows(ss.str(), path);
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

}  // namespace

void write_rows(const std::vector<ResultRow>& rows, const std::string& path) {
  write_file(path, serialize_rows(rows));
}

// ---------------------------------------------------------------------------
// Grid execution

namespace {

double overall_rate(const Acceptance& a) {
  const auto p = a.hyper_main.proposed + a.hyper_z.proposed + a.latent.proposed;
  const auto k = a.hyper_main.accepted + a.hyper_z.accepted + a.latent.accepted;
  return p ? static_cast<double>(k) / static_cast<double>(p) : 0.0;
}

json block_json(const BlockAcceptance& b) { return {{"proposed", b.proposed}, {"accepted", b.accepted}}; }

json acceptance_json(const Acceptance& a) {
  return {{"hyper_main", block_json(a.hyper_main)},
          {"hyper_z", block_json(a.hyper_z)},
          {"latent", block_json(a.latent)}};
}

std::string cell_stem(const std::string& dataset, ModelKind model, std::uint64_t seed, const std::string& hash) {
  return dataset + "_" + to_string(model) + "_" + std::to_string(seed) + "_" + hash;
}

std::string trace_csv(const std::vector<double>& lpd, std::size_t limit) {
  std::string out = "iteration,lpd\n";
  for (std::size_t i = 0; i < std::min(limit, lpd.size()); ++i) {
    out += std::to_string(i + 1) + "," + format_double(lpd[i]) + "\n";
  }
  return out;
}

class TestSets {
 public:
  TestSets(const ExperimentConfig& cfg) : cfg_(cfg) {}
  const Dataset& get(const std::string& name) {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& d : sets_) {
      if (d.name == name) return d;
    }
    sets_.push_back(generate(name, cfg_.test_seed, cfg_.n_test));
    return sets_.back();
  }

 private:
  const ExperimentConfig& cfg_;
  std::mutex mu_;
  std::deque<Dataset> sets_;
};

CellOutcome run_cell_with(const ExperimentConfig& cfg, const std::string& dataset, ModelKind model,
                          std::uint64_t seed, const Dataset& test) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset train = generate(dataset, seed, cfg.n);
  const Model m(model, TrainingData{train.x, train.y}, cfg.prior);
  const std::uint64_t cs = chain_seed(dataset, model, seed);
  CellOutcome out;
  try {
    out.chain = run_chain(m, cfg.n_iter, cs, cfg.schedule_for(model));
    const auto draws = out.chain.post_burn_in();
    const PredictiveSummary pred = predict(m, draws, test.x, cfg.n_wstar, mix(cs + 1));
    out.eval = evaluate(pred.pooled_mean, pred.means, pred.vars, test.f_true, test.y);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw NumericalError(dataset + "/" + to_string(model) + "/seed " + std::to_string(seed) + ": " + e.what());
  }
  if (!std::isfinite(out.eval.nlpd) || !std::isfinite(out.eval.mse)) {
    throw NumericalError(dataset + "/" + to_string(model) + "/seed " + std::to_string(seed) +
                         ": non-finite evaluation metrics");
  }
  out.eval.model = to_string(model);
  out.eval.dataset = dataset;
  out.eval.seed = seed;
  out.row.dataset = dataset;
  out.row.model = to_string(model);
  out.row.seed = seed;
  out.row.mse = out.eval.mse;
  out.row.nlpd = out.eval.nlpd;
  out.row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.row.n_iter = out.chain.n_iter;
  out.row.accept_rate = overall_rate(out.chain.acceptance);
  return out;
}

json cell_json(const ExperimentConfig& cfg, const CellOutcome& c, const std::string& hash, ModelKind model) {
  const ChainRecord& ch = c.chain;
  json post_mean = json::object();
  const auto draws = ch.post_burn_in();
  for (std::size_t k = 0; k < ch.hyper_names.size(); ++k) {
    double s = 0.0;
    for (const auto* d : draws) s += d->hyper[k];
    post_mean[ch.hyper_names[k]] = draws.empty() ? 0.0 : s / static_cast<double>(draws.size());
  }
  return {
      {"dataset", c.row.dataset},
      {"model", c.row.model},
      {"seed", c.row.seed},
      {"config_hash", hash},
      {"sampler", to_string(cfg.sampler_for(model))},
      {"n", cfg.n},
      {"n_test", cfg.n_test},
      {"test_seed", cfg.test_seed},
      {"n_iter", ch.n_iter},
      {"burn_in", ch.burn_in},
      {"thin", ch.thin},
      {"n_draws", draws.size()},
      {"n_wstar", model == ModelKind::Gplc ? cfg.n_wstar : 1},
      {"mse", c.row.mse},
      {"nlpd", c.row.nlpd},
      {"runtime_s", c.row.runtime_s},
      {"accept_rate", c.row.accept_rate},
      {"chain_cpu_s", ch.total_cpu()},
      {"final_lpd", ch.lpd_trace.empty() ? 0.0 : ch.lpd_trace.back()},
      {"posterior_mean_log_hyper", post_mean},
      {"acceptance", acceptance_json(ch.acceptance)},
      {"update_counts",
       {{"main_hyper", ch.counts.main_hyper_updates},
        {"z_hyper", ch.counts.z_hyper_updates},
        {"latent", ch.counts.latent_updates},
        {"latent_vector", ch.counts.latent_vector_updates}}},
      {"factorizations",
       {{"main", ch.ops.main_factorizations},
        {"z", ch.ops.z_factorizations},
        {"rank1", ch.ops.rank1_updates},
        {"row_rebuild", ch.ops.row_rebuilds}}},
  };
}

std::optional<ResultRow> load_cell(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const json j = json::parse(in);
    ResultRow r;
    r.dataset = j.at("dataset").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.mse = j.at("mse").get<double>();
    r.nlpd = j.at("nlpd").get<double>();
    r.runtime_s = j.at("runtime_s").get<double>();
    r.n_iter = j.at("n_iter").get<std::size_t>();
    r.accept_rate = j.at("accept_rate").get<double>();
    return r;
  } catch (const std::exception&) {
    return std::nullopt;  // damaged cell: recompute
  }
}

void write_summary(const std::string& dir, const SummaryReport& rep, const std::vector<ResultRow>& rows);

}  // namespace

CellOutcome run_cell(const ExperimentConfig& cfg, const std::string& dataset, ModelKind model,
                     std::uint64_t seed) {
  const Dataset test = generate(dataset, cfg.test_seed, cfg.n_test);
  return run_cell_with(cfg, dataset, model, seed, test);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate(true);
  const fs::path root(cfg.output_dir);
  fs::create_directories(root / "cells");
  fs::create_directories(root / "traces");

  struct Cell {
    std::string dataset;
    ModelKind model;
    std::uint64_t seed;
    std::string stem;
    std::optional<ResultRow> row;
  };
  std::vector<Cell> cells;
  for (const auto& d : cfg.datasets) {
    for (ModelKind m : cfg.models) {
      for (std::uint64_t s : cfg.seeds) {
        cells.push_back({d, m, s, cell_stem(d, m, s, cell_hash(cfg, d, m, s)), std::nullopt});
      }
    }
  }

  ExperimentReport rep;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].row = load_cell(root / "cells" / (cells[i].stem + ".json"));
    if (cells[i].row) ++rep.cells_skipped;
    else todo.push_back(i);
  }

  TestSets tests(cfg);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      {
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error) return;
      }
      Cell& cell = cells[todo[k]];
      try {
        const CellOutcome out = run_cell_with(cfg, cell.dataset, cell.model, cell.seed, tests.get(cell.dataset));
        const std::string hash = cell.stem.substr(cell.stem.rfind('_') + 1);
        write_file(root / "traces" / (cell.stem + ".csv"), trace_csv(out.chain.lpd_trace, out.chain.lpd_trace.size()));
        write_file(root / "cells" / (cell.stem + ".json"), cell_json(cfg, out, hash, cell.model).dump(2) + "\n");
        cell.row = out.row;
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.workers, todo.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  rep.cells_run = todo.size();

  for (const auto& c : cells) rep.rows.push_back(*c.row);
  rep.results_path = (root / "results.csv").string();
  write_rows(rep.rows, rep.results_path);
  write_summary(cfg.output_dir, summarize_rows(rep.rows), rep.rows);
  return rep;
}

// ---------------------------------------------------------------------------
// Pairwise summary

const PairSummary* SummaryReport::find(const std::string& dataset, const std::string& metric,
                                       const std::string& a, const std::string& b) const {
  for (const auto& p : pairs) {
    if (p.dataset == dataset && p.metric == metric && p.model_a == a && p.model_b == b) return &p;
  }
  return nullptr;
}

namespace {

int model_rank(const std::string& m) {
  if (m == "STD") return 0;
  if (m == "GPLC") return 1;
  if (m == "GPLV") return 2;
  return 3;
}

int dataset_rank(const std::string& d) {
  static const char* order[] = {"U1", "U2", "M1", "M2"};
  for (int i = 0; i < 4; ++i) {
    if (d == order[i]) return i;
  }
  return 4;
}

template <class Rank>
std::vector<std::string> ordered(std::set<std::string> items, Rank rank) {
  std::vector<std::string> v(items.begin(), items.end());
  std::stable_sort(v.begin(), v.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
  return v;
}

using RowIndex = std::map<std::tuple<std::string, std::string, std::uint64_t>, const ResultRow*>;

RowIndex index_rows(const std::vector<ResultRow>& rows) {
  RowIndex idx;
  for (const auto& r : rows) idx.emplace(std::tuple{r.dataset, r.model, r.seed}, &r);
  return idx;
}

void write_summary(const std::string& dir, const SummaryReport& rep, const std::vector<ResultRow>& rows) {
  const fs::path root(dir);
  fs::create_directories(root / "pairs");
  std::string s = "dataset,metric,model_a,model_b,a_wins,b_wins,ties,paired\n";
  for (const auto& p : rep.pairs) {
    s += p.dataset + "," + p.metric + "," + p.model_a + "," + p.model_b + "," + std::to_string(p.a_wins) + "," +
         std::to_string(p.b_wins) + "," + std::to_string(p.ties) + "," + std::to_string(p.paired) + "\n";
  }
  write_file(root / "summary.csv", s);

  const RowIndex idx = index_rows(rows);
  std::set<std::uint64_t> seeds;
  for (const auto& r : rows) seeds.insert(r.seed);
  for (const auto& p : rep.pairs) {
    std::string out = "seed," + p.model_a + "," + p.model_b + "\n";
    for (std::uint64_t seed : seeds) {
      const auto a = idx.find({p.dataset, p.model_a, seed});
      const auto b = idx.find({p.dataset, p.model_b, seed});
      if (a == idx.end() || b == idx.end()) continue;
      const double va = p.metric == "nlpd" ? a->second->nlpd : a->second->mse;
      const double vb = p.metric == "nlpd" ? b->second->nlpd : b->second->mse;
      out += std::to_string(seed) + "," + format_double(va) + "," + format_double(vb) + "\n";
    }
    write_file(root / "pairs" / (p.dataset + "_" + p.metric + "_" + p.model_a + "_vs_" + p.model_b + ".csv"), out);
  }
  std::string missing;
  for (const auto& m : rep.missing) missing += m + "\n";
  write_file(root / "missing.txt", missing);
}

}  // namespace

SummaryReport summarize_rows(const std::vector<ResultRow>& rows) {
  std::set<std::string> ds_set, model_set;
  std::map<std::string, std::set<std::uint64_t>> seeds_by_ds;
  for (const auto& r : rows) {
    ds_set.insert(r.dataset);
    model_set.insert(r.model);
    seeds_by_ds[r.dataset].insert(r.seed);
  }
  const auto datasets = ordered(ds_set, dataset_rank);
  const auto models = ordered(model_set, model_rank);
  const RowIndex idx = index_rows(rows);

  SummaryReport rep;
  for (const auto& d : datasets) {
    for (const auto& m : models) {
      for (std::uint64_t s : seeds_by_ds[d]) {
        if (!idx.count({d, m, s})) rep.missing.push_back(d + "/" + m + "/" + std::to_string(s));
      }
    }
    for (const char* metric : {"nlpd", "mse"}) {
      for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
          PairSummary p{d, metric, models[i], models[j]};
          for (std::uint64_t s : seeds_by_ds[d]) {
            const auto a = idx.find({d, models[i], s});
            const auto b = idx.find({d, models[j], s});
            if (a == idx.end() || b == idx.end()) continue;
            const bool nl = p.metric == "nlpd";
            const double va = nl ? a->second->nlpd : a->second->mse;
            const double vb = nl ? b->second->nlpd : b->second->mse;
            ++p.paired;
            if (va < vb) ++p.a_wins;
            else if (vb < va) ++p.b_wins;
            else ++p.ties;
          }
          rep.pairs.push_back(p);
        }
      }
    }
  }
  return rep;
}

SummaryReport summarize(const std::string& dir) {
  const auto rows = read_rows((fs::path(dir) / "results.csv").string());
  SummaryReport rep = summarize_rows(rows);
  write_summary(dir, rep, rows);
  return rep;
}

// ---------------------------------------------------------------------------
// Sampler study

const StudyRun* StudyReport::find(std::size_t repeat, SamplerKind sampler) const {
  for (const auto& r : runs) {
    if (r.repeat == repeat && r.sampler == sampler) return &r;
  }
  return nullptr;
}

double final_quartile_median(const std::vector<double>& trace) {
  if (trace.empty()) throw std::invalid_argument("final_quartile_median: empty trace");
  const std::size_t start = trace.size() - std::max<std::size_t>(1, trace.size() / 4);
  std::vector<double> tail(trace.begin() + static_cast<std::ptrdiff_t>(start), trace.end());
  const std::size_t mid = tail.size() / 2;
  std::nth_element(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(mid), tail.end());
  double med = tail[mid];
  if (tail.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return med;
}

double cpu_to_reach(const std::vector<double>& lpd, const std::vector<double>& cum_cpu, double level,
                    double tol) {
  if (lpd.size() != cum_cpu.size()) throw std::invalid_argument("cpu_to_reach: length mismatch");
  for (std::size_t i = 0; i < lpd.size(); ++i) {
    if (std::abs(lpd[i] - level) <= tol) return cum_cpu[i];
  }
  return std::numeric_limits<double>::infinity();
}

StudyReport run_sampler_study(const ExperimentConfig& cfg) {
  cfg.validate(false);
  const StudyConfig& sc = cfg.study;
  const fs::path root = fs::path(cfg.output_dir) / "study";
  fs::create_directories(root / "traces");

  const Dataset train = generate(sc.dataset, sc.seed, cfg.n);
  const Model model(ModelKind::Gplv, TrainingData{train.x, train.y}, cfg.prior);

  StudyReport rep;
  rep.output_dir = root.string();
  constexpr double kReachTol = 5.0;
  for (std::size_t r = 0; r < sc.repeats; ++r) {
    const std::uint64_t seed = mix(sc.seed * 1000003ULL + r);
    const std::size_t first = rep.runs.size();
    for (SamplerKind s : sc.samplers) {
      ScheduleConfig sched = cfg.schedule_for(ModelKind::Gplv);
      sched.sampler = s;
      sched.latent_init = LatentInit::PriorMean;
      sched.time_budget_seconds = sc.budget_seconds;
      ChainRecord ch;
      try {
        ch = run_chain(model, 100'000'000, seed, sched);
      } catch (const std::invalid_argument&) {
        throw;
      } catch (const std::exception& e) {
        throw NumericalError("study " + to_string(s) + " repeat " + std::to_string(r) + ": " + e.what());
      }
      if (ch.n_iter < 134) {
        throw ConfigError(cfg.source, 0, "study.budget_seconds",
                          "budget too small: " + to_string(s) + " managed only " + std::to_string(ch.n_iter) +
                              " iterations (at least 134 needed for autocorrelation estimates)");
      }
      StudyRun run;
      run.repeat = r;
      run.sampler = s;
      run.n_iter = ch.n_iter;
      run.total_cpu = ch.total_cpu();
      run.cpu_per_iter = ch.mean_cpu_per_iter(ch.burn_in);
      run.act = act_summary(ch);
      run.lpd_trace = ch.lpd_trace;
      double acc = 0.0;
      for (double dt : ch.cpu_per_iter) run.cum_cpu.push_back(acc += dt);
      rep.runs.push_back(std::move(run));
    }

    // Reference level: the modified sampler's settled LPD when present,
    // otherwise the best settled level among the samplers run.
    double ref = -std::numeric_limits<double>::infinity();
    for (std::size_t k = first; k < rep.runs.size(); ++k) {
      const double med = final_quartile_median(rep.runs[k].lpd_trace);
      if (rep.runs[k].sampler == SamplerKind::ModifiedMetropolis) {
        ref = med;
        break;
      }
      ref = std::max(ref, med);
    }
    rep.reference_lpd.push_back(ref);
    for (std::size_t k = first; k < rep.runs.size(); ++k) {
      rep.runs[k].reach_cpu = cpu_to_reach(rep.runs[k].lpd_trace, rep.runs[k].cum_cpu, ref, kReachTol);
    }
  }

  // Outputs.
  std::string table = "repeat,sampler,quantity,tau_hat,cutoff_k,cpu_per_iter,tau_tilde\n";
  std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> sums;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& run : rep.runs) {
    for (const auto& a : run.act) {
      table += std::to_string(run.repeat) + "," + to_string(run.sampler) + "," + a.quantity + "," +
               format_double(a.tau_hat) + "," + std::to_string(a.cutoff_k) + "," + format_double(a.cpu_per_iter) +
               "," + format_double(a.tau_tilde) + "\n";
      const auto key = std::pair{to_string(run.sampler), a.quantity};
      auto [it, inserted] = sums.try_emplace(key, 0.0, 0);
      if (inserted) order.push_back(key);
      it->second.first += a.tau_tilde;
      ++it->second.second;
    }
  }
  write_file(root / "act_table.csv", table);
  std::string mean = "sampler,quantity,tau_tilde_mean\n";
  for (const auto& key : order) {
    const auto& [sum, count] = sums[key];
    mean += key.first + "," + key.second + "," + format_double(sum / static_cast<double>(count)) + "\n";
  }
  write_file(root / "act_mean.csv", mean);

  json runs = json::array();
  for (std::size_t r = 0; r < sc.repeats; ++r) {
    double budget = std::numeric_limits<double>::infinity();
    for (const auto& run : rep.runs) {
      if (run.repeat == r) budget = std::min(budget, run.total_cpu);
    }
    for (const auto& run : rep.runs) {
      if (run.repeat != r) continue;
      const auto upto = static_cast<std::size_t>(
          std::upper_bound(run.cum_cpu.begin(), run.cum_cpu.end(), budget) - run.cum_cpu.begin());
      write_file(root / "traces" / (to_string(run.sampler) + "_" + std::to_string(r) + ".csv"),
                 trace_csv(run.lpd_trace, upto));
      json act = json::object();
      for (const auto& a : run.act) {
        act[a.quantity] = {{"tau_hat", a.tau_hat}, {"cutoff_k", a.cutoff_k}, {"tau_tilde", a.tau_tilde}};
      }
      runs.push_back({{"repeat", r},
                      {"sampler", to_string(run.sampler)},
                      {"n_iter", run.n_iter},
                      {"total_cpu_s", run.total_cpu},
                      {"cpu_per_iter", run.cpu_per_iter},
                      {"trace_iterations", upto},
                      {"reach_cpu_s", std::isfinite(run.reach_cpu) ? json(run.reach_cpu) : json(nullptr)},
                      {"act", act}});
    }
  }
  const json doc = {{"dataset", sc.dataset},
                    {"seed", sc.seed},
                    {"n", cfg.n},
                    {"budget_seconds", sc.budget_seconds},
                    {"reach_tolerance", kReachTol},
                    {"reference_lpd", rep.reference_lpd},
                    {"runs", runs}};
  write_file(root / "study.json", doc.dump(2) + "\n");
  return rep;
}

}  // namespace hetgp
