#include "hetgp/hetgp.h"

#include "experiment.hpp"
#include "metrics.hpp"
#include "predict.hpp"
#include "synthdata.hpp"

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>

using namespace hetgp;

struct hetgp_dataset {
  Dataset data;
};

struct hetgp_model {
  std::unique_ptr<Model> model;
  std::vector<std::string> names;
};

struct hetgp_chain {
  ChainRecord record;
  const Model* model = nullptr;
};

struct hetgp_prediction {
  PredictiveSummary summary;
};

namespace {

thread_local std::string last_error;

hetgp_status fail(hetgp_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

// Runs f, mapping exceptions to status codes. `runtime` is the status used for
// plain std::runtime_error, which means I/O trouble in some calls and
// numerical trouble in others.
template <class F>
hetgp_status guard(F&& f, hetgp_status runtime = HETGP_ERR_IO) {
  try {
    f();
    return HETGP_OK;
  } catch (const ConfigError& e) {
    return fail(HETGP_ERR_CONFIG, e.what());
  } catch (const NumericalError& e) {
    return fail(HETGP_ERR_NUMERICAL, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(HETGP_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(HETGP_ERR_IO, e.what());
  } catch (const std::runtime_error& e) {
    return fail(runtime, e.what());
  } catch (const std::exception& e) {
    return fail(HETGP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HETGP_ERR_INTERNAL, "unknown error");
  }
}

hetgp_status null_arg(const char* what) { return fail(HETGP_ERR_INVALID_ARGUMENT, std::string(what) + " is NULL"); }

hetgp_status check_len(size_t got, size_t want, const char* what) {
  if (got == want) return HETGP_OK;
  return fail(HETGP_ERR_INVALID_ARGUMENT, std::string(what) + ": buffer holds " + std::to_string(got) +
                                              " values, need " + std::to_string(want));
}

PriorSpec to_prior(const hetgp_prior* p) {
  PriorSpec s;
  if (!p) return s;
  s.hyper.mean = p->mean;
  s.hyper.sd = p->sd;
  s.c = p->c;
  s.jitter_sd = p->jitter_sd;
  s.sigma_floor = p->sigma_floor;
  if (!(s.hyper.sd > 0.0) || s.c < 0.0 || !(s.jitter_sd > 0.0) || s.sigma_floor < 0.0) {
    throw std::invalid_argument("prior: sd and jitter_sd must be positive, c and sigma_floor non-negative");
  }
  return s;
}

}  // namespace

extern "C" {

const char* hetgp_version(void) { return "1.0.0"; }

const char* hetgp_last_error(void) { return last_error.c_str(); }

const char* hetgp_status_name(hetgp_status status) {
  switch (status) {
    case HETGP_OK: return "ok";
    case HETGP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case HETGP_ERR_CONFIG: return "configuration error";
    case HETGP_ERR_NUMERICAL: return "numerical failure";
    case HETGP_ERR_IO: return "i/o error";
    case HETGP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- datasets

hetgp_status hetgp_dataset_generate(const char* name, uint64_t seed, size_t n, hetgp_dataset** out) {
  if (!name) return null_arg("name");
  if (!out) return null_arg("out");
  return guard([&] { *out = new hetgp_dataset{generate(name, seed, n)}; });
}

hetgp_status hetgp_dataset_read_csv(const char* path, hetgp_dataset** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guard([&] {
    auto d = std::make_unique<hetgp_dataset>();
    d->data = read_csv(path);
    d->data.name = std::filesystem::path(path).stem().string();
    *out = d.release();
  });
}

hetgp_status hetgp_dataset_write_csv(const hetgp_dataset* data, const char* path) {
  if (!data) return null_arg("data");
  if (!path) return null_arg("path");
  return guard([&] { write_csv(data->data, std::string(path)); });
}

size_t hetgp_dataset_n(const hetgp_dataset* data) { return data ? data->data.n() : 0; }
size_t hetgp_dataset_p(const hetgp_dataset* data) { return data ? data->data.p() : 0; }

hetgp_status hetgp_dataset_column(const hetgp_dataset* data, hetgp_column which, double* out, size_t len) {
  if (!data) return null_arg("data");
  if (!out) return null_arg("out");
  const Dataset& d = data->data;
  const Vector* v = nullptr;
  switch (which) {
    case HETGP_COL_X: {
      if (auto s = check_len(len, d.n() * d.p(), "x"); s != HETGP_OK) return s;
      std::copy(d.x.data(), d.x.data() + len, out);  // row-major storage
      return HETGP_OK;
    }
    case HETGP_COL_Y: v = &d.y; break;
    case HETGP_COL_F_TRUE: v = &d.f_true; break;
    case HETGP_COL_SD_TRUE: v = &d.sd_true; break;
    default: return fail(HETGP_ERR_INVALID_ARGUMENT, "unknown column");
  }
  if (auto s = check_len(len, d.n(), "column"); s != HETGP_OK) return s;
  std::copy(v->data(), v->data() + len, out);
  return HETGP_OK;
}

void hetgp_dataset_free(hetgp_dataset* data) { delete data; }

// ---- models

void hetgp_prior_default(hetgp_prior* prior) {
  if (!prior) return;
  const PriorSpec s;
  *prior = {s.hyper.mean, s.hyper.sd, s.c, s.jitter_sd, s.sigma_floor};
}

hetgp_status hetgp_model_create(const char* kind, const hetgp_dataset* train, const hetgp_prior* prior,
                                hetgp_model** out) {
  if (!kind) return null_arg("kind");
  if (!train) return null_arg("train");
  if (!out) return null_arg("out");
  return guard([&] {
    auto m = std::make_unique<hetgp_model>();
    m->model = std::make_unique<Model>(parse_model_kind(kind), TrainingData{train->data.x, train->data.y},
                                       to_prior(prior));
    m->names = m->model->hyper_names();
    *out = m.release();
  });
}

size_t hetgp_model_n_hyper(const hetgp_model* model) { return model ? model->model->n_hyper() : 0; }
size_t hetgp_model_n_latent(const hetgp_model* model) { return model ? model->model->n_latent() : 0; }

const char* hetgp_model_hyper_name(const hetgp_model* model, size_t k) {
  if (!model || k >= model->names.size()) return nullptr;
  return model->names[k].c_str();
}

hetgp_status hetgp_model_log_posterior(const hetgp_model* model, const double* hyper, size_t n_hyper,
                                       const double* latent, size_t n_latent, double* out) {
  if (!model) return null_arg("model");
  if (!out) return null_arg("out");
  const Model& m = *model->model;
  if (auto s = check_len(n_hyper, m.n_hyper(), "hyper"); s != HETGP_OK) return s;
  if (auto s = check_len(n_latent, m.n_latent(), "latent"); s != HETGP_OK) return s;
  if (n_hyper && !hyper) return null_arg("hyper");
  if (n_latent && !latent) return null_arg("latent");
  return guard([&] {
    ModelState st;
    st.hyper.assign(hyper, hyper + n_hyper);
    st.latent = Eigen::Map<const Vector>(latent, static_cast<Eigen::Index>(n_latent));
    *out = log_post(m, st);
  }, HETGP_ERR_NUMERICAL);
}

void hetgp_model_free(hetgp_model* model) { delete model; }

// ---- chains

void hetgp_chain_options_default(hetgp_chain_options* opts) {
  if (!opts) return;
  const ScheduleConfig s;
  *opts = {};
  opts->sampler = nullptr;
  opts->gplv_hyper = nullptr;
  opts->n_iter = 2000;
  opts->thin = s.thin;
  opts->seed = 1;
  opts->slice_width = s.slice.width;
  opts->max_stepouts = s.slice.max_stepouts;
  opts->hyper_sd = s.initial_hyper_sd;
  opts->latent_sd = s.initial_latent_sd;
  opts->corr_a = s.corr.a;
  opts->corr_m = s.corr.m;
  opts->latent_prior_draw = 0;
  opts->time_budget_seconds = 0.0;
}

hetgp_status hetgp_chain_run(const hetgp_model* model, const hetgp_chain_options* opts, hetgp_chain** out) {
  if (!model) return null_arg("model");
  if (!out) return null_arg("out");
  hetgp_chain_options o;
  hetgp_chain_options_default(&o);
  if (opts) o = *opts;
  return guard([&] {
    const Model& m = *model->model;
    ScheduleConfig s;
    s.sampler = o.sampler ? parse_sampler_kind(o.sampler)
                          : (m.kind() == ModelKind::Gplv ? SamplerKind::ModifiedMetropolis : SamplerKind::Slice);
    if (o.gplv_hyper) s.gplv_hyper = parse_sampler_kind(o.gplv_hyper);
    if (o.thin < 1) throw std::invalid_argument("thin must be at least 1");
    if (!(o.slice_width > 0.0) || !(o.hyper_sd > 0.0) || !(o.latent_sd > 0.0)) {
      throw std::invalid_argument("slice_width, hyper_sd and latent_sd must be positive");
    }
    s.thin = o.thin;
    s.slice.width = o.slice_width;
    s.slice.max_stepouts = o.max_stepouts;
    s.initial_hyper_sd = o.hyper_sd;
    s.initial_latent_sd = o.latent_sd;
    s.corr.a = o.corr_a;
    s.corr.m = o.corr_m;
    s.latent_init = o.latent_prior_draw ? LatentInit::PriorDraw : LatentInit::PriorMean;
    s.time_budget_seconds = o.time_budget_seconds;
    auto c = std::make_unique<hetgp_chain>();
    c->record = run_chain(m, o.n_iter, o.seed, s);
    c->model = &m;
    *out = c.release();
  }, HETGP_ERR_NUMERICAL);
}

size_t hetgp_chain_n_iter(const hetgp_chain* chain) { return chain ? chain->record.n_iter : 0; }
size_t hetgp_chain_burn_in(const hetgp_chain* chain) { return chain ? chain->record.burn_in : 0; }
size_t hetgp_chain_n_draws(const hetgp_chain* chain) { return chain ? chain->record.draws.size() : 0; }

hetgp_status hetgp_chain_lpd_trace(const hetgp_chain* chain, double* out, size_t len) {
  if (!chain) return null_arg("chain");
  if (!out) return null_arg("out");
  const auto& t = chain->record.lpd_trace;
  if (auto s = check_len(len, t.size(), "lpd trace"); s != HETGP_OK) return s;
  std::copy(t.begin(), t.end(), out);
  return HETGP_OK;
}

hetgp_status hetgp_chain_draw_hyper(const hetgp_chain* chain, size_t k, double* out, size_t len) {
  if (!chain) return null_arg("chain");
  if (!out) return null_arg("out");
  if (k >= chain->record.draws.size()) return fail(HETGP_ERR_INVALID_ARGUMENT, "draw index out of range");
  const auto& h = chain->record.draws[k].hyper;
  if (auto s = check_len(len, h.size(), "hyper"); s != HETGP_OK) return s;
  std::copy(h.begin(), h.end(), out);
  return HETGP_OK;
}

double hetgp_chain_accept_rate(const hetgp_chain* chain) {
  if (!chain) return 0.0;
  const Acceptance& a = chain->record.acceptance;
  const auto p = a.hyper_main.proposed + a.hyper_z.proposed + a.latent.proposed;
  const auto k = a.hyper_main.accepted + a.hyper_z.accepted + a.latent.accepted;
  return p ? static_cast<double>(k) / static_cast<double>(p) : 0.0;
}

double hetgp_chain_cpu_seconds(const hetgp_chain* chain) { return chain ? chain->record.total_cpu() : 0.0; }

void hetgp_chain_free(hetgp_chain* chain) { delete chain; }

// ---- prediction

hetgp_status hetgp_predict(const hetgp_model* model, const hetgp_chain* chain, const hetgp_dataset* test,
                           size_t n_wstar, uint64_t seed, hetgp_prediction** out) {
  if (!model) return null_arg("model");
  if (!chain) return null_arg("chain");
  if (!test) return null_arg("test");
  if (!out) return null_arg("out");
  if (chain->model != model->model.get()) {
    return fail(HETGP_ERR_INVALID_ARGUMENT, "chain was not run on this model");
  }
  return guard([&] {
    auto p = std::make_unique<hetgp_prediction>();
    p->summary = predict(*model->model, chain->record.post_burn_in(), test->data.x, n_wstar, seed);
    *out = p.release();
  }, HETGP_ERR_NUMERICAL);
}

size_t hetgp_prediction_cases(const hetgp_prediction* pred) { return pred ? pred->summary.cases() : 0; }
size_t hetgp_prediction_components(const hetgp_prediction* pred) { return pred ? pred->summary.components() : 0; }

hetgp_status hetgp_prediction_pooled(const hetgp_prediction* pred, double* mean, double* var, size_t len) {
  if (!pred) return null_arg("pred");
  if (auto s = check_len(len, pred->summary.cases(), "pooled"); s != HETGP_OK) return s;
  if (mean) std::copy(pred->summary.pooled_mean.data(), pred->summary.pooled_mean.data() + len, mean);
  if (var) std::copy(pred->summary.pooled_var.data(), pred->summary.pooled_var.data() + len, var);
  return HETGP_OK;
}

hetgp_status hetgp_prediction_evaluate(const hetgp_prediction* pred, const hetgp_dataset* test, double* mse,
                                       double* nlpd) {
  if (!pred) return null_arg("pred");
  if (!test) return null_arg("test");
  if (auto s = check_len(test->data.n(), pred->summary.cases(), "test cases"); s != HETGP_OK) return s;
  return guard([&] {
    const PredictiveSummary& s = pred->summary;
    const EvalReport r = evaluate(s.pooled_mean, s.means, s.vars, test->data.f_true, test->data.y);
    if (mse) *mse = r.mse;
    if (nlpd) *nlpd = r.nlpd;
  });
}

void hetgp_prediction_free(hetgp_prediction* pred) { delete pred; }

// ---- metrics

hetgp_status hetgp_mse(const double* pred, const double* truth, size_t n, double* out) {
  if (!pred || !truth || !out) return null_arg("pred/truth/out");
  return guard([&] { *out = mse(std::span(pred, n), std::span(truth, n)); });
}

hetgp_status hetgp_nlpd_case(const double* means, const double* vars, size_t m, double y, double* out) {
  if (!means || !vars || !out) return null_arg("means/vars/out");
  return guard([&] { *out = mixture_nlpd_term(std::span(means, m), std::span(vars, m), y); });
}

hetgp_status hetgp_act_time(const double* series, size_t len, double cpu_per_iter, hetgp_act_report* out) {
  if (!series || !out) return null_arg("series/out");
  return guard([&] {
    const ActReport r = act_time(std::span(series, len), cpu_per_iter);
    *out = {r.tau_hat, r.cutoff_k, r.cpu_per_iter, r.tau_tilde};
  });
}

// ---- harness

hetgp_status hetgp_run_experiment(const char* config_path, const char* output_dir, hetgp_run_summary* out) {
  if (!config_path) return null_arg("config_path");
  return guard([&] {
    ExperimentConfig cfg = load_config(config_path);
    if (output_dir) cfg.output_dir = output_dir;
    const ExperimentReport rep = run_experiment(cfg);
    if (out) *out = {rep.rows.size(), rep.cells_run, rep.cells_skipped};
  });
}

hetgp_status hetgp_run_study(const char* config_path, const char* output_dir) {
  if (!config_path) return null_arg("config_path");
  return guard([&] {
    ExperimentConfig cfg = load_config(config_path);
    if (output_dir) cfg.output_dir = output_dir;
    run_sampler_study(cfg);
  });
}

hetgp_status hetgp_summarize(const char* dir, size_t* n_missing) {
  if (!dir) return null_arg("dir");
  return guard([&] {
    const SummaryReport rep = summarize(dir);
    if (n_missing) *n_missing = rep.missing.size();
  });
}

hetgp_status hetgp_summary_pair(const char* dir, const char* dataset, const char* metric, const char* model_a,
                                const char* model_b, size_t* a_wins, size_t* b_wins, size_t* ties) {
  if (!dir || !dataset || !metric || !model_a || !model_b) return null_arg("dir/dataset/metric/model");
  return guard([&] {
    const SummaryReport rep = summarize_rows(read_rows((std::filesystem::path(dir) / "results.csv").string()));
    const PairSummary* p = rep.find(dataset, metric, model_a, model_b);
    bool swapped = false;
    if (!p) {
      p = rep.find(dataset, metric, model_b, model_a);
      swapped = true;
    }
    if (!p) throw std::invalid_argument("no such dataset/metric/model pair in the results");
    if (a_wins) *a_wins = swapped ? p->b_wins : p->a_wins;
    if (b_wins) *b_wins = swapped ? p->a_wins : p->b_wins;
    if (ties) *ties = p->ties;
  });
}

}  // extern "C"
