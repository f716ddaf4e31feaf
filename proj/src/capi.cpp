#define RTGAM_BUILDING
#include "rtgam/rtgam.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "rtgam/config.hpp"
#include "rtgam/effects.hpp"
#include "rtgam/error.hpp"
#include "rtgam/gam_engine.hpp"
#include "rtgam/io.hpp"
#include "rtgam/panel.hpp"
#include "rtgam/rt_estimator.hpp"
#include "rtgam/settings.hpp"
#include "rtgam/synthetic.hpp"

struct rtgam_config {
  rtgam::KeyValueConfig value;
};
struct rtgam_panel {
  rtgam::Panel value;
};
struct rtgam_rt {
  rtgam::RtSet value;
};
struct rtgam_model {
  rtgam::FittedGam value;
};

namespace {

thread_local std::string last_error;

rtgam_status fail(rtgam_status status, std::string message) {
  for (char& c : message)
    if (c == '\n' || c == '\r') c = ' ';
  last_error = std::move(message);
  return status;
}

rtgam_status status_of(rtgam::ErrorCode code) {
  switch (code) {
    case rtgam::ErrorCode::InvalidArgument: return RTGAM_ERR_INVALID_ARGUMENT;
    case rtgam::ErrorCode::Io: return RTGAM_ERR_IO;
    case rtgam::ErrorCode::Parse: return RTGAM_ERR_PARSE;
    case rtgam::ErrorCode::Data: return RTGAM_ERR_DATA;
    case rtgam::ErrorCode::Numeric: return RTGAM_ERR_NUMERIC;
    case rtgam::ErrorCode::Internal: return RTGAM_ERR_INTERNAL;
  }
  return RTGAM_ERR_INTERNAL;
}

template <typename Body>
rtgam_status guarded(Body body) {
  try {
    last_error.clear();
    body();
    return RTGAM_OK;
  } catch (const rtgam::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RTGAM_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RTGAM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RTGAM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RTGAM_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw rtgam::Error(rtgam::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

std::string manifest_of(const char* manifest) { return manifest ? manifest : ""; }

rtgam_status copy_out(const std::string& text, char* buf, size_t size, size_t* length) {
  if (length) *length = text.size();
  if (buf && size > 0) {
    const size_t n = text.size() < size - 1 ? text.size() : size - 1;
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
  return RTGAM_OK;
}

const rtgam::KeyValueConfig& config_or_default(const rtgam_config* config) {
  static const rtgam::KeyValueConfig empty;
  return config ? config->value : empty;
}

}  // namespace

extern "C" {

const char* rtgam_version(void) { return "1.0.0"; }

const char* rtgam_last_error(void) { return last_error.c_str(); }

const char* rtgam_status_name(rtgam_status status) {
  switch (status) {
    case RTGAM_OK: return "ok";
    case RTGAM_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case RTGAM_ERR_IO: return "io";
    case RTGAM_ERR_PARSE: return "parse";
    case RTGAM_ERR_DATA: return "data";
    case RTGAM_ERR_NUMERIC: return "numeric";
    case RTGAM_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

// --- config ---------------------------------------------------------------

rtgam_status rtgam_config_create(rtgam_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rtgam_config{};
  });
}

rtgam_status rtgam_config_load(rtgam_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    const auto loaded = rtgam::KeyValueConfig::load(path);
    for (const auto& [k, v] : loaded.entries()) config->value.set(k, v);
  });
}

rtgam_status rtgam_config_set(rtgam_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->value.set(key, value);
  });
}

rtgam_status rtgam_config_get(const rtgam_config* config, const char* key, char* buf, size_t size,
                              size_t* length) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    const auto v = config->value.get(key);
    if (!v) throw rtgam::Error(rtgam::ErrorCode::InvalidArgument, std::string("config key not set: ") + key);
    copy_out(*v, buf, size, length);
  });
}

rtgam_status rtgam_config_dump(const rtgam_config* config, char* buf, size_t size, size_t* length) {
  return guarded([&] {
    require(config, "config");
    std::string text;
    for (const auto& [k, v] : config->value.entries()) text += k + " = " + v + "\n";
    copy_out(text, buf, size, length);
  });
}

void rtgam_config_destroy(rtgam_config* config) { delete config; }

// --- panel ----------------------------------------------------------------

rtgam_status rtgam_panel_ingest(const rtgam_config* config, const char* cases_path,
                                const char* environment_path, const char* mobility_path,
                                const char* diagnostics_path, const char* manifest, rtgam_panel** out) {
  return guarded([&] {
    require(cases_path, "cases_path");
    require(environment_path, "environment_path");
    require(mobility_path, "mobility_path");
    require(out, "out");
    const auto& cfg = config_or_default(config);
    rtgam::RawSources raw =
        rtgam::ingest_sources(cases_path, environment_path, mobility_path, rtgam::ingest_config(cfg));
    std::vector<rtgam::Diagnostic> diagnostics = raw.diagnostics;
    std::exception_ptr failure;
    rtgam::Panel panel;
    try {
      panel = rtgam::build_panel(raw, rtgam::panel_config(cfg), &diagnostics);
    } catch (...) {
      failure = std::current_exception();
    }
    if (diagnostics_path) rtgam::io::write_atomic(diagnostics_path, rtgam::io::diagnostics_csv(diagnostics, manifest_of(manifest)));
    if (failure) std::rethrow_exception(failure);
    *out = new rtgam_panel{std::move(panel)};
  });
}

rtgam_status rtgam_panel_read(const char* path, rtgam_panel** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new rtgam_panel{rtgam::io::read_panel_csv(path)};
  });
}

rtgam_status rtgam_panel_write(const rtgam_panel* panel, const char* path, const char* manifest) {
  return guarded([&] {
    require(panel, "panel");
    require(path, "path");
    rtgam::io::write_atomic(path, rtgam::io::panel_csv(panel->value, manifest_of(manifest)));
  });
}

size_t rtgam_panel_rows(const rtgam_panel* panel) { return panel ? panel->value.size() : 0; }

size_t rtgam_panel_province_count(const rtgam_panel* panel) {
  return panel ? panel->value.provinces().size() : 0;
}

const char* rtgam_panel_province(const rtgam_panel* panel, size_t index) {
  if (!panel || index >= panel->value.provinces().size()) return nullptr;
  return panel->value.provinces()[index].c_str();
}

rtgam_status rtgam_panel_summary_write(const rtgam_panel* panel, const rtgam_rt* rt, const char* path,
                                       const char* manifest) {
  return guarded([&] {
    require(panel, "panel");
    require(path, "path");
    const auto table = rtgam::summarize_panel(panel->value, rt ? &rt->value : nullptr);
    rtgam::io::write_atomic(path, rtgam::io::summary_csv(table, manifest_of(manifest)));
  });
}

void rtgam_panel_destroy(rtgam_panel* panel) { delete panel; }

// --- rt -------------------------------------------------------------------

rtgam_status rtgam_rt_estimate(const rtgam_panel* panel, const rtgam_config* config, rtgam_rt** out) {
  return guarded([&] {
    require(panel, "panel");
    require(out, "out");
    const auto& cfg = config_or_default(config);
    *out = new rtgam_rt{rtgam::estimate_all(panel->value, rtgam::rt_config(cfg), rtgam::jobs(cfg))};
  });
}

rtgam_status rtgam_rt_read(const char* path, rtgam_rt** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new rtgam_rt{rtgam::io::read_rt_csv(path)};
  });
}

rtgam_status rtgam_rt_write(const rtgam_rt* rt, const char* path, const char* manifest) {
  return guarded([&] {
    require(rt, "rt");
    require(path, "path");
    rtgam::io::write_atomic(path, rtgam::io::rt_csv(rt->value, manifest_of(manifest)));
  });
}

size_t rtgam_rt_series_count(const rtgam_rt* rt) { return rt ? rt->value.size() : 0; }

void rtgam_rt_destroy(rtgam_rt* rt) { delete rt; }

// --- model ----------------------------------------------------------------

rtgam_status rtgam_model_fit(const rtgam_panel* panel, const rtgam_rt* rt, const rtgam_config* config,
                             rtgam_model** out) {
  return guarded([&] {
    require(panel, "panel");
    require(rt, "rt");
    require(out, "out");
    *out = new rtgam_model{
        rtgam::fit_gam(panel->value, rt->value, rtgam::model_spec(config_or_default(config)))};
  });
}

rtgam_status rtgam_model_read(const char* path, rtgam_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new rtgam_model{rtgam::io::read_model(path)};
  });
}

rtgam_status rtgam_model_write(const rtgam_model* model, const char* path, const char* manifest) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    rtgam::io::write_atomic(path, rtgam::io::model_to_json(model->value, manifest_of(manifest)).dump(2) + "\n");
  });
}

rtgam_status rtgam_model_summary_write(const rtgam_model* model, const char* path, const char* manifest) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    rtgam::io::write_atomic(path, rtgam::io::fit_summary_text(model->value, manifest_of(manifest)));
  });
}

size_t rtgam_model_term_count(const rtgam_model* model) {
  return model ? model->value.term_summaries.size() : 0;
}

const char* rtgam_model_term_name(const rtgam_model* model, size_t index) {
  if (!model || index >= model->value.term_summaries.size()) return nullptr;
  return model->value.term_summaries[index].name.c_str();
}

rtgam_status rtgam_model_adjusted_r2(const rtgam_model* model, double* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->value.adjusted_r2;
  });
}

rtgam_status rtgam_model_term_stats(const rtgam_model* model, size_t index, double* edf, double* lambda,
                                    double* p_value) {
  return guarded([&] {
    require(model, "model");
    if (index >= model->value.term_summaries.size())
      throw rtgam::Error(rtgam::ErrorCode::InvalidArgument, "term index out of range");
    const auto& t = model->value.term_summaries[index];
    if (edf) *edf = t.edf;
    if (lambda) *lambda = t.lambda;
    if (p_value) *p_value = t.p_value;
  });
}

rtgam_status rtgam_model_effects_write(const rtgam_model* model, const char* term, int grid_size,
                                       const char* path, const char* manifest) {
  return guarded([&] {
    require(model, "model");
    require(term, "term");
    require(path, "path");
    const auto effect = rtgam::partial_effects(model->value, term, grid_size);
    rtgam::io::write_atomic(path, rtgam::io::effect_csv(effect, manifest_of(manifest)));
  });
}

void rtgam_model_destroy(rtgam_model* model) { delete model; }

// --- validation -----------------------------------------------------------

rtgam_status rtgam_cv_write(const rtgam_panel* panel, const rtgam_rt* rt, const rtgam_config* config,
                            const char* path, const char* manifest) {
  return guarded([&] {
    require(panel, "panel");
    require(rt, "rt");
    require(path, "path");
    const auto& cfg = config_or_default(config);
    const auto report = rtgam::lopo_cv(panel->value, rt->value, rtgam::model_spec(cfg), rtgam::jobs(cfg));
    rtgam::io::write_atomic(path, rtgam::io::cv_csv(report, manifest_of(manifest)));
  });
}

rtgam_status rtgam_per_province_write(const rtgam_panel* panel, const rtgam_rt* rt,
                                      const rtgam_config* config, const char* out_dir,
                                      const char* diagnostics_path, const char* manifest,
                                      size_t* written) {
  return guarded([&] {
    require(panel, "panel");
    require(rt, "rt");
    require(out_dir, "out_dir");
    const auto& cfg = config_or_default(config);
    const auto result =
        rtgam::fit_per_province(panel->value, rt->value, rtgam::model_spec(cfg), rtgam::jobs(cfg));
    const std::filesystem::path dir(out_dir);
    const int grid = rtgam::effects_grid_size(cfg);
    for (const auto& f : result.fits)
      rtgam::io::write_atomic(dir / (f.province + ".csv"),
                              rtgam::io::province_effects_csv(f.model, grid, manifest_of(manifest)));
    if (diagnostics_path)
      rtgam::io::write_atomic(diagnostics_path, rtgam::io::diagnostics_csv(result.skipped, manifest_of(manifest)));
    if (written) *written = result.fits.size();
  });
}

rtgam_status rtgam_simulate_write(const rtgam_config* config, const char* out_dir, const char* manifest) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto scenario = rtgam::simulate_panel(rtgam::scenario_spec(config_or_default(config)));
    const std::filesystem::path dir(out_dir);
    const std::string m = manifest_of(manifest);
    rtgam::io::write_atomic(dir / "cases.csv", rtgam::io::cases_csv(scenario.panel, m));
    rtgam::io::write_atomic(dir / "environment.csv", rtgam::io::environment_csv(scenario.panel, m));
    rtgam::io::write_atomic(dir / "mobility.csv", rtgam::io::mobility_csv(scenario.panel, m));
    rtgam::io::write_atomic(dir / "truth.csv", rtgam::io::truth_csv(scenario, m));
  });
}

}  // extern "C"
