#include "gridpass/gridpass.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "gridpass/builtin_scenarios.hpp"
#include "gridpass/errors.hpp"
#include "gridpass/microgrid.hpp"
#include "gridpass/passivity.hpp"
#include "gridpass/report.hpp"
#include "gridpass/scenario_file.hpp"
#include "gridpass/simulator.hpp"
#include "gridpass/trajectory_io.hpp"

struct gp_scenario {
  gridpass::Scenario s;
};
struct gp_trajectory {
  gridpass::Trajectory t;
};
struct gp_report {
  gridpass::RunReport r;
};

namespace {

thread_local std::string g_last_error;

gp_status status_of(gridpass::ErrorKind k) {
  using gridpass::ErrorKind;
  switch (k) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::LengthMismatch:
    case ErrorKind::WindowOutOfRange: return GP_ERR_INVALID_ARGUMENT;
    case ErrorKind::Parse: return GP_ERR_PARSE;
    case ErrorKind::InvalidScenario: return GP_ERR_INVALID_SCENARIO;
    case ErrorKind::Topology:
    case ErrorKind::EmptyNetwork: return GP_ERR_TOPOLOGY;
    case ErrorKind::NotHurwitz:
    case ErrorKind::UnstableDeviceModel: return GP_ERR_NOT_HURWITZ;
    case ErrorKind::NoConvergence: return GP_ERR_NO_CONVERGENCE;
    case ErrorKind::SetpointSingularity:
    case ErrorKind::NumericFault:
    case ErrorKind::NumericBlowup: return GP_ERR_NUMERIC;
    case ErrorKind::InfeasiblePolicy: return GP_ERR_INFEASIBLE;
    case ErrorKind::NotSettled: return GP_ERR_NOT_SETTLED;
    case ErrorKind::Io: return GP_ERR_IO;
  }
  return GP_ERR_INTERNAL;
}

template <class F>
gp_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return GP_OK;
  } catch (const gridpass::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GP_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GP_ERR_INTERNAL;
  }
}

gp_status null_argument(const char* what) {
  g_last_error = std::string("null argument: ") + what;
  return GP_ERR_INVALID_ARGUMENT;
}

char* duplicate(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

gridpass::Mat row_major(const double* p, int rows, int cols) {
  gridpass::Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = p[i * cols + j];
  return m;
}

}  // namespace

extern "C" {

const char* gp_version(void) { return "0.1.0"; }

const char* gp_status_name(gp_status s) {
  switch (s) {
    case GP_OK: return "ok";
    case GP_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case GP_ERR_PARSE: return "parse-error";
    case GP_ERR_INVALID_SCENARIO: return "invalid-scenario";
    case GP_ERR_TOPOLOGY: return "topology-error";
    case GP_ERR_NOT_HURWITZ: return "not-hurwitz";
    case GP_ERR_NO_CONVERGENCE: return "no-convergence";
    case GP_ERR_NUMERIC: return "numeric-fault";
    case GP_ERR_INFEASIBLE: return "infeasible-policy";
    case GP_ERR_NOT_SETTLED: return "not-settled";
    case GP_ERR_IO: return "io-error";
    case GP_ERR_INTERNAL: return "internal-error";
  }
  return "unknown";
}

const char* gp_last_error(void) { return g_last_error.c_str(); }

void gp_string_free(char* s) { std::free(s); }

size_t gp_builtin_count(void) { return gridpass::builtin_scenario_ids().size(); }

const char* gp_builtin_id(size_t index) {
  static const std::vector<std::string> ids = gridpass::builtin_scenario_ids();
  return index < ids.size() ? ids[index].c_str() : nullptr;
}

gp_status gp_scenario_builtin(const char* id, gp_scenario** out) {
  if (!id || !out) return null_argument("id/out");
  return guarded([&] { *out = new gp_scenario{gridpass::builtin_scenario(id)}; });
}

gp_status gp_scenario_parse(const char* text, const char* source_name, gp_scenario** out) {
  if (!text || !out) return null_argument("text/out");
  return guarded([&] {
    *out = new gp_scenario{gridpass::parse_scenario(text, source_name ? source_name : "<scenario>")};
  });
}

gp_status gp_scenario_load(const char* path_or_id, gp_scenario** out) {
  if (!path_or_id || !out) return null_argument("path/out");
  return guarded([&] { *out = new gp_scenario{gridpass::resolve_scenario(path_or_id)}; });
}

gp_status gp_scenario_emit(const gp_scenario* s, char** out) {
  if (!s || !out) return null_argument("scenario/out");
  return guarded([&] { *out = duplicate(gridpass::emit_scenario(s->s)); });
}

gp_status gp_scenario_set_timing(gp_scenario* s, double dt, double t_end) {
  if (!s) return null_argument("scenario");
  return guarded([&] {
    gridpass::Scenario c = s->s;
    if (dt > 0) {
      c.sim.dt = dt;
      if (c.sim.sample_interval < dt) c.sim.sample_interval = dt;
    }
    if (t_end > 0) c.sim.t_end = t_end;
    c.validate();
    s->s = std::move(c);
  });
}

gp_status gp_scenario_id(const gp_scenario* s, const char** out) {
  if (!s || !out) return null_argument("scenario/out");
  *out = s->s.id.c_str();
  return GP_OK;
}

size_t gp_scenario_ibr_count(const gp_scenario* s) { return s ? s->s.ibrs.size() : 0; }

const char* gp_scenario_ibr_name(const gp_scenario* s, size_t index) {
  return s && index < s->s.ibrs.size() ? s->s.ibrs[index].name.c_str() : nullptr;
}

void gp_scenario_free(gp_scenario* s) { delete s; }

gp_status gp_l2gain_ibr(const gp_scenario* s, const char* ibr, double* gamma, double* omega_peak) {
  if (!s || !ibr || !gamma) return null_argument("scenario/ibr/gamma");
  return guarded([&] {
    using namespace gridpass;
    const int n = s->s.find_ibr(ibr);
    if (n < 0) fail(ErrorKind::InvalidArgument, std::string("no inverter named '") + ibr + "'");
    MicrogridModel m(s->s);
    const OperatingPoint op = find_operating_point(m, m.initial_config());
    const IbrSpec& b = s->s.ibrs[n];
    const double* x = op.x.data() + m.ibr_offset(n);
    const StateSpaceModel lin = b.kind == IbrKind::Gfm ? linearize_fast_subsystem(b.gfm, GfmState::from_array(x))
                                                       : linearize_fast_subsystem(b.gfl, GflState::from_array(x));
    const L2GainResult g = l2_gain(lin);
    *gamma = g.gamma;
    if (omega_peak) *omega_peak = g.omega_peak;
  });
}

gp_status gp_l2gain_matrices(int n, int m, int p, const double* A, const double* B, const double* C, double* gamma,
                             double* omega_peak) {
  if (!A || !B || !C || !gamma) return null_argument("A/B/C/gamma");
  if (n <= 0 || m <= 0 || p <= 0) {
    g_last_error = "matrix dimensions must be positive";
    return GP_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    gridpass::StateSpaceModel model{row_major(A, n, n), row_major(B, n, m), row_major(C, p, n), {}};
    model.validate();
    const auto g = gridpass::l2_gain(model);
    *gamma = g.gamma;
    if (omega_peak) *omega_peak = g.omega_peak;
  });
}

gp_status gp_design_pei(double gamma, double kappa, double margin, double* alpha, double* beta, double* sigma) {
  if (!alpha || !beta) return null_argument("alpha/beta");
  return guarded([&] {
    gridpass::PeiPolicy pol;
    pol.kappa = kappa;
    pol.margin = margin;
    const auto c = gridpass::design_pei(gamma, pol);
    *alpha = c.alpha;
    *beta = c.beta;
    if (sigma) *sigma = c.sigma;
  });
}

gp_status gp_verify_pei(double gamma, double alpha, double beta, double kappa, int* valid, double* sigma) {
  if (!valid) return null_argument("valid");
  return guarded([&] {
    const auto v = gridpass::verify_pei(gamma, alpha, beta, kappa);
    *valid = v.valid ? 1 : 0;
    if (sigma) *sigma = v.sigma ? *v.sigma : gridpass::kNaN;
  });
}

gp_status gp_simulate(const gp_scenario* s, gp_trajectory** out) {
  if (!s || !out) return null_argument("scenario/out");
  return guarded([&] { *out = new gp_trajectory{gridpass::simulate(s->s)}; });
}

gp_status gp_trajectory_read(const char* path, gp_trajectory** out) {
  if (!path || !out) return null_argument("path/out");
  return guarded([&] { *out = new gp_trajectory{gridpass::read_trajectory(std::string(path))}; });
}

gp_status gp_trajectory_write(const gp_trajectory* t, const char* path, gp_format format) {
  if (!t || !path) return null_argument("trajectory/path");
  return guarded([&] {
    gridpass::write_trajectory(std::string(path), t->t,
                               format == GP_FORMAT_BINARY ? gridpass::TrajectoryFormat::Binary
                                                          : gridpass::TrajectoryFormat::Csv);
  });
}

size_t gp_trajectory_samples(const gp_trajectory* t) { return t ? t->t.samples() : 0; }
size_t gp_trajectory_channel_count(const gp_trajectory* t) { return t ? t->t.names.size() : 0; }

const char* gp_trajectory_channel_name(const gp_trajectory* t, size_t index) {
  return t && index < t->t.names.size() ? t->t.names[index].c_str() : nullptr;
}

const double* gp_trajectory_time(const gp_trajectory* t) { return t ? t->t.t.data() : nullptr; }

gp_status gp_trajectory_channel(const gp_trajectory* t, const char* name, const double** data) {
  if (!t || !name || !data) return null_argument("trajectory/name/data");
  return guarded([&] { *data = t->t[name].data(); });
}

int gp_trajectory_diverged(const gp_trajectory* t, double* when) {
  if (!t) return 0;
  if (when) *when = t->t.divergence_time;
  return t->t.diverged ? 1 : 0;
}

void gp_trajectory_free(gp_trajectory* t) { delete t; }

gp_status gp_report_create(const gp_scenario* s, gp_report** out) {
  if (!s || !out) return null_argument("scenario/out");
  return guarded([&] {
    auto r = std::make_unique<gp_report>();
    r->r.scenario_id = s->s.id;
    *out = r.release();
  });
}

gp_status gp_certify(const gp_scenario* s, gp_report** out) {
  if (!s || !out) return null_argument("scenario/out");
  return guarded([&] { *out = new gp_report{gridpass::certify(s->s)}; });
}

gp_status gp_report_analyze(gp_report* r, const gp_scenario* s, const gp_trajectory* t) {
  if (!r || !s || !t) return null_argument("report/scenario/trajectory");
  return guarded([&] { gridpass::analyze_run(r->r, s->s, t->t); });
}

gp_status gp_report_add_artifact(gp_report* r, const char* path) {
  if (!r || !path) return null_argument("report/path");
  return guarded([&] { r->r.artifacts.emplace_back(path); });
}

int gp_report_certified(const gp_report* r) { return r && r->r.certified ? 1 : 0; }
int gp_report_growth(const gp_report* r) { return r && r->r.has_metrics && r->r.metrics.growth ? 1 : 0; }

int gp_report_settled(const gp_report* r, double* settling_time) {
  if (!r || !r->r.has_metrics) return 0;
  if (settling_time) *settling_time = r->r.metrics.settling_time;
  return r->r.metrics.settled ? 1 : 0;
}

gp_status gp_report_render(const gp_report* r, gp_report_style style, char** out) {
  if (!r || !out) return null_argument("report/out");
  return guarded([&] {
    *out = duplicate(style == GP_REPORT_JSON ? gridpass::report_json(r->r) : gridpass::report_text(r->r));
  });
}

void gp_report_free(gp_report* r) { delete r; }

}  // extern "C"
