// Command-line front end. Talks to the library only through the C interface.
#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridpass/gridpass.h"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kParse = 2, kNumeric = 3, kNotCertified = 4 };

int exit_code(gp_status s) {
  switch (s) {
    case GP_OK: return kOk;
    case GP_ERR_PARSE:
    case GP_ERR_INVALID_SCENARIO:
    case GP_ERR_INVALID_ARGUMENT:
    case GP_ERR_INFEASIBLE: return kParse;
    case GP_ERR_NOT_HURWITZ:
    case GP_ERR_NO_CONVERGENCE:
    case GP_ERR_NUMERIC:
    case GP_ERR_NOT_SETTLED:
    case GP_ERR_TOPOLOGY: return kNumeric;
    default: return kFailure;
  }
}

struct Failure {
  gp_status status;
  std::string message;
};

void check(gp_status s, const std::string& context) {
  if (s == GP_OK) return;
  const std::string msg = gp_last_error();
  // file diagnostics already lead with the path
  throw Failure{s, msg.rfind(context, 0) == 0 ? msg : context + ": " + msg};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  gp_string_free(s);
  return out;
}

struct ScenarioHandle {
  gp_scenario* p = nullptr;
  ScenarioHandle() = default;
  ScenarioHandle(const ScenarioHandle&) = delete;
  ScenarioHandle(ScenarioHandle&& o) noexcept : p(o.p) { o.p = nullptr; }
  ~ScenarioHandle() { gp_scenario_free(p); }
};

ScenarioHandle load(const std::string& ref, double dt, double t_end) {
  ScenarioHandle h;
  check(gp_scenario_load(ref.c_str(), &h.p), ref);
  if (dt > 0 || t_end > 0) check(gp_scenario_set_timing(h.p, dt, t_end), ref);
  return h;
}

std::string file_stem(const gp_scenario* s, const std::string& ref) {
  const char* id = nullptr;
  gp_scenario_id(s, &id);
  std::string name = id && *id ? id : fs::path(ref).stem().string();
  for (auto& c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) c = '_';
  return name;
}

struct Common {
  std::vector<std::string> scenarios;
  std::string out_dir;
  double dt = 0;
  double t_end = 0;
  int jobs = 1;
  std::string format = "csv";
  std::string report = "text";
};

int cmd_l2gain(const std::vector<std::string>& scenarios, const std::string& ibr, const std::string& model) {
  if (!model.empty()) {
    std::ifstream is(model);
    if (!is) throw Failure{GP_ERR_IO, "cannot open '" + model + "'"};
    nlohmann::json j;
    try {
      is >> j;
    } catch (const std::exception& e) {
      throw Failure{GP_ERR_PARSE, model + ": " + e.what()};
    }
    auto matrix = [&](const char* key, int& rows, int& cols) {
      std::vector<double> out;
      if (!j.contains(key) || !j[key].is_array() || j[key].empty())
        throw Failure{GP_ERR_PARSE, model + ": '" + key + "' must be a non-empty array of rows"};
      rows = static_cast<int>(j[key].size());
      cols = -1;
      for (const auto& row : j[key]) {
        if (!row.is_array()) throw Failure{GP_ERR_PARSE, model + ": rows of '" + key + "' must be arrays"};
        if (cols < 0) cols = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != cols) throw Failure{GP_ERR_PARSE, model + ": ragged matrix '" + key + "'"};
        for (const auto& v : row) {
          if (!v.is_number()) throw Failure{GP_ERR_PARSE, model + ": non-numeric entry in '" + key + "'"};
          out.push_back(v.get<double>());
        }
      }
      return out;
    };
    int ra, ca, rb, cb, rc, cc;
    const auto A = matrix("A", ra, ca), B = matrix("B", rb, cb), C = matrix("C", rc, cc);
    if (ra != ca || rb != ra || cc != ra) throw Failure{GP_ERR_PARSE, model + ": inconsistent A, B, C dimensions"};
    double gamma = 0, w = 0;
    check(gp_l2gain_matrices(ra, cb, rc, A.data(), B.data(), C.data(), &gamma, &w), model);
    std::printf("%s: gamma %.8g at omega %.6g rad/s (hamiltonian-bisection)\n", model.c_str(), gamma, w);
    return kOk;
  }
  if (scenarios.empty()) throw Failure{GP_ERR_INVALID_ARGUMENT, "l2gain needs --model or --scenario"};
  for (const auto& ref : scenarios) {
    ScenarioHandle s = load(ref, 0, 0);
    const size_t n = gp_scenario_ibr_count(s.p);
    for (size_t k = 0; k < n; ++k) {
      const std::string name = gp_scenario_ibr_name(s.p, k);
      if (!ibr.empty() && name != ibr) continue;
      double gamma = 0, w = 0;
      check(gp_l2gain_ibr(s.p, name.c_str(), &gamma, &w), ref + " " + name);
      std::printf("%s %s: gamma %.8g at omega %.6g rad/s (hamiltonian-bisection)\n", ref.c_str(), name.c_str(), gamma, w);
    }
  }
  return kOk;
}

int cmd_design(double gamma, double kappa, double margin, const std::string& ibr) {
  double alpha = 0, beta = 0, sigma = 0;
  check(gp_design_pei(gamma, kappa, margin, &alpha, &beta, &sigma), "design-pei");
  int valid = 0;
  check(gp_verify_pei(gamma, alpha, beta, kappa, &valid, nullptr), "design-pei");
  std::printf("# gamma %.10g, margin %g: %s\n", gamma, margin, valid ? "valid" : "INVALID");
  std::printf("[pei]\n%s.alpha = %.17g\n%s.beta = %.17g\n%s.kappa = %.17g\n%s.gamma = %.17g\n%s.sigma = %.17g\n",
              ibr.c_str(), alpha, ibr.c_str(), beta, ibr.c_str(), kappa, ibr.c_str(), gamma, ibr.c_str(), sigma);
  return valid ? kOk : kFailure;
}

// One scenario through the given pipeline; returns the rendered report.
struct Outcome {
  std::string text;
  int code = kOk;
};

Outcome run_one(const std::string& ref, const Common& c, bool simulate, bool certify, const std::string& traj_path) {
  Outcome out;
  gp_report* rep = nullptr;
  gp_trajectory* tr = nullptr;
  try {
    ScenarioHandle s = load(ref, c.dt, c.t_end);
    if (certify) check(gp_certify(s.p, &rep), ref);
    else check(gp_report_create(s.p, &rep), ref);
    if (simulate) {
      check(gp_simulate(s.p, &tr), ref);
      if (!c.out_dir.empty()) {
        const bool binary = c.format == "binary";
        const fs::path p = fs::path(c.out_dir) / (file_stem(s.p, ref) + (binary ? ".bin" : ".csv"));
        check(gp_trajectory_write(tr, p.string().c_str(), binary ? GP_FORMAT_BINARY : GP_FORMAT_CSV), ref);
        check(gp_report_add_artifact(rep, p.string().c_str()), ref);
      }
    } else if (!traj_path.empty()) {
      check(gp_trajectory_read(traj_path.c_str(), &tr), traj_path);
    }
    if (tr) check(gp_report_analyze(rep, s.p, tr), ref);
    if (!c.out_dir.empty()) {
      const fs::path p = fs::path(c.out_dir) / (file_stem(s.p, ref) + ".report.json");
      std::ofstream os(p);
      os << take([&] {
        char* j = nullptr;
        check(gp_report_render(rep, GP_REPORT_JSON, &j), ref);
        return j;
      }());
      if (!os) throw Failure{GP_ERR_IO, "cannot write '" + p.string() + "'"};
    }
    char* txt = nullptr;
    check(gp_report_render(rep, c.report == "json" ? GP_REPORT_JSON : GP_REPORT_TEXT, &txt), ref);
    out.text = take(txt);
    if (certify && !gp_report_certified(rep)) out.code = kNotCertified;
  } catch (const Failure& f) {
    out.text = "error: " + f.message + "\n";
    out.code = exit_code(f.status);
  }
  gp_trajectory_free(tr);
  gp_report_free(rep);
  return out;
}

int run_batch(const Common& c, bool simulate, bool certify, const std::string& traj_path) {
  if (c.scenarios.empty()) throw Failure{GP_ERR_INVALID_ARGUMENT, "at least one --scenario is required"};
  if (!c.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) throw Failure{GP_ERR_IO, "cannot create '" + c.out_dir + "': " + ec.message()};
  }
  std::vector<Outcome> results(c.scenarios.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t k; (k = next++) < c.scenarios.size();) results[k] = run_one(c.scenarios[k], c, simulate, certify, traj_path);
  };
  const int jobs = std::max(1, std::min<int>(c.jobs, static_cast<int>(c.scenarios.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kOk;
  for (const auto& r : results) {
    (r.code == kOk || r.code == kNotCertified ? std::cout : std::cerr) << r.text;
    code = std::max(code, r.code);
  }
  return code;
}

void add_common(CLI::App* sub, Common& c, bool with_output) {
  sub->add_option("-s,--scenario", c.scenarios, "scenario file or built-in id (paper:...)")->required();
  sub->add_option("--dt", c.dt, "integration step override, s")->check(CLI::PositiveNumber);
  sub->add_option("--t-end", c.t_end, "end time override, s")->check(CLI::PositiveNumber);
  sub->add_option("--report", c.report, "report style")->check(CLI::IsMember({"text", "json"}));
  if (with_output) {
    sub->add_option("-o,--out-dir", c.out_dir, "directory for trajectories and JSON reports");
    sub->add_option("-j,--jobs", c.jobs, "scenarios run in parallel")->check(CLI::PositiveNumber);
    sub->add_option("--format", c.format, "trajectory format")->check(CLI::IsMember({"csv", "binary"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridpass: EMT simulation and passivity certification for inverter microgrids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gp_version());

  std::vector<std::string> l2_scenarios;
  std::string l2_ibr, l2_model;
  auto* l2 = app.add_subcommand("l2gain", "L2 gain of a state-space model or of each inverter in a scenario");
  l2->add_option("-s,--scenario", l2_scenarios, "scenario file or built-in id");
  l2->add_option("--ibr", l2_ibr, "restrict to one inverter");
  l2->add_option("-m,--model", l2_model, "JSON file with row-major matrices A, B, C");

  double gamma = 0, kappa = 1.0, margin = 1e-3;
  std::string pei_name = "ibr1";
  auto* design = app.add_subcommand("design-pei", "interface gains for a given L2 gain");
  design->add_option("-g,--gamma", gamma, "L2 gain of the inverter")->required();
  design->add_option("-k,--kappa", kappa, "voltage feed-through in (0, 1]");
  design->add_option("--margin", margin, "relative margin on both inequalities");
  design->add_option("--ibr", pei_name, "inverter name used in the emitted [pei] block");

  Common sim_opts, cert_opts, an_opts;
  auto* sim = app.add_subcommand("simulate", "run scenarios and report growth, settling, energy and sharing");
  add_common(sim, sim_opts, true);
  auto* cert = app.add_subcommand("certify", "device gains, interface checks and network passivity index");
  add_common(cert, cert_opts, false);
  std::string traj_path;
  auto* an = app.add_subcommand("analyze", "metrics of an existing trajectory against its scenario");
  add_common(an, an_opts, false);
  an->add_option("-t,--trajectory", traj_path, "CSV or binary trajectory")->required()->check(CLI::ExistingFile);
  auto* list = app.add_subcommand("list", "print the built-in scenario ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }

  try {
    if (*l2) return cmd_l2gain(l2_scenarios, l2_ibr, l2_model);
    if (*design) return cmd_design(gamma, kappa, margin, pei_name);
    if (*sim) return run_batch(sim_opts, true, false, "");
    if (*cert) return run_batch(cert_opts, false, true, "");
    if (*an) return run_batch(an_opts, false, false, traj_path);
    if (*list) {
      for (size_t k = 0; k < gp_builtin_count(); ++k) std::printf("%s\n", gp_builtin_id(k));
      return kOk;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return exit_code(f.status);
  }
  return kOk;
}
