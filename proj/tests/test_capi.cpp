#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "gridpass/gridpass.h"

TEST_CASE("C interface: scenarios and errors") {
  CHECK(std::strlen(gp_version()) > 0);
  CHECK(gp_builtin_count() > 10);
  CHECK(gp_builtin_id(gp_builtin_count()) == nullptr);

  gp_scenario* s = nullptr;
  CHECK(gp_scenario_builtin("paper:nothing", &s) == GP_ERR_INVALID_ARGUMENT);
  CHECK(s == nullptr);
  CHECK(std::string(gp_last_error()).find("nothing") != std::string::npos);
  CHECK(gp_scenario_builtin(nullptr, &s) == GP_ERR_INVALID_ARGUMENT);

  REQUIRE(gp_scenario_builtin("paper:2ibr-pei", &s) == GP_OK);
  CHECK(gp_scenario_ibr_count(s) == 2);
  CHECK(std::string(gp_scenario_ibr_name(s, 1)) == "ibr2");
  CHECK(gp_scenario_ibr_name(s, 2) == nullptr);

  char* text = nullptr;
  REQUIRE(gp_scenario_emit(s, &text) == GP_OK);
  gp_scenario* back = nullptr;
  CHECK(gp_scenario_parse(text, "emitted", &back) == GP_OK);
  gp_string_free(text);
  const char* id = nullptr;
  REQUIRE(gp_scenario_id(back, &id) == GP_OK);
  CHECK(std::string(id) == "paper:2ibr-pei");
  gp_scenario_free(back);

  CHECK(gp_scenario_parse("[scenario]\nid = x\nbogus = 1\n", "f.ini", &back) == GP_ERR_PARSE);
  CHECK(std::string(gp_last_error()).rfind("f.ini:3:", 0) == 0);

  double gamma = 0, peak = 0;
  CHECK(gp_l2gain_ibr(s, "ibr1", &gamma, &peak) == GP_OK);
  CHECK(gamma == doctest::Approx(4.43).epsilon(0.01));
  CHECK(gp_l2gain_ibr(s, "ibr9", &gamma, &peak) == GP_ERR_INVALID_ARGUMENT);
  gp_scenario_free(s);
}

TEST_CASE("C interface: gains and interface design") {
  const double A[] = {-2.0}, B[] = {1.0}, C[] = {1.0};
  double gamma = 0, peak = -1;
  REQUIRE(gp_l2gain_matrices(1, 1, 1, A, B, C, &gamma, &peak) == GP_OK);
  CHECK(gamma == doctest::Approx(0.5));
  const double U[] = {1.0};
  CHECK(gp_l2gain_matrices(1, 1, 1, U, B, C, &gamma, &peak) == GP_ERR_NOT_HURWITZ);

  double alpha, beta, sigma;
  REQUIRE(gp_design_pei(1.0, 1.0, 0.1, &alpha, &beta, &sigma) == GP_OK);
  CHECK(beta == doctest::Approx(1.1));
  int valid = 0;
  CHECK(gp_verify_pei(1.0, alpha, beta, 1.0, &valid, &sigma) == GP_OK);
  CHECK(valid == 1);
  CHECK(gp_design_pei(0.0, 1.0, 0.1, &alpha, &beta, &sigma) == GP_ERR_INVALID_ARGUMENT);
  CHECK(gp_verify_pei(1.0, 1.0, 1.0, 0.5, &valid, &sigma) == GP_OK);
  CHECK(valid == 0);
}

TEST_CASE("C interface: simulate, store and report") {
  gp_scenario* s = nullptr;
  REQUIRE(gp_scenario_builtin("paper:microgrid1", &s) == GP_OK);
  CHECK(gp_scenario_set_timing(s, 1e-5, 0.8) == GP_OK);
  gp_trajectory* t = nullptr;
  REQUIRE(gp_simulate(s, &t) == GP_OK);
  const size_t n = gp_trajectory_samples(t);
  CHECK(n > 1000);
  CHECK(gp_trajectory_time(t)[n - 1] == doctest::Approx(0.8));
  const double* iod = nullptr;
  CHECK(gp_trajectory_channel(t, "ibr1.i_od", &iod) == GP_OK);
  CHECK(gp_trajectory_channel(t, "nope", &iod) == GP_ERR_INVALID_ARGUMENT);
  CHECK(gp_trajectory_diverged(t, nullptr) == 0);

  const auto path = (std::filesystem::temp_directory_path() / "gridpass_capi_test.bin").string();
  REQUIRE(gp_trajectory_write(t, path.c_str(), GP_FORMAT_BINARY) == GP_OK);
  gp_trajectory* again = nullptr;
  REQUIRE(gp_trajectory_read(path.c_str(), &again) == GP_OK);
  CHECK(gp_trajectory_samples(again) == n);
  CHECK(gp_trajectory_channel_count(again) == gp_trajectory_channel_count(t));
  gp_trajectory_free(again);
  std::filesystem::remove(path);
  CHECK(gp_trajectory_read("/nonexistent/x.csv", &again) == GP_ERR_IO);

  gp_report* r = nullptr;
  REQUIRE(gp_certify(s, &r) == GP_OK);
  CHECK(gp_report_certified(r) == 0);  // no interface on the inverter
  REQUIRE(gp_report_analyze(r, s, t) == GP_OK);
  double ts = -1;
  CHECK(gp_report_settled(r, &ts) == 1);
  CHECK(ts < 0.1);
  CHECK(gp_report_growth(r) == 0);
  char* json = nullptr;
  REQUIRE(gp_report_render(r, GP_REPORT_JSON, &json) == GP_OK);
  CHECK(std::string(json).find("\"settled\": true") != std::string::npos);
  gp_string_free(json);
  gp_report_free(r);
  gp_trajectory_free(t);
  gp_scenario_free(s);

  gp_scenario_free(nullptr);
  gp_trajectory_free(nullptr);
  gp_report_free(nullptr);
}
