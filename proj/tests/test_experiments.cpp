#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "oscint/experiments.hpp"
#include "oscint/io.hpp"

using namespace oscint;

namespace {

// Statistical sweeps only need order-of-magnitude values; the coarse spec
// keeps them affordable in the test budget.
QuadSpec coarse() { return {1e-1, 1e-3, 1l << 20, 16}; }

double metric(const ExperimentResult& r, const std::string& name) {
  auto it = r.metrics.find(name);
  REQUIRE(it != r.metrics.end());
  return it->second;
}

}  // namespace

TEST_CASE("line fit recovers an exact line") {
  std::vector<double> x{0, 1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v + 2.0);
  LinFit f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(3.0));
  CHECK(f.intercept == doctest::Approx(2.0));
  CHECK(f.r2 == doctest::Approx(1.0));
}

TEST_CASE("line fit flags degenerate input") {
  CHECK_THROWS_AS(fit_line({1.0}, {2.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_line({1.0, 2.0}, {2.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_line({2.0, 2.0, 2.0}, {1.0, 2.0, 3.0}),
                  std::invalid_argument);
}

TEST_CASE("line fit r2 drops for scatter") {
  LinFit f = fit_line({0, 1, 2, 3}, {0, 1, 0, 1});
  CHECK(f.r2 < 0.6);
  // flat data against sloped x: slope ~0, r2 exactly 1 only for syy == 0
  LinFit g = fit_line({0, 1, 2, 3}, {5, 5, 5, 5});
  CHECK(g.slope == doctest::Approx(0.0));
  CHECK(g.r2 == doctest::Approx(1.0));
}

TEST_CASE("spearman correlation on monotone and tied data") {
  CHECK(spearman_rho({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman_rho({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
  // monotone up to ties stays strongly but not perfectly correlated
  double rho = spearman_rho({1, 2, 2, 3}, {1, 2, 3, 4});
  CHECK(rho > 0.90);
  CHECK(rho < 1.0);
  CHECK(spearman_rho({5, 5, 5}, {1, 2, 3}) == doctest::Approx(0.0));
}

TEST_CASE("smallest admissible coarse scale per separation factor") {
  CHECK(q_min_for(2.0) == 3);
  CHECK(q_min_for(3.0) == 4);
  CHECK(q_min_for(4.0) == 4);
  CHECK(q_min_for(8.0) == 5);
  CHECK_THROWS_AS(q_min_for(1.5), std::invalid_argument);
}

TEST_CASE("shortest representation formatting and csv layout") {
  CHECK(format_g17(0.5) == "0.5");
  CHECK(format_g17(0.1) == "0.10000000000000001");
  CHECK(format_g17(std::nan("")) == "nan");
  CHECK(format_g17(-INFINITY) == "-inf");

  ExperimentResult r;
  r.rows.push_back({"only", 1.0, 2.5, 0.0});
  r.rows.push_back({"only", 2.0, 5.0, 0.125});
  CHECK(csv_text(r) == "param,value,err\n1,2.5,0\n2,5,0.125\n");

  r.rows.push_back({"other", 1.0, -1.0, 0.0});
  r.param_name = "m";
  r.value_name = "mass";
  CHECK(csv_text(r) ==
        "series,m,mass,err\nonly,1,2.5,0\nonly,2,5,0.125\nother,1,-1,0\n");
}

TEST_CASE("experiment artifacts round-trip through disk") {
  ExperimentResult r;
  r.name = "unit";
  r.seed = 9;
  r.params["alpha"] = "1,2";
  r.metrics["score"] = 0.75;
  r.rows.push_back({"s", 1.0, 2.0, 0.0});
  auto dir = std::filesystem::temp_directory_path() / "oscint_io_test";
  std::filesystem::remove_all(dir);
  std::string csv = write_experiment(r, QuadSpec{}, dir.string(), "unit-9");

  std::ifstream f(csv, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  CHECK(bytes == csv_text(r));

  std::ifstream mf(dir / "unit-9.meta.json");
  nlohmann::json meta = nlohmann::json::parse(mf);
  CHECK(meta["experiment"] == "unit");
  CHECK(meta["seed"] == 9);
  CHECK(meta["params"]["alpha"] == "1,2");
  CHECK(meta["metrics"]["score"] == 0.75);
  CHECK(meta["quad"]["rel_tol"] == QuadSpec{}.rel_tol);
  std::filesystem::remove_all(dir);
}

TEST_CASE("no-decay mass at the base scale" * doctest::timeout(120)) {
  ExperimentResult r = run_no_decay({3}, QuadSpec{});
  REQUIRE(r.converged);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].param == 3.0);
  // frozen from a 200k-node dense evaluation of the same integral
  CHECK(r.rows[0].value == doctest::Approx(2.1530).epsilon(2e-3));
  CHECK(metric(r, "min_ratio") == doctest::Approx(1.0));
  CHECK(metric(r, "tail_bound_max") < 0.02);

  // starting the integration closer in can only add mass
  ExperimentResult milder = run_no_decay({3}, QuadSpec{}, 1);
  REQUIRE(milder.converged);
  CHECK(milder.rows[0].value > r.rows[0].value);
}

TEST_CASE("no-decay input validation") {
  CHECK_THROWS_AS(run_no_decay({}, QuadSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(run_no_decay({0}, QuadSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(run_no_decay({3}, QuadSpec{}, 3), std::invalid_argument);
}

TEST_CASE("necessity mass grows with the exponent" * doctest::timeout(300)) {
  ExperimentResult r =
      run_necessity(2, 1, {4, 6, 8}, NecessityMode::reduced, QuadSpec{});
  REQUIRE(r.converged);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].value > 0.0);
  CHECK(r.rows[1].value > r.rows[0].value);
  CHECK(r.rows[2].value > r.rows[1].value);
  CHECK(metric(r, "slope") > 0.08);
  CHECK(metric(r, "slope") < 0.30);
  CHECK(metric(r, "r2") > 0.9);
}

TEST_CASE("necessity full check stays in the reduction window" *
          doctest::timeout(300)) {
  ExperimentResult r =
      run_necessity(2, 1, {4, 5}, NecessityMode::full_check, QuadSpec{});
  REQUIRE(r.converged);
  CHECK(metric(r, "ratio_min") >= 0.98);
  CHECK(metric(r, "ratio_max") <= 8.5);
}

TEST_CASE("necessity input validation") {
  CHECK_THROWS_AS(run_necessity(1, 1, {4}, NecessityMode::reduced, QuadSpec{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_necessity(2, 1, {}, NecessityMode::reduced, QuadSpec{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_necessity(2, 1, {0}, NecessityMode::reduced, QuadSpec{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      run_necessity(2, 1, {4}, NecessityMode::reduced, QuadSpec{}, 9.0),
      std::invalid_argument);
}

TEST_CASE("profile transform bounds" * doctest::timeout(120)) {
  ExperimentResult r = run_ftb_checks(QuadSpec{});
  REQUIRE(r.converged);
  CHECK(metric(r, "closed_form_max_err") < 1e-12);
  // both constants sit just under the analytic small-argument limit 1/4
  CHECK(metric(r, "c1") == doctest::Approx(0.24995).epsilon(2e-3));
  CHECK(metric(r, "c2") > 0.245);
  CHECK(metric(r, "c2") < 0.2501);
  CHECK(metric(r, "violations") == 0.0);
}

TEST_CASE("sufficiency sweep rejects unsuitable inputs") {
  SupportSet good{{2, 2}};
  SupportSet linear{{1, 0}};
  SupportSet mixed{{1, 2}, {0, 4}};
  QuadSpec s = coarse();
  CHECK_THROWS_WITH_AS(run_sufficiency_sweep(linear, 2.0, 1, 0, 0, 3, 1, s),
                       doctest::Contains("uniformity"),
                       std::invalid_argument);
  CHECK_THROWS_AS(run_sufficiency_sweep(mixed, 2.0, 1, 0, 0, 3, 1, s),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_sufficiency_sweep(good, 1.5, 1, 0, 0, 3, 1, s),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_sufficiency_sweep(good, 2.0, 0, 0, 0, 3, 1, s),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_sufficiency_sweep(good, 2.0, 1, 1.0, -1.0, 3, 1, s),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_sufficiency_sweep(good, 2.0, 1, 0, 0, 2, 1, s),
                  std::invalid_argument);
}

TEST_CASE("sufficiency sweep is deterministic in the seed" *
          doctest::timeout(600)) {
  SupportSet delta{{2, 2}};
  QuadSpec s = coarse();
  ExperimentResult a =
      run_sufficiency_sweep(delta, 2.0, 2, -2.0, 2.0, 3, 4242, s);
  REQUIRE(a.rows.size() == 6);  // three series per trial
  for (const ExpRow& row : a.rows)
    if (row.series == "l1") {
      CHECK(row.value >= 0.0);
      CHECK(std::isfinite(row.value));
    }
  CHECK(metric(a, "l1_max") >= metric(a, "l1_median"));
  CHECK(metric(a, "l1_median") > 0.0);

  ExperimentResult b =
      run_sufficiency_sweep(delta, 2.0, 2, -2.0, 2.0, 3, 4242, s);
  CHECK(csv_text(a) == csv_text(b));
  ExperimentResult c =
      run_sufficiency_sweep(delta, 2.0, 2, -2.0, 2.0, 3, 77, s);
  CHECK(csv_text(a) != csv_text(c));
}

TEST_CASE("contrast masses grow as the coefficients shrink" *
          doctest::timeout(600)) {
  ExperimentResult r = run_contrast_sweep(2.0, 1, {2, 3}, 7, coarse());
  REQUIRE(r.converged);
  CHECK(metric(r, "ricci_stein") == 1.0);
  CHECK(metric(r, "h1_uniform") == 0.0);
  REQUIRE(r.rows.size() >= 2);
  CHECK(r.rows[0].value > 0.0);
  CHECK(r.rows[1].value > r.rows[0].value);
  CHECK(metric(r, "last_over_first") > 1.0);
}

TEST_CASE("contrast sweep input validation") {
  CHECK_THROWS_AS(run_contrast_sweep(2.0, 1, {1}, 7, coarse()),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_contrast_sweep(1.0, 1, {3}, 7, coarse()),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_contrast_sweep(2.0, 0, {3}, 7, coarse()),
                  std::invalid_argument);
}

TEST_CASE("l2 decay: power estimate under the row-sum bound" *
          doctest::timeout(600)) {
  SupportSet delta{{0, 3}};
  ExperimentResult r =
      run_l2_decay(delta, {0, 3}, {{0, 3}}, {0, 4}, 32, coarse());
  REQUIRE(r.converged);
  CHECK(metric(r, "max_power_over_schur") <= 1.0);
  CHECK(metric(r, "max_step_ratio") < 1.1);
  for (const ExpRow& row : r.rows)
    if (row.series == "power") CHECK(row.value > 0.0);
  CHECK(metric(r, "delta_fit") > 0.0);
}

TEST_CASE("l2 decay input validation") {
  SupportSet delta{{0, 3}};
  CHECK_THROWS_AS(run_l2_decay(delta, {1, 2}, {{0, 3}}, {0}, 32, coarse()),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_l2_decay(delta, {0, 3}, {}, {0}, 32, coarse()),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_l2_decay(delta, {0, 3}, {{3, 0}}, {0}, 32, coarse()),
                  std::invalid_argument);
}
