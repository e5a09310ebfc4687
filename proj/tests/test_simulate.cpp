#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "shiftdiag/error.hpp"
#include "shiftdiag/normal.hpp"
#include "shiftdiag/simulate.hpp"

using namespace shiftdiag;

namespace {

DgpConfig config_for(const std::string& name, double sigma = 1.0) {
  DgpConfig c;
  parse_setting(name, c);
  c.sigma = sigma;
  return c;
}

double column_mean(const StudyDataset& d, const std::string& name) {
  double s = 0;
  for (double v : d.column(name).values) s += v;
  return s / static_cast<double>(d.n());
}

double arm_mean(const StudyDataset& d, const std::string& name, int arm) {
  double s = 0, n = 0;
  const auto& v = d.column(name).values;
  for (std::size_t i = 0; i < d.n(); ++i)
    if (d.treatment()[i] == arm) {
      s += v[i];
      n += 1;
    }
  return s / n;
}

}  // namespace

TEST_CASE("power-calculated replication size") {
  // kappa = se * sqrt(n1) = 1.
  CHECK(power_n2(1.0, 0.1, 100, 0.9, 0.9, 0.05) == 13);
  CHECK(power_n2(-1.0, 0.1, 100, 0.9, 0.9, 0.05) == 13);
  CHECK(power_n2(1.0, 0.1, 100, 0.9, 0.8, 0.05) == 10);
  const double z = normal::quantile(0.975) + normal::quantile(0.9);
  const double raw = std::pow(3.0 * z / (0.9 * 0.7), 2);
  CHECK(power_n2(0.7, 3.0 / std::sqrt(500.0), 500, 0.9, 0.9, 0.05) ==
        static_cast<std::size_t>(std::ceil(raw)));
  CHECK(power_n2(1e9, 0.1, 100, 0.9, 0.9, 0.05) == 2);
  CHECK_THROWS_AS(power_n2(0.0, 0.1, 100, 0.9, 0.9, 0.05), ValidationError);
}

TEST_CASE("setting names round trip") {
  for (const std::string name : {"s1i", "s1ii", "s1iii", "s2i", "s2ii", "s2iii", "s3i", "s3ii",
                                 "s3iii", "sel_i", "sel_ii", "sel_iii"}) {
    CHECK(config_for(name).name() == name);
  }
  DgpConfig c;
  CHECK_THROWS_AS(parse_setting("s4i", c), ValidationError);
  CHECK(parse_method("power") == Method::kPowerCalculated);
  CHECK(parse_method("selected_adjusted") == Method::kSelectedAdjusted);
  CHECK(to_string(Method::kStandard) == "standard");
  CHECK_THROWS_AS(parse_method("bootstrap"), ValidationError);
  c.sigma = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.sigma = 1.0;
  c.n1 = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("checked-in oracle table equals a fresh oracle run") {
  for (Setting s : {Setting::kS1, Setting::kS2, Setting::kS3})
    for (SubSetting sub : {SubSetting::kI, SubSetting::kII, SubSetting::kIII}) {
      const Truth cached = cached_truth(s, sub);
      const Truth fresh = compute_truth(s, sub);
      CHECK(cached.theta_original == fresh.theta_original);
      CHECK(cached.theta_replication == fresh.theta_replication);
      CHECK(cached.theta_covariate_weighted == fresh.theta_covariate_weighted);
      CHECK(cached.theta_mediator_weighted == fresh.theta_mediator_weighted);
    }
}

TEST_CASE("S1(i) truth agrees with the analytic values") {
  // delta = x + m with unit-variance x, m under every coupled law; each
  // component difference has Monte Carlo SE sqrt(2/N + 2/N).
  const Truth t = cached_truth(Setting::kS1, SubSetting::kI);
  const double se = std::sqrt(4.0 / static_cast<double>(kOracleDraws));
  CHECK(std::abs(t.covariate_shift() - 0.5) < 3 * se);
  CHECK(std::abs(t.mediation_shift() - 0.5) < 3 * se);
  CHECK(std::abs(t.residual()) < 3 * se);
  CHECK(std::abs(t.observed() - 1.0) < 3 * se);
}

TEST_CASE("S3 has a nontrivial residual") {
  for (SubSetting sub : {SubSetting::kI, SubSetting::kII, SubSetting::kIII})
    CHECK(std::abs(cached_truth(Setting::kS3, sub).residual()) > 0.05);
}

TEST_CASE("truth does not depend on the noise scale") {
  for (const std::string name : {"s1iii", "s2ii", "s3i"}) {
    const Truth a = oracle_truth(make_scenario(config_for(name, 1.0)), 20000, 9);
    const Truth b = oracle_truth(make_scenario(config_for(name, 3.0)), 20000, 9);
    CHECK(a.theta_original == b.theta_original);
    CHECK(a.theta_replication == b.theta_replication);
    CHECK(a.theta_covariate_weighted == b.theta_covariate_weighted);
    CHECK(a.theta_mediator_weighted == b.theta_mediator_weighted);
    CHECK(truth_for(config_for(name, 1.0)).residual() == truth_for(config_for(name, 3.0)).residual());
  }
  DgpConfig sel = config_for("sel_ii");
  sel.nu = 0.2;
  CHECK(truth_for(sel).observed() ==
        doctest::Approx(0.2 * cached_truth(Setting::kS2, SubSetting::kII).observed()));
}

TEST_CASE("simulated covariates and mediators follow their laws") {
  const std::size_t n = 40000;
  const double tol = 4.0 / std::sqrt(static_cast<double>(n));
  struct Expect {
    std::string setting;
    std::map<std::string, double> original;
  };
  // Replication laws are standard normal throughout.
  const std::vector<Expect> cases = {
      {"s1i", {{"x", 0.5}, {"m", 0.5}}},
      {"s1ii", {{"x", 0.5}, {"m", 0.5}}},
      {"s2i", {{"x1", 0.5}, {"x2", -0.5}, {"x3", 0.0}, {"m1", 0.75}, {"m2", -0.25}}},
      {"s2ii", {{"x1", 0.25}, {"x2", -0.25}, {"x3", 0.0}, {"m1", 0.5}, {"m2", -0.375}}},
      {"s2iii", {{"x1", 0.5}, {"x3", 0.0}, {"m1", 0.25}, {"m2", -0.25}}},
  };
  for (const auto& c : cases) {
    const Scenario sc = make_scenario(config_for(c.setting));
    Rng rng = stream_rng(61, 0);
    const auto d1 = draw_study(sc, StudyRole::kOriginal, n, rng);
    const auto d2 = draw_study(sc, StudyRole::kReplication, n, rng);
    for (const auto& [name, mean] : c.original) {
      CAPTURE(c.setting);
      CAPTURE(name);
      CHECK(std::abs(column_mean(d1, name) - mean) < tol);
      CHECK(std::abs(column_mean(d2, name)) < tol);
    }
    double treated = 0;
    for (int t : d1.treatment()) treated += t;
    CHECK(std::abs(treated / static_cast<double>(n) - 0.5) < tol);
  }
  // S2(ii): the first mediator moves with treatment.
  const Scenario sc = make_scenario(config_for("s2ii"));
  Rng rng = stream_rng(62, 0);
  const auto d = draw_study(sc, StudyRole::kOriginal, n, rng);
  CHECK(std::abs(arm_mean(d, "m1", 1) - arm_mean(d, "m1", 0) - 1.0) < 2 * 4.0 / std::sqrt(n / 2.0));
}

TEST_CASE("replicate draws are reproducible") {
  DgpConfig c = config_for("s2i");
  const auto a = generate_pair(c, 3);
  const auto b = generate_pair(c, 3);
  const auto other = generate_pair(c, 4);
  CHECK(a.original == b.original);
  CHECK(a.replication == b.replication);
  CHECK_FALSE(a.original == other.original);
  CHECK(a.original.n() == 500);
  CHECK(a.replication.n() == 500);
  c.sampling = FixedN2{120};
  CHECK(generate_pair(c, 3).replication.n() == 120);
  CHECK(generate_pair(c, 3).original == a.original);
}

TEST_CASE("power-calculated sampling sizes the replication from the original") {
  DgpConfig c = config_for("s1i");
  c.sampling = PowerCalculated{};
  const auto pair = generate_pair(c, 0);
  const double z = treatment_z(pair.original, make_scenario(c).spec);
  CHECK(pair.replication.n() >= 2);
  DgpConfig fixed = c;
  fixed.sampling = FixedN2{};
  CHECK(generate_pair(fixed, 0).original == pair.original);
  CHECK(std::isfinite(z));
}

TEST_CASE("selection acceptance") {
  DgpConfig c = config_for("sel_ii");
  c.nu = 0.0;
  Rng rng = stream_rng(63, 0);
  std::size_t attempts = 0, accepted = 0;
  const double thr = normal::quantile(0.975);
  while (attempts < 10000) {
    const auto sel = generate_selected_original(c, rng);
    attempts += sel.attempts;
    ++accepted;
    CHECK(std::abs(treatment_z(sel.original, make_scenario(c).spec)) > thr);
  }
  const double rate = static_cast<double>(accepted) / static_cast<double>(attempts);
  MESSAGE("null acceptance rate " << rate << " over " << attempts << " attempts");
  CHECK(std::abs(rate - 0.05) <= 0.01);

  c.nu = 1.0;
  std::size_t total = 0;
  for (int i = 0; i < 50; ++i) total += generate_selected_original(c, rng).attempts;
  CHECK(total <= 52);

  DgpConfig plain = config_for("s1i");
  CHECK_THROWS_AS(generate_selected_original(plain, rng), ValidationError);
}

TEST_CASE("single-replicate coverage is a Bernoulli draw") {
  DgpConfig c = config_for("s1i");
  c.seed = 5;
  const auto r = run_coverage(c, Method::kStandard, 1, 0.90);
  CHECK(r.requested == 1);
  CHECK(r.components.size() == 4);
  for (const auto& comp : r.components) {
    CHECK((comp.coverage == 0.0 || comp.coverage == 1.0));
    CHECK(comp.replicates == 1);
  }
  CHECK(r.mean_n2 == 500.0);
  const std::string csv = r.to_csv();
  CHECK(csv.rfind("setting,sigma,nu,method,component,coverage,sd,replicates,mean_n2\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(r.to_json()["method"] == "standard");
}

TEST_CASE("failed replicates above the cap raise an error") {
  DgpConfig s = config_for("s2ii");
  s.seed = 9;
  s.sampling = PowerCalculated{};
  CHECK_THROWS_AS(run_coverage(s, Method::kPowerCalculated, 8, 0.9), InfeasibleError);
}

TEST_CASE("coverage reports do not depend on the thread count") {
  DgpConfig c = config_for("sel_i");
  c.nu = 0.2;
  c.seed = 8;
  CoverageOptions one, three;
  three.threads = 3;
  const auto a = run_coverage(c, {Method::kSelectedUnadjusted, Method::kSelectedAdjusted}, 6, 0.90, one);
  const auto b = run_coverage(c, {Method::kSelectedUnadjusted, Method::kSelectedAdjusted}, 6, 0.90, three);
  REQUIRE(a.size() == 2);
  CHECK(a[0].to_json() == b[0].to_json());
  CHECK(a[1].to_json() == b[1].to_json());
  CHECK(a[0].mean_n2 == a[1].mean_n2);

  DgpConfig s = config_for("s2ii");
  s.seed = 9;
  s.sampling = PowerCalculated{};
  // Small power-calculated replications sometimes cannot balance the mediators.
  one.max_failure_fraction = three.max_failure_fraction = 1.0;
  const auto p1 = run_coverage(s, Method::kPowerCalculated, 8, 0.9, one);
  const auto p3 = run_coverage(s, Method::kPowerCalculated, 8, 0.9, three);
  CHECK(p1.to_json() == p3.to_json());
  CHECK(p1.failures == p1.failure_messages.size());
  CHECK(p1.components[0].replicates == 8 - p1.failures);
}
