#include "shiftdiag/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "shiftdiag/error.hpp"
#include "shiftdiag/inference.hpp"
#include "shiftdiag/normal.hpp"
#include "shiftdiag/parallel.hpp"
#include "shiftdiag/regress.hpp"
#include "shiftdiag/selectadj.hpp"

namespace shiftdiag {

// Defined in oracle_table.cpp.
Truth oracle_table_entry(Setting setting, SubSetting sub);

namespace {

using Vec = std::vector<double>;

double gauss(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

using Effect = double (*)(const Vec&, const Vec&);

double delta_s1_linear(const Vec& x, const Vec& m) { return x[0] + m[0]; }
double delta_s1_quadratic(const Vec& x, const Vec& m) {
  return 1.1 * (x[0] + m[0] + x[0] * x[0] / 2.0 + m[0] * m[0] / 2.0);
}
double delta_s2_linear(const Vec& x, const Vec& m) { return x[0] + x[2] + m[0]; }
double delta_s2_quadratic(const Vec& x, const Vec& m) {
  return x[0] + x[2] * x[2] / 4.0 + m[0] * m[0];
}
double delta_s3_i(const Vec& x, const Vec&) { return x[0] + x[2] + x[0] * x[0] / 2.0; }
double delta_s3_ii(const Vec& x, const Vec&) { return x[0] + x[2] + 0.7; }
double delta_s3_iii(const Vec& x, const Vec&) { return 2.0 * x[0]; }

// Y = scale * T * delta(X, M) + sigma * N(0, 1).
void set_outcome(Population& pop, Effect delta, double scale, double sigma) {
  pop.mean = [delta, scale](const Vec& x, int t, const Vec& m) { return scale * t * delta(x, m); };
  pop.outcome = [delta, scale, sigma](Rng& rng, const Vec& x, int t, const Vec& m) {
    return scale * t * delta(x, m) + sigma * gauss(rng);
  };
}

Population standard_normals(std::size_t dx, std::size_t dm) {
  Population pop;
  pop.dim_x = dx;
  pop.dim_m = dm;
  pop.draw_x = [](Rng& rng, Vec& x) {
    for (double& v : x) v = gauss(rng);
  };
  pop.draw_m = [](Rng& rng, const Vec&, int, Vec& m) {
    for (double& v : m) v = gauss(rng);
  };
  return pop;
}

Population setting1_original(SubSetting sub) {
  Population pop;
  pop.dim_x = 1;
  pop.dim_m = 1;
  if (sub == SubSetting::kII) {
    pop.draw_x = [](Rng& rng, Vec& x) {
      const bool high = std::bernoulli_distribution(0.5)(rng);
      x[0] = gauss(rng, high ? 1.0 : 0.0);
    };
  } else {
    pop.draw_x = [](Rng& rng, Vec& x) { x[0] = gauss(rng, 0.5); };
  }
  pop.draw_m = [](Rng& rng, const Vec&, int, Vec& m) { m[0] = gauss(rng, 0.5); };
  return pop;
}

Population setting2_original(SubSetting sub) {
  Population pop;
  pop.dim_x = 4;
  pop.dim_m = 3;
  if (sub == SubSetting::kII) {
    pop.draw_x = [](Rng& rng, Vec& x) {
      const double i0 = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
      for (double& v : x) v = gauss(rng);
      x[0] += i0 / 2.0;
      x[1] -= i0 / 2.0;
    };
    pop.draw_m = [](Rng& rng, const Vec& x, int t, Vec& m) {
      for (double& v : m) v = gauss(rng);
      m[0] += t;
      m[1] += 0.5 * x[0] - 0.5;
    };
  } else {
    pop.draw_x = [](Rng& rng, Vec& x) {
      for (double& v : x) v = gauss(rng);
      x[0] += 0.5;
      x[1] -= 0.5;
    };
    const double shift1 = sub == SubSetting::kI ? 0.5 : 0.0;
    pop.draw_m = [shift1](Rng& rng, const Vec& x, int, Vec& m) {
      m[0] = gauss(rng, 0.0, 0.5) + x[0] / 2.0 + shift1;
      m[1] = gauss(rng, 0.0, 0.5) + x[0] / 2.0 - 0.5;
      m[2] = gauss(rng);
    };
  }
  return pop;
}

Effect setting_effect(Setting setting, SubSetting sub, bool original) {
  if (setting == Setting::kS1) return sub == SubSetting::kIII ? delta_s1_quadratic : delta_s1_linear;
  if (setting == Setting::kS3 && original) {
    switch (sub) {
      case SubSetting::kI: return delta_s3_i;
      case SubSetting::kII: return delta_s3_ii;
      case SubSetting::kIII: return delta_s3_iii;
    }
  }
  return sub == SubSetting::kIII ? delta_s2_quadratic : delta_s2_linear;
}

Scenario build_scenario(Setting setting, SubSetting sub, double scale, double sigma) {
  Scenario s;
  const Setting law = setting == Setting::kSel ? Setting::kS2 : setting;
  if (law == Setting::kS1) {
    s.original = setting1_original(sub);
    s.replication = standard_normals(1, 1);
    s.x_names = {"x"};
    s.m_names = {"m"};
    s.spec.covariate_moments = {{"x", Moment::kMean}};
    s.spec.mediator_moments = {{"m", Moment::kMean}};
  } else {
    s.original = setting2_original(sub);
    s.replication = standard_normals(4, 3);
    if (sub == SubSetting::kIII) {
      s.x_names = {"x1", "", "x3", ""};
      s.spec.covariate_moments = {{"x1", Moment::kMean}, {"x3", Moment::kMean}};
      s.spec.mediator_moments = {{"m1", Moment::kMeanAndSecondMoment},
                                 {"m2", Moment::kMeanAndSecondMoment}};
    } else {
      s.x_names = {"x1", "x2", "x3", ""};
      s.spec.covariate_moments = {{"x1", Moment::kMean}, {"x2", Moment::kMean}, {"x3", Moment::kMean}};
      s.spec.mediator_moments = {{"m1", Moment::kMean}, {"m2", Moment::kMean}};
    }
    s.m_names = {"m1", "m2", ""};
  }
  set_outcome(s.original, setting_effect(law, sub, true), scale, sigma);
  set_outcome(s.replication, setting_effect(law, sub, false), scale, sigma);
  s.spec.outcome_columns = {"y"};
  s.spec.treatment_column = "t";
  s.spec.regression_template = RegressionTemplate::kTTest;
  if (setting == Setting::kSel) s.spec.selection = SelectionSpec{"theta", 0.05};
  s.spec.validate();
  return s;
}

std::string sub_name(SubSetting sub) {
  switch (sub) {
    case SubSetting::kI: return "i";
    case SubSetting::kII: return "ii";
    case SubSetting::kIII: return "iii";
  }
  return "";
}

std::size_t fixed_n2(const DgpConfig& config) {
  if (const auto* f = std::get_if<FixedN2>(&config.sampling)) return f->n2;
  return 500;
}

PowerCalculated power_settings(const DgpConfig& config) {
  if (const auto* p = std::get_if<PowerCalculated>(&config.sampling)) return *p;
  return {};
}

struct ThetaFit {
  double theta = 0.0;
  double se = 0.0;
};

ThetaFit fit_theta(const StudyDataset& data, const AnalysisSpec& spec) {
  const StackedDesign design = build_design(data, spec);
  const FitResult fit = fit_wls(design);
  return {fit.theta, coefficient_se(design, fit, coefficient_index(design, "theta"))};
}

// Whether each method's intervals covered the truth, per component.
struct ReplicateOutcome {
  bool ok = false;
  std::string message;
  std::size_t n2 = 0;
  std::map<std::string, bool> covered;
};

bool covers(double lo, double hi, double truth) { return lo <= truth && truth <= hi; }

std::map<std::string, bool> unadjusted_coverage(const JackknifeResult& jk, const Truth& truth,
                                                double level) {
  std::map<std::string, bool> out;
  for (const auto& c : unadjusted_components(jk, level)) {
    if (c.name == kCovariateShift) out[c.name] = covers(c.ci_lo, c.ci_hi, truth.covariate_shift());
    if (c.name == kMediationShift) out[c.name] = covers(c.ci_lo, c.ci_hi, truth.mediation_shift());
    if (c.name == kResidual) out[c.name] = covers(c.ci_lo, c.ci_hi, truth.residual());
  }
  const ComponentEstimate obs = observed_estimate(jk, level);
  out[kObservedComponent] = covers(obs.ci_lo, obs.ci_hi, truth.observed());
  return out;
}

std::map<std::string, bool> adjusted_coverage(const JackknifeResult& jk, const Truth& truth,
                                              const AnalysisSpec& spec, double level) {
  const auto& vec = jk.estimates;
  const SelectionModel model =
      SelectionModel::make(spec.selection->alpha0, spec.selection->coefficient, vec.values[static_cast<Eigen::Index>(*vec.selection)]);
  const AdjustedDecomposition adj = adjust_for_selection(vec, jk.covariance, model, level);
  std::map<std::string, bool> out;
  for (const auto& c : adj.components) {
    if (c.name == kCovariateShift) out[c.name] = covers(c.ci_lo, c.ci_hi, truth.covariate_shift());
    if (c.name == kMediationShift) out[c.name] = covers(c.ci_lo, c.ci_hi, truth.mediation_shift());
    if (c.name == kResidual) out[c.name] = covers(c.ci_lo, c.ci_hi, truth.residual());
  }
  out[kObservedComponent] =
      covers(adj.discrepancy_estimate.ci_lo, adj.discrepancy_estimate.ci_hi, truth.observed());
  return out;
}

const std::array<const char*, 4> kCoverageComponents{kCovariateShift, kMediationShift, kResidual,
                                                     kObservedComponent};

}  // namespace

void DgpConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw ValidationError("nu must be nonnegative");
  if (n1 < 2) throw ValidationError("n1 must be at least 2");
  if (const auto* f = std::get_if<FixedN2>(&sampling); f && f->n2 < 2)
    throw ValidationError("n2 must be at least 2");
  if (const auto* p = std::get_if<PowerCalculated>(&sampling)) {
    if (!(p->shrink > 0.0)) throw ValidationError("shrink must be positive");
    if (!(p->power > 0.0 && p->power < 1.0)) throw ValidationError("power must lie in (0, 1)");
    if (!(p->alpha > 0.0 && p->alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  }
}

std::string DgpConfig::name() const {
  switch (setting) {
    case Setting::kS1: return "s1" + sub_name(sub);
    case Setting::kS2: return "s2" + sub_name(sub);
    case Setting::kS3: return "s3" + sub_name(sub);
    case Setting::kSel: return "sel_" + sub_name(sub);
  }
  return "";
}

void parse_setting(const std::string& text, DgpConfig& config) {
  static const std::map<std::string, SubSetting> subs{
      {"i", SubSetting::kI}, {"ii", SubSetting::kII}, {"iii", SubSetting::kIII}};
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::string rest;
  if (lower.rfind("sel_", 0) == 0) {
    config.setting = Setting::kSel;
    rest = lower.substr(4);
  } else if (lower.size() > 2 && lower[0] == 's' && lower[1] >= '1' && lower[1] <= '3') {
    config.setting = lower[1] == '1' ? Setting::kS1 : lower[1] == '2' ? Setting::kS2 : Setting::kS3;
    rest = lower.substr(2);
  }
  const auto it = subs.find(rest);
  if (it == subs.end()) throw ValidationError("unknown setting '" + text + "'");
  config.sub = it->second;
}

Method parse_method(const std::string& text) {
  if (text == "standard") return Method::kStandard;
  if (text == "power" || text == "power_calculated") return Method::kPowerCalculated;
  if (text == "selected_unadjusted") return Method::kSelectedUnadjusted;
  if (text == "selected_adjusted") return Method::kSelectedAdjusted;
  throw ValidationError("unknown method '" + text + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kStandard: return "standard";
    case Method::kPowerCalculated: return "power_calculated";
    case Method::kSelectedUnadjusted: return "selected_unadjusted";
    case Method::kSelectedAdjusted: return "selected_adjusted";
  }
  return "";
}

Scenario make_scenario(const DgpConfig& config) {
  config.validate();
  if (config.setting == Setting::kSel) return build_scenario(config.setting, config.sub, config.nu, 1.0);
  return build_scenario(config.setting, config.sub, 1.0, config.sigma);
}

Truth cached_truth(Setting setting, SubSetting sub) {
  return oracle_table_entry(setting == Setting::kSel ? Setting::kS2 : setting, sub);
}

Truth compute_truth(Setting setting, SubSetting sub, std::size_t draws, std::uint64_t seed) {
  const Setting law = setting == Setting::kSel ? Setting::kS2 : setting;
  return oracle_truth(build_scenario(law, sub, 1.0, 1.0), draws, seed);
}

Truth truth_for(const DgpConfig& config) {
  const Truth t = cached_truth(config.setting, config.sub);
  return config.setting == Setting::kSel ? t.scaled(config.nu) : t;
}

std::size_t power_n2(double theta_hat, double se_hat, std::size_t n1, double shrink, double power,
                     double alpha) {
  if (theta_hat == 0.0 || !std::isfinite(theta_hat))
    throw ValidationError("power calculation needs a nonzero effect estimate");
  if (!(se_hat > 0.0)) throw ValidationError("power calculation needs a positive standard error");
  const double kappa = se_hat * std::sqrt(static_cast<double>(n1));
  const double z = normal::quantile(1.0 - alpha / 2.0) + normal::quantile(power);
  const double target = shrink * std::abs(theta_hat);
  const double n = std::ceil(std::pow(kappa * z / target, 2.0));
  if (!(n < 1e15)) throw ValidationError("power calculation produced an unbounded sample size");
  return std::max<std::size_t>(2, static_cast<std::size_t>(n));
}

double treatment_z(const StudyDataset& data, const AnalysisSpec& spec) {
  const ThetaFit f = fit_theta(data, spec);
  return f.theta / f.se;
}

GeneratedPair generate_pair(const DgpConfig& config, std::uint64_t index) {
  const Scenario scenario = make_scenario(config);
  Rng rng = stream_rng(config.seed, index);
  GeneratedPair out;
  out.truth = truth_for(config);
  if (config.setting == Setting::kSel) {
    SelectedOriginal sel = generate_selected_original(config, rng);
    out.original = std::move(sel.original);
    out.attempts = sel.attempts;
    out.replication = draw_study(scenario, StudyRole::kReplication, sel.n2, rng);
    return out;
  }
  out.original = draw_study(scenario, StudyRole::kOriginal, config.n1, rng);
  const bool power = std::holds_alternative<PowerCalculated>(config.sampling);
  const Method method = power ? Method::kPowerCalculated : Method::kStandard;
  Rng rng2 = stream_rng(rng(), static_cast<std::uint64_t>(method));
  std::size_t n2 = fixed_n2(config);
  if (power) {
    const PowerCalculated pc = power_settings(config);
    const ThetaFit f = fit_theta(out.original, scenario.spec);
    n2 = power_n2(f.theta, f.se, config.n1, pc.shrink, pc.power, pc.alpha);
  }
  out.replication = draw_study(scenario, StudyRole::kReplication, n2, rng2);
  return out;
}

SelectedOriginal generate_selected_original(const DgpConfig& config, Rng& rng) {
  if (config.setting != Setting::kSel) throw ValidationError("selected sampling needs a SEL setting");
  const Scenario scenario = make_scenario(config);
  const double threshold = normal::quantile(1.0 - 0.05 / 2.0);
  SelectedOriginal out;
  while (out.attempts < kMaxSelectionAttempts) {
    ++out.attempts;
    StudyDataset d1 = draw_study(scenario, StudyRole::kOriginal, config.n1, rng);
    const ThetaFit f = fit_theta(d1, scenario.spec);
    if (std::abs(f.theta / f.se) > threshold) {
      out.n2 = power_n2(f.theta, f.se, config.n1, 0.9, 0.8, 0.05);
      out.original = std::move(d1);
      return out;
    }
  }
  throw ValidationError("no significant original study after " +
                        std::to_string(kMaxSelectionAttempts) + " attempts");
}

const ComponentCoverage& CoverageReport::component(const std::string& name) const {
  for (const auto& c : components)
    if (c.component == name) return c;
  throw ValidationError("coverage report has no component '" + name + "'");
}

nlohmann::json CoverageReport::to_json() const {
  nlohmann::json j;
  j["setting"] = config.name();
  j["sigma"] = config.sigma;
  j["nu"] = config.nu;
  j["n1"] = config.n1;
  j["seed"] = config.seed;
  j["method"] = to_string(method);
  j["level"] = level;
  j["requested"] = requested;
  j["failures"] = failures;
  j["mean_n2"] = mean_n2;
  j["components"] = nlohmann::json::array();
  for (const auto& c : components)
    j["components"].push_back(
        {{"component", c.component}, {"coverage", c.coverage}, {"sd", c.sd}, {"replicates", c.replicates}});
  j["failure_messages"] = failure_messages;
  return j;
}

std::string CoverageReport::to_csv(bool header) const {
  std::ostringstream os;
  os.precision(17);
  if (header) os << "setting,sigma,nu,method,component,coverage,sd,replicates,mean_n2\n";
  for (const auto& c : components)
    os << config.name() << ',' << config.sigma << ',' << config.nu << ',' << to_string(method) << ','
       << c.component << ',' << c.coverage << ',' << c.sd << ',' << c.replicates << ',' << mean_n2
       << '\n';
  return os.str();
}

std::vector<CoverageReport> run_coverage(const DgpConfig& config, const std::vector<Method>& methods,
                                         std::size_t reps, double level,
                                         const CoverageOptions& options) {
  config.validate();
  if (reps < 1) throw ValidationError("reps must be at least 1");
  if (methods.empty()) throw ValidationError("no coverage method requested");
  const bool selected = config.setting == Setting::kSel;
  for (Method m : methods) {
    const bool sel_method = m == Method::kSelectedUnadjusted || m == Method::kSelectedAdjusted;
    if (sel_method != selected)
      throw ValidationError("method " + to_string(m) + " does not apply to setting " + config.name());
  }
  const Scenario scenario = make_scenario(config);
  const Truth truth = truth_for(config);

  // outcomes[method][replicate]
  std::vector<std::vector<ReplicateOutcome>> outcomes(methods.size(),
                                                      std::vector<ReplicateOutcome>(reps));
  parallel_for(reps, options.threads, [&](std::size_t rep) {
    Rng rng = stream_rng(config.seed, rep);
    auto record_failure = [&](std::size_t mi, const std::string& msg, std::size_t n2) {
      outcomes[mi][rep].ok = false;
      outcomes[mi][rep].message = msg;
      outcomes[mi][rep].n2 = n2;
    };
    if (selected) {
      std::size_t n2 = 0;
      try {
        const SelectedOriginal sel = generate_selected_original(config, rng);
        n2 = sel.n2;
        const StudyDataset d2 = draw_study(scenario, StudyRole::kReplication, sel.n2, rng);
        const JackknifeResult jk = jackknife_covariance(sel.original, d2, scenario.spec);
        if (!jk.full.mediation_shift) throw InfeasibleError("mediator balancing infeasible", "mediators");
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
          try {
            ReplicateOutcome& o = outcomes[mi][rep];
            o.n2 = n2;
            o.covered = methods[mi] == Method::kSelectedAdjusted
                            ? adjusted_coverage(jk, truth, scenario.spec, level)
                            : unadjusted_coverage(jk, truth, level);
            o.ok = true;
          } catch (const Error& e) {
            record_failure(mi, e.what(), n2);
          }
        }
      } catch (const Error& e) {
        for (std::size_t mi = 0; mi < methods.size(); ++mi) record_failure(mi, e.what(), n2);
      }
      return;
    }
    // Every non-selected method sees the same original study; the
    // replication is drawn from a per-method sub-stream.
    const StudyDataset d1 = draw_study(scenario, StudyRole::kOriginal, config.n1, rng);
    const std::uint64_t sub_seed = rng();
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      Rng rng2 = stream_rng(sub_seed, static_cast<std::uint64_t>(methods[mi]));
      std::size_t n2 = fixed_n2(config);
      try {
        if (methods[mi] == Method::kPowerCalculated) {
          const PowerCalculated pc = power_settings(config);
          const ThetaFit f = fit_theta(d1, scenario.spec);
          n2 = power_n2(f.theta, f.se, config.n1, pc.shrink, pc.power, pc.alpha);
        }
        const StudyDataset d2 = draw_study(scenario, StudyRole::kReplication, n2, rng2);
        const JackknifeResult jk = jackknife_covariance(d1, d2, scenario.spec);
        if (!jk.full.mediation_shift) throw InfeasibleError("mediator balancing infeasible", "mediators");
        ReplicateOutcome& o = outcomes[mi][rep];
        o.n2 = n2;
        o.covered = unadjusted_coverage(jk, truth, level);
        o.ok = true;
      } catch (const Error& e) {
        record_failure(mi, e.what(), n2);
      }
    }
  });

  std::vector<CoverageReport> reports;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    CoverageReport r;
    r.config = config;
    r.method = methods[mi];
    r.level = level;
    r.requested = reps;
    double n2_sum = 0.0;
    std::size_t n2_count = 0;
    std::map<std::string, std::size_t> hits;
    std::size_t ok = 0;
    for (const auto& o : outcomes[mi]) {
      if (o.n2 > 0) {
        n2_sum += static_cast<double>(o.n2);
        ++n2_count;
      }
      if (!o.ok) {
        ++r.failures;
        if (r.failure_messages.size() < 20) r.failure_messages.push_back(o.message);
        continue;
      }
      ++ok;
      for (const auto& [name, c] : o.covered) hits[name] += c ? 1 : 0;
    }
    r.mean_n2 = n2_count ? n2_sum / static_cast<double>(n2_count) : 0.0;
    for (const char* name : kCoverageComponents) {
      ComponentCoverage c;
      c.component = name;
      c.replicates = ok;
      c.coverage = ok ? static_cast<double>(hits[name]) / static_cast<double>(ok) : 0.0;
      c.sd = ok ? std::sqrt(c.coverage * (1.0 - c.coverage) / static_cast<double>(ok)) : 0.0;
      r.components.push_back(c);
    }
    if (static_cast<double>(r.failures) > options.max_failure_fraction * static_cast<double>(reps))
      throw InfeasibleError(to_string(methods[mi]) + ": " + std::to_string(r.failures) + " of " +
                                std::to_string(reps) + " replicates failed" +
                                (r.failure_messages.empty() ? "" : " (first: " + r.failure_messages[0] + ")"),
                            "replicates");
    reports.push_back(std::move(r));
  }
  return reports;
}

CoverageReport run_coverage(const DgpConfig& config, Method method, std::size_t reps, double level,
                            const CoverageOptions& options) {
  return run_coverage(config, std::vector<Method>{method}, reps, level, options).front();
}

}  // namespace shiftdiag
