#include "shiftdiag/population.hpp"

#include <cmath>
#include <sstream>

#include "shiftdiag/csv.hpp"
#include "shiftdiag/error.hpp"

namespace shiftdiag {

Truth Truth::scaled(double factor) const {
  return {theta_original * factor, theta_replication * factor, theta_covariate_weighted * factor,
          theta_mediator_weighted * factor};
}

Truth oracle_truth(const Scenario& scenario, std::size_t draws, std::uint64_t seed) {
  const Population& p = scenario.original;
  const Population& q = scenario.replication;
  auto estimand = [&](const Population& xs, const Population& ms, const Population& ys,
                      std::uint64_t stream) {
    Rng rng = stream_rng(seed, stream);
    std::vector<double> x(xs.dim_x), m1(ms.dim_m), m0(ms.dim_m);
    long double sum = 0.0L;
    for (std::size_t i = 0; i < draws; ++i) {
      xs.draw_x(rng, x);
      ms.draw_m(rng, x, 1, m1);
      ms.draw_m(rng, x, 0, m0);
      sum += ys.mean(x, 1, m1) - ys.mean(x, 0, m0);
    }
    return static_cast<double>(sum / static_cast<long double>(draws));
  };
  Truth t;
  t.theta_original = estimand(p, p, p, 0);
  t.theta_replication = estimand(q, q, q, 1);
  t.theta_covariate_weighted = estimand(p, q, q, 2);
  t.theta_mediator_weighted = estimand(p, p, q, 3);
  return t;
}

StudyDataset draw_study(const Scenario& scenario, StudyRole role, std::size_t n, Rng& rng) {
  const Population& pop = role == StudyRole::kOriginal ? scenario.original : scenario.replication;
  std::bernoulli_distribution coin(0.5);
  std::vector<int> treatment(n);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), 1);
  std::vector<std::vector<double>> xs(pop.dim_x, std::vector<double>(n));
  std::vector<std::vector<double>> ms(pop.dim_m, std::vector<double>(n));
  std::vector<double> x(pop.dim_x), m(pop.dim_m);
  for (std::size_t i = 0; i < n; ++i) {
    pop.draw_x(rng, x);
    const int t = coin(rng) ? 1 : 0;
    pop.draw_m(rng, x, t, m);
    treatment[i] = t;
    y(static_cast<Eigen::Index>(i), 0) = pop.outcome(rng, x, t, m);
    for (std::size_t k = 0; k < pop.dim_x; ++k) xs[k][i] = x[k];
    for (std::size_t k = 0; k < pop.dim_m; ++k) ms[k][i] = m[k];
  }
  auto make = [](const std::string& name, std::vector<double> v, bool categorical) {
    Column c;
    c.name = name;
    c.categorical = categorical;
    if (categorical) {
      c.levels = {"0", "1"};
      c.codes.reserve(v.size());
      for (double e : v) c.codes.push_back(e != 0.0 ? 1 : 0);
    } else {
      c.values = std::move(v);
    }
    return c;
  };
  std::vector<Column> cov, med;
  for (std::size_t k = 0; k < pop.dim_x; ++k)
    if (!scenario.x_names[k].empty()) cov.push_back(make(scenario.x_names[k], std::move(xs[k]), false));
  for (std::size_t k = 0; k < pop.dim_m; ++k) {
    if (scenario.m_names[k].empty()) continue;
    const bool cat = k < scenario.m_categorical.size() && scenario.m_categorical[k];
    med.push_back(make(scenario.m_names[k], std::move(ms[k]), cat));
  }
  return StudyDataset(role, std::move(treatment), std::move(y), std::move(cov), std::move(med));
}

std::string dataset_to_csv(const StudyDataset& data, const AnalysisSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  std::vector<const Column*> cols;
  for (const auto& c : data.covariates()) cols.push_back(&c);
  for (const auto& c : data.mediators()) cols.push_back(&c);
  bool first = true;
  auto sep = [&]() {
    if (!first) os << ',';
    first = false;
  };
  for (const auto& name : spec.outcome_columns) {
    sep();
    os << csv_escape(name);
  }
  sep();
  os << csv_escape(spec.treatment_column);
  for (const Column* c : cols) {
    sep();
    os << csv_escape(c->name);
  }
  os << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    first = true;
    for (Eigen::Index k = 0; k < data.outcomes().cols(); ++k) {
      sep();
      os << data.outcomes()(static_cast<Eigen::Index>(i), k);
    }
    sep();
    os << data.treatment()[i];
    for (const Column* c : cols) {
      sep();
      if (c->categorical)
        os << csv_escape(c->levels[static_cast<std::size_t>(c->codes[i])]);
      else
        os << c->values[i];
    }
    os << '\n';
  }
  return os.str();
}

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Population example_population(double age_mean, double age_sd, double uptake, int which,
                              bool original) {
  Population pop;
  pop.dim_x = 1;
  pop.dim_m = 1;
  pop.draw_x = [=](Rng& rng, std::vector<double>& x) {
    x[0] = std::normal_distribution<double>(age_mean, age_sd)(rng);
  };
  pop.draw_m = [=](Rng& rng, const std::vector<double>&, int t, std::vector<double>& m) {
    m[0] = std::bernoulli_distribution(0.1 + uptake * t)(rng) ? 1.0 : 0.0;
  };
  if (which == 1) {
    pop.mean = [](const std::vector<double>& x, int, const std::vector<double>& m) {
      return x[0] + 2.0 * m[0] * (22.0 - x[0]);
    };
    pop.outcome = [mean = pop.mean](Rng& rng, const std::vector<double>& x, int t,
                                    const std::vector<double>& m) {
      return mean(x, t, m) + std::normal_distribution<double>(0.0, 1.0)(rng);
    };
  } else {
    // Y = 10 + M (1 + 5U) + noise with P(U = 1) = 1 in the original
    // population and logistic(X - 21) in the replication population.
    auto u_prob = [original](double age) { return original ? 1.0 : logistic(age - 21.0); };
    pop.mean = [u_prob](const std::vector<double>& x, int, const std::vector<double>& m) {
      return 10.0 + m[0] * (1.0 + 5.0 * u_prob(x[0]));
    };
    pop.outcome = [u_prob](Rng& rng, const std::vector<double>& x, int,
                           const std::vector<double>& m) {
      const double u = std::bernoulli_distribution(u_prob(x[0]))(rng) ? 1.0 : 0.0;
      return 10.0 + m[0] * (1.0 + 5.0 * u) + std::normal_distribution<double>(0.0, 1.0)(rng);
    };
  }
  return pop;
}

}  // namespace

Scenario example_scenario(int which) {
  if (which != 1 && which != 2) throw ValidationError("example must be 1 or 2");
  Scenario s;
  s.original = example_population(19.0, 0.5, 0.5, which, true);
  s.replication = example_population(21.0, 1.5, 0.25, which, false);
  s.x_names = {"age"};
  s.m_names = {"m"};
  s.m_categorical = {true};
  s.spec.outcome_columns = {"y"};
  s.spec.treatment_column = "t";
  s.spec.regression_template = RegressionTemplate::kAncova;
  s.spec.categorical_levels["m"] = {"0", "1"};
  s.spec.covariate_moments = {{"age", Moment::kMeanAndSecondMoment}};
  s.spec.mediator_moments = {{"m", Moment::kOneHot}};
  s.spec.validate();
  return s;
}

}  // namespace shiftdiag
