#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/dataset.hpp"
#include "shiftdiag/random.hpp"

namespace testsupport {

inline shiftdiag::Column numeric(const std::string& name, std::vector<double> v) {
  shiftdiag::Column c;
  c.name = name;
  c.values = std::move(v);
  return c;
}

inline shiftdiag::Column categorical(const std::string& name, std::vector<int> codes,
                                     std::vector<std::string> levels) {
  shiftdiag::Column c;
  c.name = name;
  c.categorical = true;
  c.codes = std::move(codes);
  c.levels = std::move(levels);
  return c;
}

// Single-outcome dataset.
inline shiftdiag::StudyDataset make_study(std::vector<int> t, std::vector<double> y,
                                          std::vector<shiftdiag::Column> cov = {},
                                          std::vector<shiftdiag::Column> med = {},
                                          shiftdiag::StudyRole role = shiftdiag::StudyRole::kOriginal) {
  Eigen::MatrixXd ym(static_cast<Eigen::Index>(y.size()), 1);
  for (std::size_t i = 0; i < y.size(); ++i) ym(static_cast<Eigen::Index>(i), 0) = y[i];
  return shiftdiag::StudyDataset(role, std::move(t), std::move(ym), std::move(cov), std::move(med));
}

inline shiftdiag::AnalysisSpec ttest_spec() {
  shiftdiag::AnalysisSpec s;
  s.outcome_columns = {"y"};
  s.treatment_column = "t";
  s.regression_template = shiftdiag::RegressionTemplate::kTTest;
  return s;
}

// Random dataset with numeric covariates x1..xk, both arms populated.
inline shiftdiag::StudyDataset random_study(shiftdiag::Rng& rng, std::size_t n, std::size_t p,
                                            std::size_t k, double shift = 0.0,
                                            shiftdiag::StudyRole role = shiftdiag::StudyRole::kOriginal) {
  std::normal_distribution<double> g;
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = i < 2 ? static_cast<int>(i) : (rng() & 1U ? 1 : 0);
  std::vector<shiftdiag::Column> cov;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> v(n);
    for (auto& e : v) e = g(rng) + shift;
    cov.push_back(numeric("x" + std::to_string(j + 1), std::move(v)));
  }
  Eigen::MatrixXd y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < p; ++l) {
      double v = g(rng) + t[i] * (1.0 + 0.3 * static_cast<double>(l));
      for (std::size_t j = 0; j < k; ++j) v += 0.5 * cov[j].values[i];
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = v;
    }
  return shiftdiag::StudyDataset(role, std::move(t), std::move(y), std::move(cov), {});
}

}  // namespace testsupport
