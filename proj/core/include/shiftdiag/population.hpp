#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/dataset.hpp"
#include "shiftdiag/random.hpp"

namespace shiftdiag {

// A population law for (X, T, M, Y) with T a fair coin:
// X ~ draw_x, M | X, T ~ draw_m, and E[Y | X, T, M] = mean. `outcome`
// draws Y given (X, T, M).
struct Population {
  std::size_t dim_x = 0;
  std::size_t dim_m = 0;
  std::function<void(Rng&, std::vector<double>&)> draw_x;
  std::function<void(Rng&, const std::vector<double>&, int, std::vector<double>&)> draw_m;
  std::function<double(const std::vector<double>&, int, const std::vector<double>&)> mean;
  std::function<double(Rng&, const std::vector<double>&, int, const std::vector<double>&)> outcome;
};

// Original population P and replication population Q with the column
// layout of the simulated datasets and the spec that analyses them.
struct Scenario {
  Population original;
  Population replication;
  // Column names per coordinate; an empty name leaves the coordinate out
  // of the generated datasets.
  std::vector<std::string> x_names;
  std::vector<std::string> m_names;
  // Columns of X / M stored as categorical with levels "0" and "1".
  std::vector<bool> m_categorical;
  AnalysisSpec spec;
};

// Population estimands entering the decomposition.
struct Truth {
  double theta_original = 0.0;
  double theta_replication = 0.0;
  double theta_covariate_weighted = 0.0;
  double theta_mediator_weighted = 0.0;

  double observed() const { return theta_original - theta_replication; }
  double covariate_shift() const { return theta_covariate_weighted - theta_replication; }
  double mediation_shift() const { return theta_mediator_weighted - theta_covariate_weighted; }
  double residual() const { return theta_original - theta_mediator_weighted; }
  Truth scaled(double factor) const;
};

inline constexpr std::uint64_t kOracleSeed = 20240101;
inline constexpr std::size_t kOracleDraws = 1000000;

// Monte Carlo oracle for the treatment-effect estimands
//   theta(P), theta(Q), theta(P_X x Q_{T,M,Y|X}), theta(P_{X,T,M} x Q_{Y|X,T,M}),
// each the mean of E[Y|X,1,M(1)] - E[Y|X,0,M(0)] over draws from the coupled law.
Truth oracle_truth(const Scenario& scenario, std::size_t draws = kOracleDraws,
                   std::uint64_t seed = kOracleSeed);

// n units from one population, treatment by fair coin.
StudyDataset draw_study(const Scenario& scenario, StudyRole role, std::size_t n, Rng& rng);

// Writes the dataset as CSV (outcomes, treatment, covariates, mediators).
std::string dataset_to_csv(const StudyDataset& data, const AnalysisSpec& spec);

// Stylized example 1 (observable shift) and 2 (unobserved moderator).
Scenario example_scenario(int which);

}  // namespace shiftdiag
