#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/balance.hpp"
#include "shiftdiag/dataset.hpp"

namespace shiftdiag {

inline constexpr const char* kSamplingVariability = "sampling_variability";
inline constexpr const char* kCovariateShift = "covariate_shift";
inline constexpr const char* kMediationShift = "mediation_shift";
inline constexpr const char* kResidual = "residual";

// Unadjusted discrepancy decomposition. Components are ordered sampling
// variability, covariate shift, mediation shift (when mediators were
// balanced), residual.
struct Decomposition {
  double observed = 0.0;
  double sampling_variability = 0.0;
  double covariate_shift = 0.0;
  std::optional<double> mediation_shift;
  double residual = 0.0;

  double theta_original = 0.0;
  double theta_replication = 0.0;
  double theta_covariate_weighted = 0.0;
  std::optional<double> theta_mediator_weighted;

  WeightSolution covariate_weights;
  std::optional<WeightSolution> mediator_weights;

  // tau-hat / sigma-hat of the selection coefficient in the original study,
  // present when the spec declares a selection model.
  std::optional<double> selection_statistic;

  bool adjusted = false;
  std::vector<std::string> warnings;

  std::vector<std::pair<std::string, double>> components() const;
};

struct DecompositionOptions {
  BalanceOptions balance;
  Eigen::VectorXd covariate_warm_start;
  Eigen::VectorXd mediator_warm_start;
  // When false the mediator weights are not attempted (covariate-only).
  bool include_mediators = true;
  // When true an infeasible mediator problem propagates instead of degrading.
  bool strict_mediators = false;
};

Decomposition estimate_components(const StudyDataset& original, const StudyDataset& replication,
                                  const AnalysisSpec& spec, const DecompositionOptions& options = {});

// theta of the replication regression under the given unit weights.
double reweighted_effect(const StudyDataset& replication, const AnalysisSpec& spec,
                         const WeightSolution& weights);

}  // namespace shiftdiag
