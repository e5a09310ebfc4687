#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/dataset.hpp"

namespace shiftdiag {

// Linear moment constraints on replication-unit weights: the weighted mean
// of each feature column must equal its target (the original-study mean).
struct MomentConstraintSet {
  Eigen::MatrixXd features;  // replication units x d
  Eigen::VectorXd targets;   // d
  std::vector<std::string> labels;

  std::size_t dimension() const { return static_cast<std::size_t>(targets.size()); }
};

// Minimum-entropy weights and their exponential-family dual.
struct WeightSolution {
  Eigen::VectorXd weights;  // w_i >= 0, sum 1
  Eigen::VectorXd dual;     // gamma on the original feature scale
  double entropy = 0.0;     // sum w log w
  double balance_residual = 0.0;  // max |weighted mean - target|, standardized
  double effective_sample_size = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;  // dual objective at accepted iterates
  std::vector<std::string> labels;
};

struct BalanceOptions {
  int max_iterations = 200;
  int max_halvings = 30;
  double gradient_tolerance = 1e-10;
  double feasibility_tolerance = 1e-8;
  double ridge = 1e-12;
  // Dual starting point on the original feature scale; zero when empty.
  Eigen::VectorXd warm_start;
};

// Features (T, phi, T*phi) from the covariate moments, targets from the
// original study. Throws InfeasibleError when a one-hot level of the original
// study is missing from the replication.
MomentConstraintSet build_covariate_constraints(const StudyDataset& original,
                                                const StudyDataset& replication,
                                                const AnalysisSpec& spec);

// Covariate constraints followed by (psi, T*psi) for the mediators.
MomentConstraintSet build_mediator_constraints(const StudyDataset& original,
                                               const StudyDataset& replication,
                                               const AnalysisSpec& spec);

// Solves min sum w log w subject to the constraints through the dual
//   G(gamma) = log sum_j exp(gamma' c_j) - gamma' b
// by damped Newton on standardized features.
// Throws InfeasibleError (with the worst-violated label) or SingularError.
WeightSolution solve_entropy_weights(const MomentConstraintSet& constraints,
                                     const BalanceOptions& options = {});

}  // namespace shiftdiag
