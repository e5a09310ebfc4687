#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftdiag/decomp.hpp"

namespace shiftdiag {

// Joint estimator vector: [selection z], observed, covariate shift,
// [mediation shift], theta(original).
struct EstimatorVector {
  Eigen::VectorXd values;
  std::vector<std::string> labels;
  std::optional<std::size_t> selection;
  std::size_t observed = 0;
  std::size_t covariate = 0;
  std::optional<std::size_t> mediation;
  std::size_t theta_original = 0;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

struct JackknifeCovariance {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd original_part;
  Eigen::MatrixXd replication_part;
  std::size_t failures_original = 0;
  std::size_t failures_replication = 0;
};

struct JackknifeResult {
  Decomposition full;
  EstimatorVector estimates;
  JackknifeCovariance covariance;
};

struct JackknifeOptions {
  std::size_t threads = 1;
  // Leave-one-out balancing starts from the full-sample duals.
  bool warm_start = true;
  // Largest tolerated fraction of failed leave-one-out replicates.
  double max_failure_fraction = 0.01;
  BalanceOptions balance;
};

EstimatorVector make_estimator_vector(const Decomposition& d);

// Delete-one-unit jackknife over both studies with the two-sample
// combination (n_k-1)/n_k * sum (V_-i - mean)(V_-i - mean)'.
JackknifeResult jackknife_covariance(const StudyDataset& original, const StudyDataset& replication,
                                     const AnalysisSpec& spec, const JackknifeOptions& options = {});

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// estimate +- z_{(1+level)/2} * sqrt(variance).
Interval normal_ci(double estimate, double variance, double level);
std::vector<Interval> normal_cis(const EstimatorVector& vec, const JackknifeCovariance& cov,
                                 double level);

// One reported component: point estimate, standard error, interval.
struct ComponentEstimate {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  bool operator==(const ComponentEstimate&) const = default;
};

// Unadjusted table: sampling variability (0 with the observed-discrepancy
// standard error), covariate shift, mediation shift, residual.
std::vector<ComponentEstimate> unadjusted_components(const JackknifeResult& result, double level);
ComponentEstimate observed_estimate(const JackknifeResult& result, double level);

// Coefficient vector picking the residual (observed - shifts) out of the
// estimator vector.
Eigen::VectorXd residual_combination(const EstimatorVector& vec);

}  // namespace shiftdiag
