#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftdiag/inference.hpp"

namespace shiftdiag {

struct SelectionModel {
  double alpha0 = 0.05;
  double z_threshold = 0.0;
  std::string statistic_label;
  double observed_z = 0.0;

  // Throws SelectionError when |observed_z| <= z_{1-alpha0/2}.
  static SelectionModel make(double alpha0, std::string label, double observed_z);
};

// P_{Z~N(t, s11)} { Z <= c | tau < |a (Z - c) + theta1| },  a = s12 / s11.
double truncated_prob(double t, double c, double theta1, double tau, const Eigen::Matrix2d& sigma);

// {t : truncated_prob(t, ...) in [alpha/2, 1 - alpha/2]}.
Interval invert_ci(double c, double theta1, double tau, const Eigen::Matrix2d& sigma, double alpha);

struct NelderMeadOptions {
  Eigen::VectorXd initial_step;
  double diameter_tolerance = 1e-7;
  double value_tolerance = 1e-10;
  std::size_t max_evaluations = 5000;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t evaluations = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Minimizes f from x0.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& options);

// Profiled truncated-Gaussian log-likelihood of the component means `delta`
// given estimates `estimate` (components only), the component covariance
// `s`, the covariances `cross` between the components and the selection
// statistic, the observed statistic z and the threshold.
double profiled_log_likelihood(const Eigen::VectorXd& delta, const Eigen::VectorXd& estimate,
                               const Eigen::MatrixXd& s, const Eigen::VectorXd& cross, double z,
                               double threshold);

struct SelectiveMleResult {
  Eigen::VectorXd estimate;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

SelectiveMleResult selective_mle(const Eigen::VectorXd& estimate, const Eigen::MatrixXd& s,
                                 const Eigen::VectorXd& cross, double z, double threshold);

struct AdjustedDecomposition {
  double discrepancy = 0.0;
  double sampling_variability = 0.0;
  double covariate_shift = 0.0;
  std::optional<double> mediation_shift;
  double residual = 0.0;
  // Selection-adjusted intervals in the reported component order.
  std::vector<ComponentEstimate> components;
  ComponentEstimate discrepancy_estimate;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

AdjustedDecomposition adjust_for_selection(const EstimatorVector& vec,
                                           const JackknifeCovariance& cov,
                                           const SelectionModel& model, double level);

}  // namespace shiftdiag
