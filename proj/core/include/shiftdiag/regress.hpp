#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/dataset.hpp"

namespace shiftdiag {

// Stacked least-squares design: each unit contributes p consecutive rows
// [T * f_l(x), g_l(x)] with response Y_l.
struct StackedDesign {
  Eigen::MatrixXd matrix;    // (n*p) x (dim_f + dim_g)
  Eigen::VectorXd response;  // n*p
  std::vector<int> unit_index;
  std::size_t units = 0;
  std::size_t slots = 0;
  std::size_t dim_f = 0;
  std::size_t dim_g = 0;
  std::vector<std::string> column_names;
  // Structural identifiability map (coefficients = reparam * free). Empty
  // unless the template's baseline block is aliased by construction, as with
  // anova2 where the slot indicators sum to the intercept; the slot effects
  // then carry a sum-to-zero constraint that leaves theta untouched.
  Eigen::MatrixXd reparam;

  std::size_t columns() const { return dim_f + dim_g; }
};

struct FitResult {
  double theta = 0.0;
  Eigen::VectorXd beta;          // baseline coefficients, dim_g
  Eigen::VectorXd coefficients;  // full (treatment block then baseline)
  double gram_condition = 1.0;   // condition number of the weighted Gram matrix
  bool weighted = false;
};

// Singular values below this multiple of the largest are rank deficient.
inline constexpr double kRankTolerance = 1e-10;

StackedDesign build_design(const StudyDataset& data, const AnalysisSpec& spec);

// Ordinary least squares (uniform unit weights).
FitResult fit_wls(const StackedDesign& design);
// Weighted least squares with one nonnegative weight per unit.
FitResult fit_wls(const StackedDesign& design, const Eigen::VectorXd& unit_weights);

// Index into FitResult::coefficients for a selection coefficient label
// ("theta" or "beta:<k>", k 1-based within g).
std::size_t coefficient_index(const StackedDesign& design, const std::string& label);

// Cluster-robust (by unit) sandwich standard error of an unweighted fit's
// coefficient, with an n/(n-1) small-sample factor.
double coefficient_se(const StackedDesign& design, const FitResult& fit, std::size_t index);

}  // namespace shiftdiag
