#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace shiftdiag {

enum class RegressionTemplate { kTTest, kAnova2, kAncova, kAdjusted, kCustom };

enum class Moment { kMean, kMeanAndSecondMoment, kOneHot };

struct MomentSpec {
  std::string column;
  Moment moment = Moment::kMean;

  bool operator==(const MomentSpec&) const = default;
};

// Which original-study coefficient drove publication, and the threshold.
struct SelectionSpec {
  // "theta" for the target coefficient, or "beta:<k>" for a baseline one.
  std::string coefficient = "theta";
  double alpha0 = 0.05;

  bool operator==(const SelectionSpec&) const = default;
};

// Feature expressions shared by every outcome slot:
//   "1"          intercept
//   "x"          numeric covariate x
//   "x*z"        product of numeric covariates
//   "slot:k"     indicator of outcome slot k (1-based)
//   "col=level"  indicator of a categorical level
struct CustomTemplate {
  std::vector<std::string> f;
  std::vector<std::string> g;

  bool operator==(const CustomTemplate&) const = default;
};

struct AnalysisSpec {
  std::vector<std::string> outcome_columns;
  std::string treatment_column;
  RegressionTemplate regression_template = RegressionTemplate::kTTest;
  CustomTemplate custom;
  // Covariates entering g (ancova/adjusted). Empty means every numeric
  // covariate named in covariate_moments.
  std::vector<std::string> regression_covariates;
  // Declared categorical columns and their finite level sets.
  std::map<std::string, std::vector<std::string>> categorical_levels;
  std::vector<MomentSpec> covariate_moments;
  std::vector<MomentSpec> mediator_moments;
  std::optional<SelectionSpec> selection;
  double ci_level = 0.90;

  bool operator==(const AnalysisSpec&) const = default;

  // Throws ValidationError when the spec is internally inconsistent.
  void validate() const;

  bool is_categorical(const std::string& column) const;
  // Columns feeding the regression design or covariate balancing, in first
  // mention order.
  std::vector<std::string> covariate_columns() const;
  std::vector<std::string> mediator_columns() const;
  std::vector<std::string> effective_regression_covariates() const;
};

std::string to_string(RegressionTemplate t);
std::string to_string(Moment m);

void to_json(nlohmann::json& j, const AnalysisSpec& spec);
void from_json(const nlohmann::json& j, AnalysisSpec& spec);

AnalysisSpec parse_analysis_spec(const std::string& json_text);
AnalysisSpec load_analysis_spec(const std::string& path);

// Stable 64-bit FNV-1a digest of the canonical JSON form, as hex.
std::string spec_hash(const AnalysisSpec& spec);

}  // namespace shiftdiag
