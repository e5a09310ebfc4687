#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "shiftdiag/population.hpp"

namespace shiftdiag {

enum class Setting { kS1, kS2, kS3, kSel };
enum class SubSetting { kI, kII, kIII };
enum class Method { kStandard, kPowerCalculated, kSelectedUnadjusted, kSelectedAdjusted };

struct FixedN2 {
  std::size_t n2 = 500;
};

struct PowerCalculated {
  double shrink = 0.9;
  double power = 0.9;
  double alpha = 0.05;
};

struct DgpConfig {
  Setting setting = Setting::kS1;
  SubSetting sub = SubSetting::kI;
  double sigma = 1.0;
  double nu = 0.1;
  std::size_t n1 = 500;
  std::variant<FixedN2, PowerCalculated> sampling = FixedN2{};
  std::uint64_t seed = 1;

  void validate() const;
  // "s1i", "s2iii", "sel_ii", ...
  std::string name() const;
};

// Parses "s1i" .. "s3iii" and "sel_i" .. "sel_iii" into the config.
void parse_setting(const std::string& text, DgpConfig& config);
Method parse_method(const std::string& text);
std::string to_string(Method method);

// P and Q of the configured setting (SEL uses setting 2 with Y = nu T delta + N(0,1)).
Scenario make_scenario(const DgpConfig& config);

// Truth for the config: the checked-in oracle table scaled by nu for SEL.
Truth truth_for(const DgpConfig& config);
// Unscaled truth of a setting from the checked-in table.
Truth cached_truth(Setting setting, SubSetting sub);
// Same value recomputed with the Monte Carlo oracle.
Truth compute_truth(Setting setting, SubSetting sub, std::size_t draws = kOracleDraws,
                    std::uint64_t seed = kOracleSeed);

// Replication size with the requested power against shrink * |theta_hat|.
std::size_t power_n2(double theta_hat, double se_hat, std::size_t n1, double shrink, double power,
                     double alpha);

struct GeneratedPair {
  StudyDataset original;
  StudyDataset replication;
  Truth truth;
  std::size_t attempts = 1;
};

// Draws replicate `index` of the config (standard or power-calculated n2).
GeneratedPair generate_pair(const DgpConfig& config, std::uint64_t index = 0);

struct SelectedOriginal {
  StudyDataset original;
  std::size_t n2 = 0;
  std::size_t attempts = 0;
};

inline constexpr std::size_t kMaxSelectionAttempts = 100000;

// Rejection-samples the original study until the treatment coefficient is
// significant at 0.05, then sizes the replication with power 0.8.
SelectedOriginal generate_selected_original(const DgpConfig& config, Rng& rng);

// Treatment-coefficient z statistic of a ttest regression.
double treatment_z(const StudyDataset& data, const AnalysisSpec& spec);

struct ComponentCoverage {
  std::string component;
  double coverage = 0.0;
  double sd = 0.0;
  std::size_t replicates = 0;
};

struct CoverageReport {
  DgpConfig config;
  Method method = Method::kStandard;
  double level = 0.90;
  std::size_t requested = 0;
  std::size_t failures = 0;
  double mean_n2 = 0.0;
  std::vector<ComponentCoverage> components;
  std::vector<std::string> failure_messages;

  const ComponentCoverage& component(const std::string& name) const;
  nlohmann::json to_json() const;
  // Flat rows: setting,sigma,nu,method,component,coverage,sd,replicates,mean_n2.
  std::string to_csv(bool header = true) const;
};

inline constexpr const char* kObservedComponent = "observed";

struct CoverageOptions {
  std::size_t threads = 1;
  // Largest tolerated fraction of failed replicates.
  double max_failure_fraction = 0.02;
};

// Runs `reps` replicates and evaluates every requested method on the same
// draws. Standard and power-calculated use the config's data path; the two
// selected methods share one selected original per replicate.
std::vector<CoverageReport> run_coverage(const DgpConfig& config, const std::vector<Method>& methods,
                                         std::size_t reps, double level,
                                         const CoverageOptions& options = {});

CoverageReport run_coverage(const DgpConfig& config, Method method, std::size_t reps, double level,
                            const CoverageOptions& options = {});

}  // namespace shiftdiag
