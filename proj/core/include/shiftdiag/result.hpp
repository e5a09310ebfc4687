#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shiftdiag/inference.hpp"
#include "shiftdiag/overlap.hpp"
#include "shiftdiag/selectadj.hpp"

namespace shiftdiag {

std::string engine_version();

struct BalanceDiagnostics {
  std::string name;  // "covariate" or "mediator"
  double balance_residual = 0.0;
  double effective_sample_size = 0.0;
  double entropy = 0.0;
  int iterations = 0;
  std::vector<std::string> labels;
  std::vector<double> dual;

  bool operator==(const BalanceDiagnostics&) const = default;
};

struct AdjustedSection {
  double alpha0 = 0.05;
  double z_threshold = 0.0;
  double observed_z = 0.0;
  ComponentEstimate discrepancy;
  std::vector<ComponentEstimate> components;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;

  bool operator==(const AdjustedSection&) const = default;
};

struct ResultDocument {
  std::string spec_hash;
  std::string version;
  std::optional<std::uint64_t> seed;
  double level = 0.90;
  std::size_t n_original = 0;
  std::size_t n_replication = 0;
  ComponentEstimate observed;
  std::vector<ComponentEstimate> decomposition;
  std::optional<AdjustedSection> adjusted;
  std::vector<BalanceDiagnostics> balance;
  std::vector<ColumnOverlap> overlap;
  std::size_t jackknife_failures = 0;
  std::vector<std::string> warnings;

  bool operator==(const ResultDocument&) const;
};

nlohmann::json to_json(const ResultDocument& doc);
ResultDocument result_from_json(const nlohmann::json& j);

// JSON text with every floating-point number written with 17 significant
// digits, two-space indentation and a trailing newline.
std::string dump_json(const nlohmann::json& j);

std::string serialize(const ResultDocument& doc);
// Throws ValidationError for malformed documents.
ResultDocument parse_result(const std::string& text);

// component,estimate,ci_lo,ci_hi,adjusted in component order; adjusted rows
// follow the unadjusted ones.
std::string plot_data_csv(const ResultDocument& doc);

}  // namespace shiftdiag
