#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/csv.hpp"

namespace shiftdiag {

enum class StudyRole { kOriginal, kReplication };

std::string to_string(StudyRole role);

struct Column {
  std::string name;
  bool categorical = false;
  std::vector<double> values;       // numeric columns
  std::vector<int> codes;           // categorical columns, index into levels
  std::vector<std::string> levels;  // declared level set

  std::size_t size() const { return categorical ? codes.size() : values.size(); }
  bool operator==(const Column&) const = default;
};

// Validated unit-level table of one experiment. Immutable once built.
class StudyDataset {
 public:
  StudyDataset() = default;
  // Validates the invariants: binary treatment with both arms, p >= 1,
  // equal lengths, finite numerics, codes within the declared levels.
  StudyDataset(StudyRole role, std::vector<int> treatment, Eigen::MatrixXd outcomes,
               std::vector<Column> covariates, std::vector<Column> mediators);

  // Reads and validates the columns the spec references.
  static StudyDataset from_table(const CsvTable& table, const AnalysisSpec& spec,
                                 StudyRole role);

  StudyRole role() const { return role_; }
  std::size_t n() const { return treatment_.size(); }
  std::size_t p() const { return static_cast<std::size_t>(outcomes_.cols()); }
  const std::vector<int>& treatment() const { return treatment_; }
  const Eigen::MatrixXd& outcomes() const { return outcomes_; }
  const std::vector<Column>& covariates() const { return covariates_; }
  const std::vector<Column>& mediators() const { return mediators_; }

  // Covariate or mediator column by name; throws ValidationError if absent.
  const Column& column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  // Copy with unit i removed (leave-one-out).
  StudyDataset without_unit(std::size_t i) const;

  bool operator==(const StudyDataset&) const;

 private:
  StudyRole role_ = StudyRole::kOriginal;
  std::vector<int> treatment_;
  Eigen::MatrixXd outcomes_;
  std::vector<Column> covariates_;
  std::vector<Column> mediators_;
};

StudyDataset load_dataset(const std::string& path, const AnalysisSpec& spec,
                          StudyRole role);

// Column overview used by the console's mapping screen.
struct ColumnSummary {
  std::string name;
  std::string inferred_type;  // "numeric" or "categorical"
  std::size_t distinct = 0;
};

struct TableSummary {
  std::size_t rows = 0;
  std::vector<ColumnSummary> columns;
};

TableSummary summarize_table(const CsvTable& table);

}  // namespace shiftdiag
