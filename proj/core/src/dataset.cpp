#include "shiftdiag/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "shiftdiag/error.hpp"

namespace shiftdiag {
namespace {

std::string at_cell(std::size_t row, const std::string& column) {
  // Data rows are reported 1-based, counting from the first line after the header.
  return "row " + std::to_string(row + 1) + ", column '" + column + "'";
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return std::string(s);
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

double numeric_cell(const CsvTable& table, std::size_t row, int col) {
  const std::string& name = table.header[col];
  const std::string text = trim(table.rows[row][col]);
  if (text.empty()) throw ValidationError("missing value at " + at_cell(row, name));
  double v = 0.0;
  if (!parse_double(text, v))
    throw ValidationError("non-numeric value '" + text + "' at " + at_cell(row, name));
  if (!std::isfinite(v)) throw ValidationError("non-finite value at " + at_cell(row, name));
  return v;
}

int require_column(const CsvTable& table, const std::string& name) {
  const int idx = table.column_index(name);
  if (idx < 0) throw ValidationError("missing column '" + name + "'");
  return idx;
}

Column read_column(const CsvTable& table, const AnalysisSpec& spec, const std::string& name) {
  const int idx = require_column(table, name);
  Column col;
  col.name = name;
  auto it = spec.categorical_levels.find(name);
  if (it != spec.categorical_levels.end()) {
    col.categorical = true;
    col.levels = it->second;
    col.codes.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const std::string text = trim(table.rows[r][idx]);
      if (text.empty()) throw ValidationError("missing value at " + at_cell(r, name));
      auto lv = std::find(col.levels.begin(), col.levels.end(), text);
      if (lv == col.levels.end())
        throw ValidationError("undeclared level '" + text + "' at " + at_cell(r, name));
      col.codes.push_back(static_cast<int>(lv - col.levels.begin()));
    }
  } else {
    col.values.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r)
      col.values.push_back(numeric_cell(table, r, idx));
  }
  return col;
}

void check_column(const Column& c, std::size_t n) {
  if (c.size() != n)
    throw ValidationError("column '" + c.name + "' has " + std::to_string(c.size()) +
                          " values, expected " + std::to_string(n));
  if (c.categorical) {
    for (std::size_t i = 0; i < c.codes.size(); ++i)
      if (c.codes[i] < 0 || c.codes[i] >= static_cast<int>(c.levels.size()))
        throw ValidationError("undeclared level at " + at_cell(i, c.name));
  } else {
    for (std::size_t i = 0; i < c.values.size(); ++i)
      if (!std::isfinite(c.values[i]))
        throw ValidationError("non-finite value at " + at_cell(i, c.name));
  }
}

}  // namespace

std::string to_string(StudyRole role) {
  return role == StudyRole::kOriginal ? "original" : "replication";
}

StudyDataset::StudyDataset(StudyRole role, std::vector<int> treatment, Eigen::MatrixXd outcomes,
                           std::vector<Column> covariates, std::vector<Column> mediators)
    : role_(role),
      treatment_(std::move(treatment)),
      outcomes_(std::move(outcomes)),
      covariates_(std::move(covariates)),
      mediators_(std::move(mediators)) {
  const std::size_t units = treatment_.size();
  if (units == 0) throw ValidationError(to_string(role_) + " dataset has no rows");
  if (outcomes_.cols() < 1) throw ValidationError("at least one outcome column is required");
  if (static_cast<std::size_t>(outcomes_.rows()) != units)
    throw ValidationError("outcome rows do not match treatment length");
  bool treated = false, control = false;
  for (std::size_t i = 0; i < units; ++i) {
    if (treatment_[i] != 0 && treatment_[i] != 1)
      throw ValidationError("treatment not coded 0/1 at row " + std::to_string(i + 1));
    (treatment_[i] ? treated : control) = true;
  }
  if (!treated || !control)
    throw ValidationError(to_string(role_) + " dataset needs both treated and control units");
  if (!outcomes_.allFinite()) {
    for (Eigen::Index i = 0; i < outcomes_.rows(); ++i)
      for (Eigen::Index l = 0; l < outcomes_.cols(); ++l)
        if (!std::isfinite(outcomes_(i, l)))
          throw ValidationError("non-finite outcome at row " + std::to_string(i + 1) +
                                ", slot " + std::to_string(l + 1));
  }
  std::set<std::string> names;
  for (const auto* list : {&covariates_, &mediators_}) {
    for (const auto& c : *list) {
      if (!names.insert(c.name).second)
        throw ValidationError("column '" + c.name + "' appears twice");
      check_column(c, units);
    }
  }
}

StudyDataset StudyDataset::from_table(const CsvTable& table, const AnalysisSpec& spec,
                                      StudyRole role) {
  spec.validate();
  const std::size_t n = table.rows.size();
  if (n == 0) throw ValidationError(to_string(role) + " dataset has no rows");

  const int t_idx = require_column(table, spec.treatment_column);
  std::vector<int> treatment(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double v = numeric_cell(table, r, t_idx);
    if (v != 0.0 && v != 1.0)
      throw ValidationError("treatment not coded 0/1 at " + at_cell(r, spec.treatment_column));
    treatment[r] = static_cast<int>(v);
  }

  Eigen::MatrixXd outcomes(static_cast<Eigen::Index>(n),
                           static_cast<Eigen::Index>(spec.outcome_columns.size()));
  for (std::size_t l = 0; l < spec.outcome_columns.size(); ++l) {
    const int idx = require_column(table, spec.outcome_columns[l]);
    for (std::size_t r = 0; r < n; ++r) outcomes(r, l) = numeric_cell(table, r, idx);
  }

  std::vector<Column> covariates, mediators;
  for (const auto& name : spec.covariate_columns()) covariates.push_back(read_column(table, spec, name));
  for (const auto& name : spec.mediator_columns()) mediators.push_back(read_column(table, spec, name));

  return StudyDataset(role, std::move(treatment), std::move(outcomes), std::move(covariates),
                      std::move(mediators));
}

const Column& StudyDataset::column(const std::string& name) const {
  for (const auto* list : {&covariates_, &mediators_})
    for (const auto& c : *list)
      if (c.name == name) return c;
  throw ValidationError("dataset has no column '" + name + "'");
}

bool StudyDataset::has_column(const std::string& name) const {
  for (const auto* list : {&covariates_, &mediators_})
    for (const auto& c : *list)
      if (c.name == name) return true;
  return false;
}

StudyDataset StudyDataset::without_unit(std::size_t i) const {
  StudyDataset out;
  out.role_ = role_;
  const std::size_t units = n();
  out.treatment_.reserve(units - 1);
  for (std::size_t k = 0; k < units; ++k)
    if (k != i) out.treatment_.push_back(treatment_[k]);
  const auto rows = static_cast<Eigen::Index>(units);
  const auto cut = static_cast<Eigen::Index>(i);
  out.outcomes_.resize(rows - 1, outcomes_.cols());
  out.outcomes_.topRows(cut) = outcomes_.topRows(cut);
  out.outcomes_.bottomRows(rows - cut - 1) = outcomes_.bottomRows(rows - cut - 1);
  auto drop = [i](const std::vector<Column>& in) {
    std::vector<Column> cols = in;
    for (auto& c : cols) {
      if (c.categorical)
        c.codes.erase(c.codes.begin() + static_cast<std::ptrdiff_t>(i));
      else
        c.values.erase(c.values.begin() + static_cast<std::ptrdiff_t>(i));
    }
    return cols;
  };
  out.covariates_ = drop(covariates_);
  out.mediators_ = drop(mediators_);
  return out;
}

bool StudyDataset::operator==(const StudyDataset& o) const {
  return role_ == o.role_ && treatment_ == o.treatment_ && outcomes_ == o.outcomes_ &&
         covariates_ == o.covariates_ && mediators_ == o.mediators_;
}

StudyDataset load_dataset(const std::string& path, const AnalysisSpec& spec, StudyRole role) {
  return StudyDataset::from_table(read_csv_file(path), spec, role);
}

TableSummary summarize_table(const CsvTable& table) {
  TableSummary s;
  s.rows = table.rows.size();
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    ColumnSummary cs;
    cs.name = table.header[c];
    std::set<std::string> distinct;
    bool numeric = true;
    for (const auto& row : table.rows) {
      const std::string v = trim(row[c]);
      distinct.insert(v);
      double d = 0.0;
      if (!parse_double(v, d)) numeric = false;
    }
    cs.inferred_type = numeric ? "numeric" : "categorical";
    cs.distinct = distinct.size();
    s.columns.push_back(std::move(cs));
  }
  return s;
}

}  // namespace shiftdiag
