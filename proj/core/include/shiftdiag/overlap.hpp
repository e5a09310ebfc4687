#pragma once

#include <string>
#include <vector>

#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/dataset.hpp"

namespace shiftdiag {

struct ColumnOverlap {
  std::string column;
  bool categorical = false;
  // Levels seen in the original study but never in the replication.
  std::vector<std::string> missing_levels;
  double original_min = 0.0, original_max = 0.0;
  double replication_min = 0.0, replication_max = 0.0;
  // max over bins of (original mass / replication mass) on a shared 10-bin
  // grid; +inf when the original has mass where the replication has none.
  double density_ratio_proxy = 1.0;
  bool support_contained = true;

  bool operator==(const ColumnOverlap&) const = default;
};

struct OverlapDiagnostics {
  std::vector<ColumnOverlap> columns;
  std::vector<std::string> warnings;
};

inline constexpr int kOverlapBins = 10;

// Report-only: never throws for validated inputs and never mutates data.
OverlapDiagnostics check_overlap(const StudyDataset& original,
                                 const StudyDataset& replication,
                                 const AnalysisSpec& spec);

}  // namespace shiftdiag
