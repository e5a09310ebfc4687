#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "shiftdiag/result.hpp"

namespace shiftdiag {

struct PipelineOptions {
  // Defaults to the spec's ci_level.
  std::optional<double> level;
  // Requests (or overrides the threshold of) the selection adjustment.
  std::optional<double> selection_alpha0;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

struct PipelineResult {
  ResultDocument document;
  JackknifeResult jackknife;
};

// Full analysis: overlap diagnostics, decomposition, jackknife intervals and,
// when a selection model is in effect, the selection-adjusted estimates.
PipelineResult run_pipeline(const StudyDataset& original, const StudyDataset& replication,
                            const AnalysisSpec& spec, const PipelineOptions& options = {});

// Spec with the selection override applied.
AnalysisSpec effective_spec(const AnalysisSpec& spec, const PipelineOptions& options);

}  // namespace shiftdiag
