#include "shiftdiag/overlap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace shiftdiag {
namespace {

ColumnOverlap categorical_overlap(const Column& a, const Column& b) {
  ColumnOverlap out;
  out.column = a.name;
  out.categorical = true;
  std::vector<double> ma(a.levels.size(), 0.0), mb(b.levels.size(), 0.0);
  for (int c : a.codes) ma[c] += 1.0 / static_cast<double>(a.codes.size());
  for (int c : b.codes) mb[c] += 1.0 / static_cast<double>(b.codes.size());
  out.density_ratio_proxy = 0.0;
  for (std::size_t k = 0; k < ma.size(); ++k) {
    if (ma[k] == 0.0) continue;
    if (mb[k] == 0.0) {
      out.missing_levels.push_back(a.levels[k]);
      out.density_ratio_proxy = std::numeric_limits<double>::infinity();
    } else {
      out.density_ratio_proxy = std::max(out.density_ratio_proxy, ma[k] / mb[k]);
    }
  }
  out.support_contained = out.missing_levels.empty();
  return out;
}

ColumnOverlap numeric_overlap(const Column& a, const Column& b) {
  ColumnOverlap out;
  out.column = a.name;
  const auto [amin, amax] = std::minmax_element(a.values.begin(), a.values.end());
  const auto [bmin, bmax] = std::minmax_element(b.values.begin(), b.values.end());
  out.original_min = *amin;
  out.original_max = *amax;
  out.replication_min = *bmin;
  out.replication_max = *bmax;
  out.support_contained = *amin >= *bmin && *amax <= *bmax;

  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  const double width = (hi - lo) / kOverlapBins;
  auto bin = [&](double x) {
    if (width <= 0.0) return 0;
    const int k = static_cast<int>(std::floor((x - lo) / width));
    return std::clamp(k, 0, kOverlapBins - 1);
  };
  std::array<double, kOverlapBins> ha{}, hb{};
  for (double x : a.values) ha[bin(x)] += 1.0 / static_cast<double>(a.values.size());
  for (double x : b.values) hb[bin(x)] += 1.0 / static_cast<double>(b.values.size());
  out.density_ratio_proxy = 0.0;
  for (int k = 0; k < kOverlapBins; ++k) {
    if (ha[k] == 0.0) continue;
    out.density_ratio_proxy = hb[k] == 0.0 ? std::numeric_limits<double>::infinity()
                                           : std::max(out.density_ratio_proxy, ha[k] / hb[k]);
  }
  return out;
}

}  // namespace

OverlapDiagnostics check_overlap(const StudyDataset& original, const StudyDataset& replication,
                                 const AnalysisSpec& spec) {
  OverlapDiagnostics diag;
  std::vector<std::string> balanced;
  for (const auto* moments : {&spec.covariate_moments, &spec.mediator_moments})
    for (const auto& m : *moments)
      if (std::find(balanced.begin(), balanced.end(), m.column) == balanced.end())
        balanced.push_back(m.column);

  for (const auto& name : balanced) {
    if (!original.has_column(name) || !replication.has_column(name)) continue;
    const Column& a = original.column(name);
    const Column& b = replication.column(name);
    ColumnOverlap c = a.categorical ? categorical_overlap(a, b) : numeric_overlap(a, b);
    if (!c.support_contained) {
      if (c.categorical) {
        std::string levels;
        for (const auto& l : c.missing_levels) levels += (levels.empty() ? "" : ", ") + l;
        diag.warnings.push_back("column '" + name + "': original levels absent from replication: " +
                                levels);
      } else {
        diag.warnings.push_back("column '" + name + "': original range [" +
                                std::to_string(c.original_min) + ", " +
                                std::to_string(c.original_max) +
                                "] exceeds replication range [" +
                                std::to_string(c.replication_min) + ", " +
                                std::to_string(c.replication_max) + "]");
      }
    }
    diag.columns.push_back(std::move(c));
  }
  return diag;
}

}  // namespace shiftdiag
