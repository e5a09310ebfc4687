#include "shiftdiag/pipeline.hpp"

#include "shiftdiag/decomp.hpp"
#include "shiftdiag/error.hpp"

namespace shiftdiag {
namespace {

BalanceDiagnostics diagnostics(const std::string& name, const WeightSolution& w) {
  BalanceDiagnostics d;
  d.name = name;
  d.balance_residual = w.balance_residual;
  d.effective_sample_size = w.effective_sample_size;
  d.entropy = w.entropy;
  d.iterations = w.iterations;
  d.labels = w.labels;
  d.dual.assign(w.dual.data(), w.dual.data() + w.dual.size());
  return d;
}

}  // namespace

AnalysisSpec effective_spec(const AnalysisSpec& spec, const PipelineOptions& options) {
  AnalysisSpec out = spec;
  if (options.selection_alpha0) {
    if (!out.selection) out.selection = SelectionSpec{};
    out.selection->alpha0 = *options.selection_alpha0;
  }
  if (options.level) out.ci_level = *options.level;
  out.validate();
  return out;
}

PipelineResult run_pipeline(const StudyDataset& original, const StudyDataset& replication,
                            const AnalysisSpec& input_spec, const PipelineOptions& options) {
  const AnalysisSpec spec = effective_spec(input_spec, options);
  PipelineResult out;
  ResultDocument& doc = out.document;
  doc.spec_hash = spec_hash(spec);
  doc.version = engine_version();
  doc.seed = options.seed;
  doc.level = spec.ci_level;
  doc.n_original = original.n();
  doc.n_replication = replication.n();

  const OverlapDiagnostics overlap = check_overlap(original, replication, spec);
  doc.overlap = overlap.columns;
  doc.warnings = overlap.warnings;

  // Refuse the adjustment before paying for the jackknife.
  std::optional<SelectionModel> model;
  if (spec.selection) {
    const Decomposition full = estimate_components(original, replication, spec);
    model = SelectionModel::make(spec.selection->alpha0, spec.selection->coefficient,
                                 *full.selection_statistic);
  }

  JackknifeOptions jk_opts;
  jk_opts.threads = options.threads;
  out.jackknife = jackknife_covariance(original, replication, spec, jk_opts);
  const JackknifeResult& jk = out.jackknife;
  doc.jackknife_failures = jk.covariance.failures_original + jk.covariance.failures_replication;
  doc.warnings.insert(doc.warnings.end(), jk.full.warnings.begin(), jk.full.warnings.end());
  doc.observed = observed_estimate(jk, spec.ci_level);
  doc.decomposition = unadjusted_components(jk, spec.ci_level);

  doc.balance.push_back(diagnostics("covariate", jk.full.covariate_weights));
  if (jk.full.mediator_weights) doc.balance.push_back(diagnostics("mediator", *jk.full.mediator_weights));

  if (model) {
    const AdjustedDecomposition adj = adjust_for_selection(jk.estimates, jk.covariance, *model, spec.ci_level);
    AdjustedSection s;
    s.alpha0 = model->alpha0;
    s.z_threshold = model->z_threshold;
    s.observed_z = model->observed_z;
    s.discrepancy = adj.discrepancy_estimate;
    s.components = adj.components;
    s.iterations = adj.iterations;
    s.evaluations = adj.evaluations;
    s.converged = adj.converged;
    doc.adjusted = s;
  }
  return out;
}

}  // namespace shiftdiag
