#include "shiftdiag/decomp.hpp"

#include "shiftdiag/error.hpp"
#include "shiftdiag/regress.hpp"

namespace shiftdiag {

std::vector<std::pair<std::string, double>> Decomposition::components() const {
  std::vector<std::pair<std::string, double>> out{{kSamplingVariability, sampling_variability},
                                                  {kCovariateShift, covariate_shift}};
  if (mediation_shift) out.emplace_back(kMediationShift, *mediation_shift);
  out.emplace_back(kResidual, residual);
  return out;
}

double reweighted_effect(const StudyDataset& replication, const AnalysisSpec& spec,
                         const WeightSolution& weights) {
  return fit_wls(build_design(replication, spec), weights.weights).theta;
}

Decomposition estimate_components(const StudyDataset& original, const StudyDataset& replication,
                                  const AnalysisSpec& spec, const DecompositionOptions& options) {
  Decomposition out;
  const StackedDesign design1 = build_design(original, spec);
  const StackedDesign design2 = build_design(replication, spec);
  const FitResult fit1 = fit_wls(design1);
  out.theta_original = fit1.theta;
  out.theta_replication = fit_wls(design2).theta;
  out.observed = out.theta_original - out.theta_replication;

  if (spec.selection) {
    const std::size_t idx = coefficient_index(design1, spec.selection->coefficient);
    const double se = coefficient_se(design1, fit1, idx);
    if (!(se > 0.0)) throw SingularError("selection coefficient has zero standard error");
    out.selection_statistic = fit1.coefficients[static_cast<Eigen::Index>(idx)] / se;
  }

  BalanceOptions cov_opts = options.balance;
  cov_opts.warm_start = options.covariate_warm_start;
  out.covariate_weights =
      solve_entropy_weights(build_covariate_constraints(original, replication, spec), cov_opts);
  out.theta_covariate_weighted = fit_wls(design2, out.covariate_weights.weights).theta;
  out.covariate_shift = out.theta_covariate_weighted - out.theta_replication;

  double reference = out.theta_covariate_weighted;
  if (options.include_mediators && !spec.mediator_moments.empty()) {
    BalanceOptions med_opts = options.balance;
    med_opts.warm_start = options.mediator_warm_start;
    try {
      out.mediator_weights =
          solve_entropy_weights(build_mediator_constraints(original, replication, spec), med_opts);
      out.theta_mediator_weighted = fit_wls(design2, out.mediator_weights->weights).theta;
      out.mediation_shift = *out.theta_mediator_weighted - out.theta_covariate_weighted;
      reference = *out.theta_mediator_weighted;
    } catch (const InfeasibleError& e) {
      if (options.strict_mediators) throw;
      out.warnings.push_back(std::string("mediator balancing infeasible, reporting a "
                                         "covariate-only decomposition: ") +
                             e.what());
    }
  }
  out.sampling_variability = 0.0;
  out.residual = out.theta_original - reference;
  return out;
}

}  // namespace shiftdiag
