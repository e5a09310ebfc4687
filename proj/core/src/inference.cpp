#include "shiftdiag/inference.hpp"

#include <cmath>
#include <vector>

#include "shiftdiag/error.hpp"
#include "shiftdiag/normal.hpp"
#include "shiftdiag/parallel.hpp"

namespace shiftdiag {
namespace {

struct Replicate {
  bool ok = false;
  Eigen::VectorXd values;
};

Eigen::MatrixXd source_covariance(const std::vector<Replicate>& reps, std::size_t n,
                                  Eigen::Index k) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  std::size_t used = 0;
  for (const auto& r : reps)
    if (r.ok) {
      mean += r.values;
      ++used;
    }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k, k);
  if (used == 0) return out;
  mean /= static_cast<double>(used);
  for (const auto& r : reps)
    if (r.ok) {
      const Eigen::VectorXd dev = r.values - mean;
      out.noalias() += dev * dev.transpose();
    }
  const double nn = static_cast<double>(n);
  return out * ((nn - 1.0) / nn);
}

}  // namespace

EstimatorVector make_estimator_vector(const Decomposition& d) {
  EstimatorVector v;
  std::vector<double> vals;
  if (d.selection_statistic) {
    v.selection = vals.size();
    vals.push_back(*d.selection_statistic);
    v.labels.push_back("selection_z");
  }
  v.observed = vals.size();
  vals.push_back(d.observed);
  v.labels.push_back("observed");
  v.covariate = vals.size();
  vals.push_back(d.covariate_shift);
  v.labels.push_back(kCovariateShift);
  if (d.mediation_shift) {
    v.mediation = vals.size();
    vals.push_back(*d.mediation_shift);
    v.labels.push_back(kMediationShift);
  }
  v.theta_original = vals.size();
  vals.push_back(d.theta_original);
  v.labels.push_back("theta_original");
  v.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return v;
}

JackknifeResult jackknife_covariance(const StudyDataset& original, const StudyDataset& replication,
                                     const AnalysisSpec& spec, const JackknifeOptions& options) {
  JackknifeResult result;
  DecompositionOptions base;
  base.balance = options.balance;
  result.full = estimate_components(original, replication, spec, base);
  result.estimates = make_estimator_vector(result.full);

  DecompositionOptions loo = base;
  loo.include_mediators = result.full.mediation_shift.has_value();
  loo.strict_mediators = true;
  if (options.warm_start) {
    loo.covariate_warm_start = result.full.covariate_weights.dual;
    if (result.full.mediator_weights) loo.mediator_warm_start = result.full.mediator_weights->dual;
  }

  const std::size_t n1 = original.n();
  const std::size_t n2 = replication.n();
  const auto k = static_cast<Eigen::Index>(result.estimates.size());
  std::vector<Replicate> reps(n1 + n2);
  parallel_for(n1 + n2, options.threads, [&](std::size_t idx) {
    try {
      const Decomposition d =
          idx < n1 ? estimate_components(original.without_unit(idx), replication, spec, loo)
                   : estimate_components(original, replication.without_unit(idx - n1), spec, loo);
      Replicate r;
      r.values = make_estimator_vector(d).values;
      r.ok = r.values.size() == k && r.values.allFinite();
      reps[idx] = std::move(r);
    } catch (const ValidationError&) {
      // A leave-one-out sample can lose an arm entirely; count it as failed.
    } catch (const InfeasibleError&) {
    } catch (const SingularError&) {
    }
  });

  std::vector<Replicate> first(reps.begin(), reps.begin() + static_cast<std::ptrdiff_t>(n1));
  std::vector<Replicate> second(reps.begin() + static_cast<std::ptrdiff_t>(n1), reps.end());
  auto& cov = result.covariance;
  for (const auto& r : first) cov.failures_original += r.ok ? 0 : 1;
  for (const auto& r : second) cov.failures_replication += r.ok ? 0 : 1;
  const double failed = static_cast<double>(cov.failures_original + cov.failures_replication);
  if (failed > options.max_failure_fraction * static_cast<double>(n1 + n2))
    throw InfeasibleError("jackknife: " + std::to_string(static_cast<long>(failed)) + " of " +
                              std::to_string(n1 + n2) + " leave-one-out replicates failed",
                          "jackknife");

  cov.original_part = source_covariance(first, n1, k);
  cov.replication_part = source_covariance(second, n2, k);
  cov.sigma = cov.original_part + cov.replication_part;
  cov.sigma = 0.5 * (cov.sigma + cov.sigma.transpose()).eval();
  return result;
}

Interval normal_ci(double estimate, double variance, double level) {
  const double z = normal::quantile(0.5 * (1.0 + level));
  const double half = z * std::sqrt(std::max(0.0, variance));
  return {estimate - half, estimate + half};
}

std::vector<Interval> normal_cis(const EstimatorVector& vec, const JackknifeCovariance& cov,
                                 double level) {
  std::vector<Interval> out;
  for (std::size_t i = 0; i < vec.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out.push_back(normal_ci(vec.values[ii], cov.sigma(ii, ii), level));
  }
  return out;
}

Eigen::VectorXd residual_combination(const EstimatorVector& vec) {
  Eigen::VectorXd l = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vec.size()));
  l[static_cast<Eigen::Index>(vec.observed)] = 1.0;
  l[static_cast<Eigen::Index>(vec.covariate)] = -1.0;
  if (vec.mediation) l[static_cast<Eigen::Index>(*vec.mediation)] = -1.0;
  return l;
}

ComponentEstimate observed_estimate(const JackknifeResult& result, double level) {
  const auto& v = result.estimates;
  const auto i = static_cast<Eigen::Index>(v.observed);
  const double var = result.covariance.sigma(i, i);
  const Interval ci = normal_ci(v.values[i], var, level);
  return {"observed", v.values[i], std::sqrt(std::max(0.0, var)), ci.lo, ci.hi};
}

std::vector<ComponentEstimate> unadjusted_components(const JackknifeResult& result, double level) {
  const auto& v = result.estimates;
  const auto& s = result.covariance.sigma;
  auto make = [&](const std::string& name, double est, double var) {
    const Interval ci = normal_ci(est, var, level);
    return ComponentEstimate{name, est, std::sqrt(std::max(0.0, var)), ci.lo, ci.hi};
  };
  auto diag = [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    return s(ii, ii);
  };
  std::vector<ComponentEstimate> out;
  out.push_back(make(kSamplingVariability, 0.0, diag(v.observed)));
  out.push_back(make(kCovariateShift, result.full.covariate_shift, diag(v.covariate)));
  if (v.mediation) out.push_back(make(kMediationShift, *result.full.mediation_shift, diag(*v.mediation)));
  const Eigen::VectorXd l = residual_combination(v);
  out.push_back(make(kResidual, result.full.residual, l.dot(s * l)));
  return out;
}

}  // namespace shiftdiag
