#include "shiftdiag/selectadj.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "shiftdiag/error.hpp"
#include "shiftdiag/normal.hpp"

namespace shiftdiag {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log P(Z in (lo, hi)) for Z ~ N(mean, sd^2), infinite ends allowed.
double log_mass(double lo, double hi, double mean, double sd) {
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  if (!(a < b)) return kNegInf;
  if (std::isinf(a) && std::isinf(b)) return 0.0;
  if (std::isinf(a)) return normal::log_cdf(b);
  if (std::isinf(b)) return normal::log_sf(a);
  return normal::log_interval(a, b);
}

// log P(|W| > z) for W ~ N(mean, sd^2).
double log_two_sided_tail(double mean, double sd, double z) {
  if (sd == 0.0) return std::abs(mean) > z ? 0.0 : kNegInf;
  return normal::log_add(normal::log_sf((z - mean) / sd), normal::log_cdf((-z - mean) / sd));
}

}  // namespace

SelectionModel SelectionModel::make(double alpha0, std::string label, double observed_z) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) throw ValidationError("alpha0 must lie in (0, 1)");
  SelectionModel m;
  m.alpha0 = alpha0;
  m.z_threshold = normal::quantile(1.0 - alpha0 / 2.0);
  m.statistic_label = std::move(label);
  m.observed_z = observed_z;
  if (!(std::abs(observed_z) > m.z_threshold)) {
    std::ostringstream os;
    os << "selection event did not occur: |z| = " << std::abs(observed_z)
       << " does not exceed " << m.z_threshold;
    throw SelectionError(os.str());
  }
  return m;
}

double truncated_prob(double t, double c, double theta1, double tau, const Eigen::Matrix2d& sigma) {
  const double s11 = sigma(0, 0);
  if (!(s11 > 0.0)) throw SelectionError("truncated_prob: component variance must be positive");
  if (tau < 0.0) throw SelectionError("truncated_prob: threshold must be nonnegative");
  const double sd = std::sqrt(s11);
  const double a = sigma(0, 1) / s11;
  constexpr double inf = std::numeric_limits<double>::infinity();

  // Truncation set {Z : |a (Z - c) + theta1| > tau} as (-inf, lower) u (upper, inf).
  double lower = 0.0;
  double upper = 0.0;
  if (a == 0.0) {
    if (!(std::abs(theta1) > tau)) throw SelectionError("selection event incompatible with the observed statistic");
    lower = inf;
    upper = inf;
  } else {
    const double r1 = c + (tau - theta1) / a;
    const double r2 = c + (-tau - theta1) / a;
    lower = std::min(r1, r2);
    upper = std::max(r1, r2);
  }

  const double log_den = normal::log_add(log_mass(-inf, lower, t, sd), log_mass(upper, inf, t, sd));
  // Deep-tail masses are fine in log space; only an empty event is not.
  if (!(log_den > kNegInf))
    throw SelectionError("selection event incompatible with the candidate mean");
  const double log_num = normal::log_add(log_mass(-inf, std::min(c, lower), t, sd),
                                         log_mass(upper, c, t, sd));
  return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

Interval invert_ci(double c, double theta1, double tau, const Eigen::Matrix2d& sigma, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  const double sd = std::sqrt(sigma(0, 0));
  auto p = [&](double t) { return truncated_prob(t, c, theta1, tau, sigma); };

  constexpr int kGrid = 81;
  double prev = 2.0;
  for (int i = 0; i < kGrid; ++i) {
    const double t = c + sd * (-10.0 + 20.0 * i / (kGrid - 1));
    const double v = p(t);
    if (v > prev + 1e-9) throw SelectionError("truncated probability is not monotone in the mean");
    prev = v;
  }

  auto solve = [&](double target) {
    double lo = c - sd;
    double hi = c + sd;
    for (int k = 0; p(lo) < target; ++k) {
      if (k > 60) throw SelectionError("could not bracket the interval endpoint");
      lo = c - (c - lo) * 2.0;
    }
    for (int k = 0; p(hi) > target; ++k) {
      if (k > 60) throw SelectionError("could not bracket the interval endpoint");
      hi = c + (hi - c) * 2.0;
    }
    const double tol = 1e-8 * sd;
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (p(mid) >= target)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  return {solve(1.0 - alpha / 2.0), solve(alpha / 2.0)};
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& options) {
  const auto n = x0.size();
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> values(static_cast<std::size_t>(n + 1));
  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = options.initial_step.size() == n ? options.initial_step[i] : 1e-3;
    simplex[static_cast<std::size_t>(i + 1)][i] += step;
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  while (true) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double diameter = 0.0;
    for (const auto& v : simplex) diameter = std::max(diameter, (v - simplex[best]).norm());
    if (diameter < options.diameter_tolerance &&
        std::abs(values[worst] - values[best]) < options.value_tolerance) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= options.max_evaluations) break;
    ++res.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i : order)
      if (i != worst) centroid += simplex[i];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd contracted = outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                                               : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(it - values.begin());
  res.x = simplex[idx];
  res.value = values[idx];
  return res;
}

double profiled_log_likelihood(const Eigen::VectorXd& delta, const Eigen::VectorXd& estimate,
                               const Eigen::MatrixXd& s, const Eigen::VectorXd& cross, double z,
                               double threshold) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  const Eigen::VectorXd b = ldlt.solve(cross);
  const Eigen::VectorXd diff = estimate - delta;
  const double quad = diff.dot(ldlt.solve(diff));
  const double mean = z + b.dot(delta - estimate);
  const double sd = std::sqrt(std::max(0.0, b.dot(s * b)));
  return -0.5 * quad - log_two_sided_tail(mean, sd, threshold);
}

SelectiveMleResult selective_mle(const Eigen::VectorXd& estimate, const Eigen::MatrixXd& s,
                                 const Eigen::VectorXd& cross, double z, double threshold) {
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
    throw SelectionError("component covariance is not invertible");
  SelectiveMleResult out;
  const Eigen::VectorXd b = ldlt.solve(cross);
  if (b.isZero(0.0)) {
    out.estimate = estimate;
    out.log_likelihood = profiled_log_likelihood(estimate, estimate, s, cross, z, threshold);
    out.converged = true;
    return out;
  }
  NelderMeadOptions opts;
  opts.initial_step = (0.1 * s.diagonal().cwiseSqrt()).cwiseMax(1e-3);
  const auto nm = nelder_mead(
      [&](const Eigen::VectorXd& d) { return -profiled_log_likelihood(d, estimate, s, cross, z, threshold); },
      estimate, opts);
  if (!nm.converged) {
    std::ostringstream os;
    os << "selective MLE did not converge after " << nm.evaluations
       << " evaluations; best iterate (";
    for (Eigen::Index i = 0; i < nm.x.size(); ++i) os << (i ? ", " : "") << nm.x[i];
    os << ")";
    throw SelectionError(os.str());
  }
  out.estimate = nm.x;
  out.log_likelihood = -nm.value;
  out.iterations = nm.iterations;
  out.evaluations = nm.evaluations;
  out.converged = true;
  return out;
}

AdjustedDecomposition adjust_for_selection(const EstimatorVector& vec,
                                           const JackknifeCovariance& cov,
                                           const SelectionModel& model, double level) {
  if (!vec.selection) throw SelectionError("estimator vector has no selection statistic");
  const auto zi = static_cast<Eigen::Index>(*vec.selection);
  std::vector<Eigen::Index> idx{static_cast<Eigen::Index>(vec.observed),
                                static_cast<Eigen::Index>(vec.covariate)};
  if (vec.mediation) idx.push_back(static_cast<Eigen::Index>(*vec.mediation));
  const auto k = static_cast<Eigen::Index>(idx.size());

  const Eigen::MatrixXd& sigma = cov.sigma;
  Eigen::VectorXd est(k);
  Eigen::MatrixXd s(k, k);
  Eigen::VectorXd cross(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    est[i] = vec.values[idx[static_cast<std::size_t>(i)]];
    cross[i] = sigma(idx[static_cast<std::size_t>(i)], zi);
    for (Eigen::Index j = 0; j < k; ++j)
      s(i, j) = sigma(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  const double z = vec.values[zi];
  const SelectiveMleResult mle = selective_mle(est, s, cross, z, model.z_threshold);

  AdjustedDecomposition out;
  out.iterations = mle.iterations;
  out.evaluations = mle.evaluations;
  out.converged = mle.converged;
  out.discrepancy = mle.estimate[0];
  out.covariate_shift = mle.estimate[1];
  if (vec.mediation) out.mediation_shift = mle.estimate[2];
  const double observed = est[0];
  out.sampling_variability = observed - out.discrepancy;
  out.residual = out.discrepancy - out.covariate_shift - out.mediation_shift.value_or(0.0);

  const double alpha = 1.0 - level;
  const double var_z = sigma(zi, zi);
  auto interval_for = [&](const Eigen::VectorXd& l) {
    Eigen::Matrix2d block;
    block(0, 0) = l.dot(s * l);
    block(0, 1) = block(1, 0) = l.dot(cross);
    block(1, 1) = var_z;
    const double c = l.dot(est);
    return std::make_pair(invert_ci(c, z, model.z_threshold, block, alpha), std::sqrt(block(0, 0)));
  };
  auto unit = [&](Eigen::Index i) {
    Eigen::VectorXd l = Eigen::VectorXd::Zero(k);
    l[i] = 1.0;
    return l;
  };

  const auto [disc_ci, disc_se] = interval_for(unit(0));
  out.discrepancy_estimate = {"discrepancy", out.discrepancy, disc_se, disc_ci.lo, disc_ci.hi};
  out.components.push_back({kSamplingVariability, out.sampling_variability, disc_se,
                            observed - disc_ci.hi, observed - disc_ci.lo});
  const auto [cov_ci, cov_se] = interval_for(unit(1));
  out.components.push_back({kCovariateShift, out.covariate_shift, cov_se, cov_ci.lo, cov_ci.hi});
  if (vec.mediation) {
    const auto [med_ci, med_se] = interval_for(unit(2));
    out.components.push_back({kMediationShift, *out.mediation_shift, med_se, med_ci.lo, med_ci.hi});
  }
  Eigen::VectorXd lr = -Eigen::VectorXd::Ones(k);
  lr[0] = 1.0;
  const auto [res_ci, res_se] = interval_for(lr);
  out.components.push_back({kResidual, out.residual, res_se, res_ci.lo, res_ci.hi});
  return out;
}

}  // namespace shiftdiag
