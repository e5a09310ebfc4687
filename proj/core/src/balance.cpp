#include "shiftdiag/balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shiftdiag/error.hpp"

namespace shiftdiag {
namespace {

struct BaseFeatures {
  Eigen::MatrixXd values;  // n x k
  std::vector<std::string> labels;
};

// phi (or psi) without the treatment interactions.
BaseFeatures base_features(const StudyDataset& data, const std::vector<MomentSpec>& moments) {
  std::vector<Eigen::VectorXd> cols;
  BaseFeatures out;
  const auto n = static_cast<Eigen::Index>(data.n());
  for (const auto& m : moments) {
    const Column& c = data.column(m.column);
    switch (m.moment) {
      case Moment::kMean:
        cols.push_back(Eigen::Map<const Eigen::VectorXd>(c.values.data(), n));
        out.labels.push_back(c.name);
        break;
      case Moment::kMeanAndSecondMoment: {
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(c.values.data(), n);
        cols.push_back(v);
        cols.push_back(v.array().square().matrix());
        out.labels.push_back(c.name);
        out.labels.push_back(c.name + "^2");
        break;
      }
      case Moment::kOneHot:
        // The first declared level is the reference.
        for (std::size_t lvl = 1; lvl < c.levels.size(); ++lvl) {
          Eigen::VectorXd v(n);
          for (Eigen::Index i = 0; i < n; ++i)
            v[i] = c.codes[static_cast<std::size_t>(i)] == static_cast<int>(lvl) ? 1.0 : 0.0;
          cols.push_back(std::move(v));
          out.labels.push_back(c.name + "=" + c.levels[lvl]);
        }
        break;
    }
  }
  out.values.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = cols[j];
  return out;
}

// Levels present in the original arm but absent from the replication arm.
void check_one_hot_support(const StudyDataset& original, const StudyDataset& replication,
                           const std::vector<MomentSpec>& moments) {
  for (const auto& m : moments) {
    if (m.moment != Moment::kOneHot) continue;
    const Column& a = original.column(m.column);
    const Column& b = replication.column(m.column);
    const std::size_t levels = a.levels.size();
    std::vector<int> seen_a(2 * levels, 0), seen_b(2 * levels, 0);
    for (std::size_t i = 0; i < a.codes.size(); ++i)
      seen_a[original.treatment()[i] * levels + static_cast<std::size_t>(a.codes[i])] = 1;
    for (std::size_t i = 0; i < b.codes.size(); ++i)
      seen_b[replication.treatment()[i] * levels + static_cast<std::size_t>(b.codes[i])] = 1;
    for (std::size_t lvl = 0; lvl < levels; ++lvl) {
      const std::string label = m.column + "=" + a.levels[lvl];
      const bool in_a = seen_a[lvl] || seen_a[levels + lvl];
      const bool in_b = seen_b[lvl] || seen_b[levels + lvl];
      if (in_a && !in_b)
        throw InfeasibleError("level '" + a.levels[lvl] + "' of column '" + m.column +
                                  "' occurs in the original study but not in the replication",
                              label);
      for (int arm = 0; arm < 2; ++arm) {
        if (seen_a[arm * levels + lvl] && !seen_b[arm * levels + lvl])
          throw InfeasibleError("level '" + a.levels[lvl] + "' of column '" + m.column +
                                    "' is missing from the replication " +
                                    (arm ? "treated" : "control") + " arm",
                                label + (arm ? " [treated]" : " [control]"));
      }
    }
  }
}

// Assembles [T, base_1, T*base_1, base_2, T*base_2, ...] for one dataset.
Eigen::MatrixXd assemble(const StudyDataset& data, const std::vector<BaseFeatures>& blocks) {
  const auto n = static_cast<Eigen::Index>(data.n());
  Eigen::Index d = 1;
  for (const auto& b : blocks) d += 2 * b.values.cols();
  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = data.treatment()[static_cast<std::size_t>(i)];
  out.col(0) = t;
  Eigen::Index col = 1;
  for (const auto& b : blocks) {
    const Eigen::Index k = b.values.cols();
    out.middleCols(col, k) = b.values;
    out.middleCols(col + k, k) = b.values.array().colwise() * t.array();
    col += 2 * k;
  }
  return out;
}

std::vector<std::string> assemble_labels(const std::vector<BaseFeatures>& blocks) {
  std::vector<std::string> labels{"T"};
  for (const auto& b : blocks) {
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    for (const auto& l : b.labels) labels.push_back("T*" + l);
  }
  return labels;
}

MomentConstraintSet build(const StudyDataset& original, const StudyDataset& replication,
                          const std::vector<const std::vector<MomentSpec>*>& groups) {
  for (const auto* g : groups) check_one_hot_support(original, replication, *g);
  std::vector<BaseFeatures> src, dst;
  for (const auto* g : groups) {
    src.push_back(base_features(original, *g));
    dst.push_back(base_features(replication, *g));
  }
  MomentConstraintSet set;
  set.features = assemble(replication, dst);
  set.targets = assemble(original, src).colwise().mean().transpose();
  set.labels = assemble_labels(dst);
  return set;
}

}  // namespace

MomentConstraintSet build_covariate_constraints(const StudyDataset& original,
                                                const StudyDataset& replication,
                                                const AnalysisSpec& spec) {
  return build(original, replication, {&spec.covariate_moments});
}

MomentConstraintSet build_mediator_constraints(const StudyDataset& original,
                                               const StudyDataset& replication,
                                               const AnalysisSpec& spec) {
  return build(original, replication, {&spec.covariate_moments, &spec.mediator_moments});
}

WeightSolution solve_entropy_weights(const MomentConstraintSet& constraints,
                                     const BalanceOptions& options) {
  const Eigen::Index n = constraints.features.rows();
  const Eigen::Index d = constraints.features.cols();
  if (n < 1) throw ValidationError("balancing needs at least one replication unit");
  if (d < 1) throw ValidationError("balancing needs at least one constraint");
  if (constraints.targets.size() != d || static_cast<Eigen::Index>(constraints.labels.size()) != d)
    throw ValidationError("constraint targets/labels do not match feature columns");
  if (!constraints.targets.allFinite()) throw ValidationError("non-finite balancing target");

  // Standardize on the replication sample.
  const Eigen::RowVectorXd center = constraints.features.colwise().mean();
  Eigen::MatrixXd c = constraints.features.rowwise() - center;
  Eigen::RowVectorXd scale = (c.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double ref = std::max(1.0, std::abs(center[j]));
    if (scale[j] <= 1e-12 * ref) {
      const std::string& label = constraints.labels[static_cast<std::size_t>(j)];
      if (std::abs(constraints.targets[j] - center[j]) > 1e-12 * ref)
        throw InfeasibleError("feature '" + label +
                                  "' is constant in the replication but its target differs",
                              label);
      throw SingularError("degenerate balancing feature '" + label +
                          "': constant across replication units");
    }
  }
  c.array().rowwise() /= scale.array();
  const Eigen::VectorXd b =
      ((constraints.targets.transpose() - center).array() / scale.array()).transpose();

  if (d > 1) {
    const Eigen::MatrixXd corr = c.transpose() * c / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    const auto& ev = eig.eigenvalues();
    if (ev[0] < 1e-10 * ev[d - 1]) {
      const Eigen::VectorXd null = eig.eigenvectors().col(0);
      const double peak = null.cwiseAbs().maxCoeff();
      std::string names;
      for (Eigen::Index j = 0; j < d; ++j)
        if (std::abs(null[j]) > 0.1 * peak)
          names += (names.empty() ? "" : ", ") + constraints.labels[static_cast<std::size_t>(j)];
      throw SingularError("collinear balancing features: " + names);
    }
  }

  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(d);
  if (options.warm_start.size() == d) gamma = options.warm_start.cwiseProduct(scale.transpose());

  Eigen::VectorXd score(n), w(n);
  // Evaluates G at gamma, filling the normalized weights.
  auto objective = [&](const Eigen::VectorXd& g, Eigen::VectorXd& weights) {
    score.noalias() = c * g;
    const double top = score.maxCoeff();
    weights = (score.array() - top).exp().matrix();
    const double z = weights.sum();
    weights /= z;
    return top + std::log(z) - g.dot(b);
  };

  WeightSolution sol;
  sol.labels = constraints.labels;
  double value = objective(gamma, w);
  sol.objective_trace.push_back(value);
  Eigen::VectorXd grad = c.transpose() * w - b;
  Eigen::VectorXd trial_w(n);
  Eigen::VectorXd trial_grad(d);
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (grad.cwiseAbs().maxCoeff() <= options.gradient_tolerance) break;
    const Eigen::VectorXd mean = grad + b;
    Eigen::MatrixXd hess = c.transpose() * (w.asDiagonal() * c);
    hess.noalias() -= mean * mean.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    const auto& diag = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || diag.minCoeff() <= options.ridge * std::max(1.0, diag.maxCoeff())) {
      hess.diagonal().array() += options.ridge;
      ldlt.compute(hess);
    }
    const Eigen::VectorXd step = ldlt.solve(-grad);

    // Near the optimum the decrease in G falls below rounding; there a step
    // is judged by the gradient instead.
    const double flat = 1e-13 * std::max(1.0, std::abs(value));
    const double grad_norm = grad.cwiseAbs().maxCoeff();
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      const Eigen::VectorXd candidate = gamma + t * step;
      const double trial = objective(candidate, trial_w);
      if (!std::isfinite(trial)) continue;
      bool ok = trial <= value;
      if (!ok && trial - value <= flat) {
        trial_grad.noalias() = c.transpose() * trial_w - b;
        ok = trial_grad.cwiseAbs().maxCoeff() < grad_norm;
      }
      if (ok) {
        gamma = candidate;
        value = trial;
        w.swap(trial_w);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    sol.objective_trace.push_back(value);
    grad.noalias() = c.transpose() * w - b;
  }

  Eigen::Index worst = 0;
  const double residual = grad.cwiseAbs().maxCoeff(&worst);
  if (!(residual <= options.feasibility_tolerance)) {
    const std::string& label = constraints.labels[static_cast<std::size_t>(worst)];
    throw InfeasibleError("balancing constraints infeasible: residual " + std::to_string(residual) +
                              " on '" + label + "'",
                          label);
  }

  sol.weights = w;
  sol.dual = gamma.cwiseQuotient(scale.transpose());
  sol.iterations = iter;
  sol.balance_residual = residual;
  sol.entropy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (w[i] > 0.0) sol.entropy += w[i] * std::log(w[i]);
  sol.effective_sample_size = 1.0 / w.squaredNorm();
  return sol;
}

}  // namespace shiftdiag
