#pragma once

// Brute-force reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <Eigen/LU>

#include "shiftdiag/balance.hpp"
#include "shiftdiag/analysis_spec.hpp"
#include "shiftdiag/dataset.hpp"
#include "shiftdiag/random.hpp"

namespace oracles {

using namespace shiftdiag;

inline MomentConstraintSet make_set(const Eigen::MatrixXd& c, const Eigen::VectorXd& b) {
  MomentConstraintSet s;
  s.features = c;
  s.targets = b;
  for (Eigen::Index j = 0; j < c.cols(); ++j) s.labels.push_back("c" + std::to_string(j));
  return s;
}

inline Eigen::VectorXd softmax_of_dual(const MomentConstraintSet& s, const Eigen::VectorXd& gamma) {
  Eigen::VectorXd eta = s.features * gamma;
  eta.array() -= eta.maxCoeff();
  Eigen::VectorXd w = eta.array().exp();
  return w / w.sum();
}

inline double entropy(const Eigen::VectorXd& w) {
  double e = 0;
  for (double v : w)
    if (v > 0) e += v * std::log(v);
  return e;
}

// Max standardized violation, standardizing with the replication features.
inline double standardized_residual(const MomentConstraintSet& s, const Eigen::VectorXd& w) {
  double worst = 0;
  const double n = static_cast<double>(s.features.rows());
  for (Eigen::Index j = 0; j < s.features.cols(); ++j) {
    const auto col = s.features.col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / n);
    worst = std::max(worst, std::abs(w.dot(col) - s.targets[j]) / sd);
  }
  return worst;
}

// Projection onto {w >= 0, sum w = 1, C'w = b} by Dykstra's alternating
// projections between the affine set and the orthant.
struct FeasibleProjector {
  Eigen::MatrixXd m;  // (d+1) x n
  Eigen::VectorXd r;
  Eigen::MatrixXd pinv;

  FeasibleProjector(const Eigen::MatrixXd& c, const Eigen::VectorXd& b) {
    const Eigen::Index n = c.rows(), d = c.cols();
    m.resize(d + 1, n);
    m.row(0).setOnes();
    m.bottomRows(d) = c.transpose();
    r.resize(d + 1);
    r[0] = 1.0;
    r.tail(d) = b;
    pinv = m.transpose() * (m * m.transpose()).inverse();
  }

  Eigen::VectorXd affine(const Eigen::VectorXd& w) const { return w - pinv * (m * w - r); }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x0, int sweeps = 4000) const {
    Eigen::VectorXd x = x0, q = Eigen::VectorXd::Zero(x0.size());
    for (int k = 0; k < sweeps; ++k) {
      const Eigen::VectorXd y = affine(x);
      const Eigen::VectorXd z = (y + q).cwiseMax(0.0);
      q = y + q - z;
      x = z;
    }
    return affine(x).cwiseMax(0.0);
  }

  double violation(const Eigen::VectorXd& w) const { return (m * w - r).cwiseAbs().maxCoeff(); }
};

// Projected-gradient descent of sum w log w over the feasible polytope.
inline Eigen::VectorXd projected_gradient_oracle(const Eigen::MatrixXd& c, const Eigen::VectorXd& b,
                                          const Eigen::VectorXd& start) {
  const FeasibleProjector proj(c, b);
  Eigen::VectorXd w = proj(start);
  for (int it = 0; it < 3000; ++it) {
    const Eigen::VectorXd g =
        w.unaryExpr([](double v) { return std::log(std::max(v, 1e-12)) + 1.0; });
    w = proj(w - 0.3 / std::sqrt(it + 1.0) * g, 100);
  }
  return proj(w);
}

// Independent stacked design for f = (1, x1), g = (1, x1, x2, slot:2..p),
// built straight from the columns.
inline Eigen::MatrixXd oracle_design(const StudyDataset& d) {
  const std::size_t p = d.p();
  const auto& x1 = d.column("x1").values;
  const auto& x2 = d.column("x2").values;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.n() * p),
                                            static_cast<Eigen::Index>(2 + 3 + p - 1));
  for (std::size_t i = 0; i < d.n(); ++i)
    for (std::size_t l = 0; l < p; ++l) {
      const auto r = static_cast<Eigen::Index>(i * p + l);
      const double t = d.treatment()[i];
      x(r, 0) = t;
      x(r, 1) = t * x1[i];
      x(r, 2) = 1.0;
      x(r, 3) = x1[i];
      x(r, 4) = x2[i];
      if (l > 0) x(r, static_cast<Eigen::Index>(4 + l)) = 1.0;
    }
  return x;
}

inline Eigen::VectorXd stacked_response(const StudyDataset& d) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(d.n() * d.p()));
  for (std::size_t i = 0; i < d.n(); ++i)
    for (std::size_t l = 0; l < d.p(); ++l)
      y[static_cast<Eigen::Index>(i * d.p() + l)] =
          d.outcomes()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
  return y;
}

// Normal equations solved by full pivoting.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& row_w) {
  const Eigen::MatrixXd xtw = x.transpose() * row_w.asDiagonal();
  return Eigen::FullPivLU<Eigen::MatrixXd>(xtw * x).solve(xtw * y);
}

// Spec whose design oracle_design reproduces.
inline AnalysisSpec custom_spec(std::size_t p) {
  AnalysisSpec s;
  s.treatment_column = "t";
  for (std::size_t l = 1; l <= p; ++l) s.outcome_columns.push_back("y" + std::to_string(l));
  s.regression_template = RegressionTemplate::kCustom;
  s.custom.f = {"1", "x1"};
  s.custom.g = {"1", "x1", "x2"};
  for (std::size_t l = 2; l <= p; ++l) s.custom.g.push_back("slot:" + std::to_string(l));
  return s;
}

inline Eigen::VectorXd random_weights(Rng& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (auto& v : w) v = e(rng);
  return w / w.sum();
}

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Closed form with plain (not log-space) normal CDFs: truncation set
// {z : |a (z - c) + theta1| > tau}.
inline double plain_truncated_prob(double t, double c, double theta1, double tau, const Eigen::Matrix2d& s) {
  const double sd = std::sqrt(s(0, 0)), a = s(0, 1) / s(0, 0);
  const double r1 = c + (tau - theta1) / a, r2 = c + (-tau - theta1) / a;
  const double lo = std::min(r1, r2), hi = std::max(r1, r2);
  auto F = [&](double x) { return phi_cdf((x - t) / sd); };
  const double den = F(lo) + (1.0 - F(hi));
  const double num = F(std::min(c, lo)) + std::max(0.0, F(c) - F(hi));
  return num / den;
}

struct McEstimate {
  double p = 0.0;
  double se = 0.0;
};

// Conditional frequency of {Z <= c} among draws Z ~ N(t, s11) that land in
// the selection event.
inline McEstimate monte_carlo_prob(double t, double c, double theta1, double tau, const Eigen::Matrix2d& s,
                            std::size_t draws, std::uint64_t seed) {
  Rng rng = stream_rng(seed, 0);
  std::normal_distribution<double> g(t, std::sqrt(s(0, 0)));
  const double a = s(0, 1) / s(0, 0);
  std::size_t kept = 0, below = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double z = g(rng);
    if (std::abs(a * (z - c) + theta1) > tau) {
      ++kept;
      if (z <= c) ++below;
    }
  }
  McEstimate e;
  e.p = static_cast<double>(below) / static_cast<double>(kept);
  e.se = std::sqrt(e.p * (1.0 - e.p) / static_cast<double>(kept));
  return e;
}

// Profiled log-likelihood of a single component, from the definition.
inline double one_dim_objective(double delta, double est, double s, double cross, double z, double thr) {
  const double b = cross / s;
  const double mean = z + b * (delta - est);
  const double sd = std::abs(b) * std::sqrt(s);
  const double tail = phi_cdf((-thr - mean) / sd) + phi_cdf((mean - thr) / sd);
  return -0.5 * (est - delta) * (est - delta) / s - std::log(tail);
}

inline Eigen::Matrix2d cov2(double s11, double s12, double s22 = 1.0) {
  Eigen::Matrix2d m;
  m << s11, s12, s12, s22;
  return m;
}

struct GridInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// Scans t on a 1e-5 grid over c +- 10 for the crossings of 1 - alpha/2 and alpha/2.
inline GridInterval grid_interval(double c, double theta1, double tau, const Eigen::Matrix2d& s, double alpha) {
  GridInterval g{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double half = 10.0 * std::sqrt(s(0, 0));
  const double step = 1e-5 * std::max(1.0, std::sqrt(s(0, 0)));
  double prev_t = c - half, prev_p = plain_truncated_prob(prev_t, c, theta1, tau, s);
  for (double t = c - half + step; t <= c + half; t += step) {
    const double p = plain_truncated_prob(t, c, theta1, tau, s);
    if (prev_p >= 1.0 - alpha / 2 && p < 1.0 - alpha / 2) g.lo = 0.5 * (t + prev_t);
    if (prev_p >= alpha / 2 && p < alpha / 2) g.hi = 0.5 * (t + prev_t);
    prev_t = t;
    prev_p = p;
  }
  return g;
}

// Coarse grid over +-10 sd, then successively finer grids around the best point.
inline double grid_mle(double est, double s, double cross, double z, double thr) {
  double best = est, width = 10.0 * std::sqrt(s);
  for (int level = 0; level < 6; ++level) {
    double arg = best, val = -std::numeric_limits<double>::infinity();
    for (int i = -1000; i <= 1000; ++i) {
      const double d = best + width * i / 1000.0;
      const double v = one_dim_objective(d, est, s, cross, z, thr);
      if (v > val) {
        val = v;
        arg = d;
      }
    }
    best = arg;
    width /= 100.0;
  }
  return best;
}

}  // namespace oracles
