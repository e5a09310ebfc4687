#include "shiftdiag/regress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shiftdiag/error.hpp"

namespace shiftdiag {
namespace {

// One evaluated feature expression of a regression template.
struct Feature {
  enum class Kind { kIntercept, kProduct, kSlot, kLevel } kind = Kind::kIntercept;
  std::vector<const std::vector<double>*> factors;
  std::size_t slot = 0;
  const std::vector<int>* codes = nullptr;
  int level = 0;
  std::string name;

  double operator()(std::size_t unit, std::size_t l) const {
    switch (kind) {
      case Kind::kIntercept: return 1.0;
      case Kind::kSlot: return l == slot ? 1.0 : 0.0;
      case Kind::kLevel: return (*codes)[unit] == level ? 1.0 : 0.0;
      case Kind::kProduct: {
        double v = 1.0;
        for (const auto* f : factors) v *= (*f)[unit];
        return v;
      }
    }
    return 0.0;
  }
};

Feature parse_feature(const std::string& expr, const StudyDataset& data) {
  Feature f;
  f.name = expr;
  if (expr == "1") return f;
  if (expr.rfind("slot:", 0) == 0) {
    f.kind = Feature::Kind::kSlot;
    f.slot = static_cast<std::size_t>(std::stoi(expr.substr(5)) - 1);
    return f;
  }
  if (auto eq = expr.find('='); eq != std::string::npos) {
    const Column& c = data.column(expr.substr(0, eq));
    const auto lvl = expr.substr(eq + 1);
    f.kind = Feature::Kind::kLevel;
    f.codes = &c.codes;
    f.level = static_cast<int>(std::find(c.levels.begin(), c.levels.end(), lvl) - c.levels.begin());
    return f;
  }
  f.kind = Feature::Kind::kProduct;
  std::size_t start = 0;
  for (;;) {
    const auto star = expr.find('*', start);
    const Column& c = data.column(expr.substr(start, star - start));
    if (c.categorical) throw ValidationError("feature '" + expr + "' uses a categorical column");
    f.factors.push_back(&c.values);
    if (star == std::string::npos) break;
    start = star + 1;
  }
  return f;
}

FitResult solve(const StackedDesign& design, const Eigen::VectorXd& unit_weights, bool weighted) {
  const std::size_t k = design.columns();
  if (static_cast<std::size_t>(unit_weights.size()) != design.units)
    throw ValidationError("weight vector length " + std::to_string(unit_weights.size()) +
                          " does not match unit count " + std::to_string(design.units));
  for (Eigen::Index i = 0; i < unit_weights.size(); ++i)
    if (!(unit_weights[i] >= 0.0) || !std::isfinite(unit_weights[i]))
      throw ValidationError("unit weights must be finite and nonnegative");

  const bool aliased = design.reparam.size() > 0;
  const Eigen::Index free = aliased ? design.reparam.cols() : static_cast<Eigen::Index>(k);
  const auto rows = static_cast<Eigen::Index>(design.response.size());

  Eigen::MatrixXd a = aliased ? Eigen::MatrixXd(design.matrix * design.reparam) : design.matrix;
  Eigen::VectorXd b = design.response;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double s = std::sqrt(unit_weights[design.unit_index[r]]);
    a.row(r) *= s;
    b[r] *= s;
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd r =
      qr.matrixQR().topRows(free).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
  if (!(smax > 0.0) || smin < kRankTolerance * smax) {
    Eigen::VectorXd null = svd.matrixV().col(free - 1);
    if (aliased) null = design.reparam * null;
    const double peak = null.cwiseAbs().maxCoeff();
    std::string names;
    for (Eigen::Index j = 0; j < null.size(); ++j)
      if (std::abs(null[j]) > 0.1 * peak)
        names += (names.empty() ? "" : ", ") + design.column_names[j];
    throw SingularError("regression design is rank deficient; collinear columns: " + names);
  }

  Eigen::VectorXd qtb = qr.householderQ().transpose() * b;
  Eigen::VectorXd eta = r.triangularView<Eigen::Upper>().solve(qtb.head(free));

  FitResult fit;
  fit.coefficients = aliased ? Eigen::VectorXd(design.reparam * eta) : eta;
  fit.theta = fit.coefficients[0];
  fit.beta = fit.coefficients.tail(static_cast<Eigen::Index>(design.dim_g));
  fit.gram_condition = (smax / smin) * (smax / smin);
  fit.weighted = weighted;
  return fit;
}

}  // namespace

StackedDesign build_design(const StudyDataset& data, const AnalysisSpec& spec) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  if (p != spec.outcome_columns.size())
    throw ValidationError("dataset has " + std::to_string(p) + " outcome slots, spec declares " +
                          std::to_string(spec.outcome_columns.size()));

  std::vector<std::string> f_names, g_names;
  switch (spec.regression_template) {
    case RegressionTemplate::kTTest:
      f_names = {"1"};
      g_names = {"1"};
      break;
    case RegressionTemplate::kAnova2:
      f_names = {"1"};
      g_names = {"1"};
      for (std::size_t l = 1; l <= p; ++l) g_names.push_back("slot:" + std::to_string(l));
      break;
    case RegressionTemplate::kAncova:
      f_names = {"1"};
      g_names = {"1"};
      for (const auto& c : spec.effective_regression_covariates()) g_names.push_back(c);
      break;
    case RegressionTemplate::kAdjusted:
      f_names = {"1"};
      for (const auto& c : spec.effective_regression_covariates()) f_names.push_back(c);
      g_names = f_names;
      break;
    case RegressionTemplate::kCustom:
      f_names = spec.custom.f;
      g_names = spec.custom.g;
      break;
  }
  if ((spec.regression_template == RegressionTemplate::kTTest ||
       spec.regression_template == RegressionTemplate::kAncova ||
       spec.regression_template == RegressionTemplate::kAdjusted) &&
      p != 1)
    throw ValidationError("template '" + to_string(spec.regression_template) +
                          "' requires a single outcome");

  std::vector<Feature> f_feats, g_feats;
  // The adjusted template centers each covariate at its within-dataset mean.
  std::vector<std::vector<double>> centered_values;
  if (spec.regression_template == RegressionTemplate::kAdjusted) {
    for (std::size_t j = 1; j < f_names.size(); ++j) {
      const Column& c = data.column(f_names[j]);
      const double mean = std::accumulate(c.values.begin(), c.values.end(), 0.0) /
                          static_cast<double>(c.values.size());
      std::vector<double> v(c.values);
      for (auto& x : v) x -= mean;
      centered_values.push_back(std::move(v));
    }
    for (std::size_t j = 0; j < f_names.size(); ++j) {
      Feature feat;
      feat.name = f_names[j];
      if (j > 0) {
        feat.kind = Feature::Kind::kProduct;
        feat.factors = {&centered_values[j - 1]};
      }
      f_feats.push_back(feat);
    }
    g_feats = f_feats;
  } else {
    for (const auto& e : f_names) f_feats.push_back(parse_feature(e, data));
    for (const auto& e : g_names) g_feats.push_back(parse_feature(e, data));
  }

  StackedDesign d;
  d.units = n;
  d.slots = p;
  d.dim_f = f_feats.size();
  d.dim_g = g_feats.size();
  for (const auto& f : f_feats) d.column_names.push_back(f.name == "1" ? "T" : "T*" + f.name);
  for (const auto& g : g_feats) d.column_names.push_back(g.name);

  const auto rows = static_cast<Eigen::Index>(n * p);
  d.matrix.resize(rows, static_cast<Eigen::Index>(d.columns()));
  d.response.resize(rows);
  d.unit_index.resize(static_cast<std::size_t>(rows));
  const auto& t = data.treatment();
  const auto& y = data.outcomes();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < p; ++l) {
      const auto r = static_cast<Eigen::Index>(i * p + l);
      d.unit_index[static_cast<std::size_t>(r)] = static_cast<int>(i);
      d.response[r] = y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
      for (std::size_t j = 0; j < d.dim_f; ++j)
        d.matrix(r, static_cast<Eigen::Index>(j)) = t[i] ? f_feats[j](i, l) : 0.0;
      for (std::size_t j = 0; j < d.dim_g; ++j)
        d.matrix(r, static_cast<Eigen::Index>(d.dim_f + j)) = g_feats[j](i, l);
    }
  }

  if (spec.regression_template == RegressionTemplate::kAnova2) {
    // Free parameters drop the last slot effect: beta_slot_p = -sum of the others.
    const auto k = static_cast<Eigen::Index>(d.columns());
    d.reparam = Eigen::MatrixXd::Zero(k, k - 1);
    for (Eigen::Index j = 0; j < k - 1; ++j) d.reparam(j, j) = 1.0;
    const auto first_slot = static_cast<Eigen::Index>(d.dim_f + 1);
    for (Eigen::Index j = first_slot; j < k - 1; ++j) d.reparam(k - 1, j) = -1.0;
  }
  return d;
}

FitResult fit_wls(const StackedDesign& design) {
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(
      static_cast<Eigen::Index>(design.units), 1.0 / static_cast<double>(design.units));
  return solve(design, uniform, false);
}

FitResult fit_wls(const StackedDesign& design, const Eigen::VectorXd& unit_weights) {
  return solve(design, unit_weights, true);
}

std::size_t coefficient_index(const StackedDesign& design, const std::string& label) {
  if (label == "theta") return 0;
  if (label.rfind("beta:", 0) == 0) {
    const int k = std::stoi(label.substr(5));
    if (k >= 1 && static_cast<std::size_t>(k) <= design.dim_g)
      return design.dim_f + static_cast<std::size_t>(k) - 1;
  }
  throw ValidationError("unknown coefficient '" + label + "'");
}

double coefficient_se(const StackedDesign& design, const FitResult& fit, std::size_t index) {
  const bool aliased = design.reparam.size() > 0;
  const Eigen::MatrixXd a =
      aliased ? Eigen::MatrixXd(design.matrix * design.reparam) : design.matrix;
  const Eigen::Index free = a.cols();
  const Eigen::VectorXd resid = design.response - design.matrix * fit.coefficients;

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(design.units), free);
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    scores.row(design.unit_index[static_cast<std::size_t>(r)]) += resid[r] * a.row(r);

  const Eigen::MatrixXd bread = (a.transpose() * a).ldlt().solve(
      Eigen::MatrixXd::Identity(free, free));
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const double n = static_cast<double>(design.units);
  const Eigen::MatrixXd cov = (n / (n - 1.0)) * bread * meat * bread;

  Eigen::VectorXd pick = Eigen::VectorXd::Zero(free);
  if (aliased)
    pick = design.reparam.row(static_cast<Eigen::Index>(index)).transpose();
  else
    pick[static_cast<Eigen::Index>(index)] = 1.0;
  return std::sqrt(std::max(0.0, pick.dot(cov * pick)));
}

}  // namespace shiftdiag
