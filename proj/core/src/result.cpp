#include "shiftdiag/result.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "shiftdiag/decomp.hpp"
#include "shiftdiag/error.hpp"

namespace shiftdiag {
namespace {

using nlohmann::json;

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_inf(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json component_json(const ComponentEstimate& c) {
  return {{"name", c.name}, {"estimate", c.estimate}, {"se", c.se}, {"ci_lo", c.ci_lo}, {"ci_hi", c.ci_hi}};
}

ComponentEstimate component_from(const json& j) {
  return {j.at("name").get<std::string>(), j.at("estimate").get<double>(), j.at("se").get<double>(),
          j.at("ci_lo").get<double>(), j.at("ci_hi").get<double>()};
}

void write(std::string& out, const json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + json(it.key()).dump() + ": ";
        write(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ",\n";
        first = false;
        out += inner;
        write(out, e, indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      std::string s(buf);
      // Keep integral values recognizably floating point.
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      out += s;
      return;
    }
    default:
      out += j.dump();
  }
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string engine_version() { return SHIFTDIAG_VERSION; }

bool ResultDocument::operator==(const ResultDocument& o) const {
  return spec_hash == o.spec_hash && version == o.version && seed == o.seed && level == o.level &&
         n_original == o.n_original && n_replication == o.n_replication && observed == o.observed &&
         decomposition == o.decomposition && adjusted == o.adjusted && balance == o.balance &&
         overlap == o.overlap && jackknife_failures == o.jackknife_failures && warnings == o.warnings;
}

json to_json(const ResultDocument& doc) {
  json j;
  j["metadata"] = {{"spec_hash", doc.spec_hash},
                   {"engine_version", doc.version},
                   {"seed", doc.seed ? json(*doc.seed) : json(nullptr)},
                   {"level", doc.level},
                   {"n_original", doc.n_original},
                   {"n_replication", doc.n_replication},
                   {"jackknife_failures", doc.jackknife_failures}};
  j["observed"] = component_json(doc.observed);
  j["decomposition"] = json::array();
  for (const auto& c : doc.decomposition) j["decomposition"].push_back(component_json(c));
  if (doc.adjusted) {
    const auto& a = *doc.adjusted;
    json adj{{"alpha0", a.alpha0},
             {"z_threshold", a.z_threshold},
             {"observed_z", a.observed_z},
             {"discrepancy", component_json(a.discrepancy)},
             {"components", json::array()},
             {"optimizer", {{"iterations", a.iterations}, {"evaluations", a.evaluations}, {"converged", a.converged}}}};
    for (const auto& c : a.components) adj["components"].push_back(component_json(c));
    j["adjusted"] = adj;
  } else {
    j["adjusted"] = nullptr;
  }
  j["balance"] = json::array();
  for (const auto& b : doc.balance)
    j["balance"].push_back({{"name", b.name},
                            {"balance_residual", b.balance_residual},
                            {"effective_sample_size", b.effective_sample_size},
                            {"entropy", b.entropy},
                            {"iterations", b.iterations},
                            {"labels", b.labels},
                            {"dual", b.dual}});
  j["overlap"] = json::array();
  for (const auto& c : doc.overlap)
    j["overlap"].push_back({{"column", c.column},
                            {"categorical", c.categorical},
                            {"missing_levels", c.missing_levels},
                            {"original_min", c.original_min},
                            {"original_max", c.original_max},
                            {"replication_min", c.replication_min},
                            {"replication_max", c.replication_max},
                            {"density_ratio_proxy", number_or_null(c.density_ratio_proxy)},
                            {"support_contained", c.support_contained}});
  j["warnings"] = doc.warnings;
  return j;
}

ResultDocument result_from_json(const json& j) {
  try {
    ResultDocument doc;
    const json& m = j.at("metadata");
    doc.spec_hash = m.at("spec_hash").get<std::string>();
    doc.version = m.at("engine_version").get<std::string>();
    if (!m.at("seed").is_null()) doc.seed = m.at("seed").get<std::uint64_t>();
    doc.level = m.at("level").get<double>();
    doc.n_original = m.at("n_original").get<std::size_t>();
    doc.n_replication = m.at("n_replication").get<std::size_t>();
    doc.jackknife_failures = m.at("jackknife_failures").get<std::size_t>();
    doc.observed = component_from(j.at("observed"));
    for (const auto& c : j.at("decomposition")) doc.decomposition.push_back(component_from(c));
    if (!j.at("adjusted").is_null()) {
      const json& a = j.at("adjusted");
      AdjustedSection s;
      s.alpha0 = a.at("alpha0").get<double>();
      s.z_threshold = a.at("z_threshold").get<double>();
      s.observed_z = a.at("observed_z").get<double>();
      s.discrepancy = component_from(a.at("discrepancy"));
      for (const auto& c : a.at("components")) s.components.push_back(component_from(c));
      s.iterations = a.at("optimizer").at("iterations").get<std::size_t>();
      s.evaluations = a.at("optimizer").at("evaluations").get<std::size_t>();
      s.converged = a.at("optimizer").at("converged").get<bool>();
      doc.adjusted = s;
    }
    for (const auto& b : j.at("balance")) {
      BalanceDiagnostics d;
      d.name = b.at("name").get<std::string>();
      d.balance_residual = b.at("balance_residual").get<double>();
      d.effective_sample_size = b.at("effective_sample_size").get<double>();
      d.entropy = b.at("entropy").get<double>();
      d.iterations = b.at("iterations").get<int>();
      d.labels = b.at("labels").get<std::vector<std::string>>();
      d.dual = b.at("dual").get<std::vector<double>>();
      doc.balance.push_back(std::move(d));
    }
    for (const auto& c : j.at("overlap")) {
      ColumnOverlap o;
      o.column = c.at("column").get<std::string>();
      o.categorical = c.at("categorical").get<bool>();
      o.missing_levels = c.at("missing_levels").get<std::vector<std::string>>();
      o.original_min = c.at("original_min").get<double>();
      o.original_max = c.at("original_max").get<double>();
      o.replication_min = c.at("replication_min").get<double>();
      o.replication_max = c.at("replication_max").get<double>();
      o.density_ratio_proxy = number_or_inf(c.at("density_ratio_proxy"));
      o.support_contained = c.at("support_contained").get<bool>();
      doc.overlap.push_back(std::move(o));
    }
    doc.warnings = j.at("warnings").get<std::vector<std::string>>();
    return doc;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed result document: ") + e.what());
  }
}

std::string dump_json(const json& j) {
  std::string out;
  write(out, j, 0);
  out += '\n';
  return out;
}

std::string serialize(const ResultDocument& doc) { return dump_json(to_json(doc)); }

ResultDocument parse_result(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed result document: ") + e.what());
  }
  return result_from_json(j);
}

std::string plot_data_csv(const ResultDocument& doc) {
  std::ostringstream os;
  os << "component,estimate,ci_lo,ci_hi,adjusted\n";
  auto rows = [&](const std::vector<ComponentEstimate>& cs, bool adjusted) {
    for (const auto& c : cs)
      os << c.name << ',' << csv_number(c.estimate) << ',' << csv_number(c.ci_lo) << ','
         << csv_number(c.ci_hi) << ',' << (adjusted ? "true" : "false") << '\n';
  };
  rows(doc.decomposition, false);
  if (doc.adjusted) rows(doc.adjusted->components, true);
  return os.str();
}

}  // namespace shiftdiag
