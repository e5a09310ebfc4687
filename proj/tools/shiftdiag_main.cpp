// shiftdiag command-line entry point.
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "shiftdiag/error.hpp"
#include "shiftdiag/parallel.hpp"
#include "shiftdiag/pipeline.hpp"
#include "shiftdiag/service.hpp"
#include "shiftdiag/simulate.hpp"

namespace sd = shiftdiag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSelection = 4;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sd::ValidationError("cannot write " + path);
  out << text;
  if (!out) throw sd::ValidationError("failed writing " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sd::ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_file(path, text);
}

std::string weights_csv(const Eigen::VectorXd& w) {
  std::ostringstream os;
  os << "unit_index,weight\n";
  char buf[32];
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", w[i]);
    os << i << ',' << buf << '\n';
  }
  return os.str();
}

struct DecomposeArgs {
  std::string original, replication, spec, out, weights_out, mediator_weights_out;
  std::optional<double> alpha0, level;
};

int cmd_decompose(const DecomposeArgs& a) {
  const sd::AnalysisSpec spec = sd::load_analysis_spec(a.spec);
  const sd::StudyDataset d1 = sd::load_dataset(a.original, spec, sd::StudyRole::kOriginal);
  const sd::StudyDataset d2 = sd::load_dataset(a.replication, spec, sd::StudyRole::kReplication);
  sd::PipelineOptions opts;
  opts.level = a.level;
  opts.selection_alpha0 = a.alpha0;
  opts.threads = sd::default_thread_count();
  const sd::PipelineResult result = sd::run_pipeline(d1, d2, spec, opts);
  for (const auto& w : result.document.warnings) std::cerr << "warning: " << w << '\n';
  emit(a.out, sd::serialize(result.document));
  if (!a.weights_out.empty()) write_file(a.weights_out, weights_csv(result.jackknife.full.covariate_weights.weights));
  if (!a.mediator_weights_out.empty()) {
    if (!result.jackknife.full.mediator_weights)
      throw sd::ValidationError("no mediator weights: mediators were not balanced");
    write_file(a.mediator_weights_out, weights_csv(result.jackknife.full.mediator_weights->weights));
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string setting = "s1i";
  std::string methods = "standard";
  double sigma = 1.0;
  double nu = 0.1;
  std::size_t reps = 500;
  std::size_t n1 = 500;
  std::size_t n2 = 500;
  std::uint64_t seed = 1;
  double level = 0.90;
  std::string out, csv_out;
};

int cmd_simulate(const SimulateArgs& a) {
  sd::DgpConfig config;
  sd::parse_setting(a.setting, config);
  config.sigma = a.sigma;
  config.nu = a.nu;
  config.n1 = a.n1;
  config.seed = a.seed;
  std::vector<sd::Method> methods;
  std::stringstream ss(a.methods);
  for (std::string m; std::getline(ss, m, ',');) methods.push_back(sd::parse_method(m));
  const bool power = methods.size() == 1 && methods[0] == sd::Method::kPowerCalculated;
  if (power)
    config.sampling = sd::PowerCalculated{};
  else
    config.sampling = sd::FixedN2{a.n2};
  sd::CoverageOptions opts;
  opts.threads = sd::default_thread_count();
  const auto reports = sd::run_coverage(config, methods, a.reps, a.level, opts);
  nlohmann::json j = nlohmann::json::array();
  std::string csv;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    j.push_back(reports[i].to_json());
    csv += reports[i].to_csv(i == 0);
  }
  emit(a.out, sd::dump_json(reports.size() == 1 ? j[0] : j));
  if (!a.csv_out.empty()) write_file(a.csv_out, csv);
  return kExitOk;
}

int cmd_plotdata(const std::string& in, const std::string& out) {
  emit(out, sd::plot_data_csv(sd::parse_result(read_file(in))));
  return kExitOk;
}

int cmd_oracle(const std::string& setting, std::size_t draws, std::uint64_t seed) {
  nlohmann::json j = nlohmann::json::array();
  std::vector<std::string> names;
  if (setting == "all") {
    for (const char* s : {"s1", "s2", "s3"})
      for (const char* u : {"i", "ii", "iii"}) names.push_back(std::string(s) + u);
  } else {
    names.push_back(setting);
  }
  for (const auto& name : names) {
    sd::DgpConfig c;
    sd::parse_setting(name, c);
    const sd::Truth t = sd::compute_truth(c.setting, c.sub, draws, seed);
    j.push_back({{"setting", name},
                 {"seed", seed},
                 {"draws", draws},
                 {"theta_original", t.theta_original},
                 {"theta_replication", t.theta_replication},
                 {"theta_covariate_weighted", t.theta_covariate_weighted},
                 {"theta_mediator_weighted", t.theta_mediator_weighted},
                 {"observed", t.observed()},
                 {"covariate_shift", t.covariate_shift()},
                 {"mediation_shift", t.mediation_shift()},
                 {"residual", t.residual()}});
  }
  std::cout << sd::dump_json(j);
  return kExitOk;
}

int cmd_example(int which, std::size_t n, std::uint64_t seed, const std::string& dir) {
  const sd::Scenario s = sd::example_scenario(which);
  sd::Rng rng1 = sd::stream_rng(seed, 0);
  sd::Rng rng2 = sd::stream_rng(seed, 1);
  const auto d1 = sd::draw_study(s, sd::StudyRole::kOriginal, n, rng1);
  const auto d2 = sd::draw_study(s, sd::StudyRole::kReplication, n, rng2);
  write_file(dir + "/original.csv", sd::dataset_to_csv(d1, s.spec));
  write_file(dir + "/replication.csv", sd::dataset_to_csv(d2, s.spec));
  write_file(dir + "/spec.json", nlohmann::json(s.spec).dump(2) + "\n");
  return kExitOk;
}

sd::ApiServer* g_server = nullptr;

int cmd_serve(sd::ServiceConfig cfg) {
  cfg.pipeline_threads = 1;
  sd::ApiServer server(cfg);
  const int port = server.bind();
  std::cerr << "listening on http://" << cfg.host << ':' << port << '\n';
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.serve();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decompose the discrepancy between an original experiment and its replication."};
  app.require_subcommand(1);
  app.set_version_flag("--version", sd::engine_version());

  DecomposeArgs dec;
  auto* decompose = app.add_subcommand("decompose", "Decompose the discrepancy of two studies");
  decompose->add_option("--original", dec.original, "Original-study CSV")->required();
  decompose->add_option("--replication", dec.replication, "Replication-study CSV")->required();
  decompose->add_option("--spec", dec.spec, "Analysis spec (JSON)")->required();
  decompose->add_option("--selection-alpha0", dec.alpha0, "Adjust for selection at this threshold");
  decompose->add_option("--level", dec.level, "Confidence level (default: spec ci_level)");
  decompose->add_option("--out", dec.out, "Result document path (default stdout)");
  decompose->add_option("--weights-out", dec.weights_out, "Covariate weights CSV");
  decompose->add_option("--mediator-weights-out", dec.mediator_weights_out, "Mediator weights CSV");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a coverage experiment");
  simulate->add_option("--setting", sim.setting, "s1i..s3iii or sel_i..sel_iii")->required();
  simulate->add_option("--sigma", sim.sigma, "Noise scale");
  simulate->add_option("--nu", sim.nu, "Signal strength (selection settings)");
  simulate->add_option("--method", sim.methods,
                       "standard, power, selected_unadjusted, selected_adjusted (comma separated)");
  simulate->add_option("--reps", sim.reps, "Replicates");
  simulate->add_option("--seed", sim.seed, "Seed");
  simulate->add_option("--n1", sim.n1, "Original sample size");
  simulate->add_option("--n2", sim.n2, "Replication size for the standard method");
  simulate->add_option("--level", sim.level, "Confidence level");
  simulate->add_option("--out", sim.out, "Report JSON path (default stdout)");
  simulate->add_option("--csv-out", sim.csv_out, "Flat CSV report path");

  std::string plot_in, plot_out;
  auto* plotdata = app.add_subcommand("plotdata", "Export bar-chart data from a result document");
  plotdata->add_option("--in", plot_in, "Result document")->required();
  plotdata->add_option("--out", plot_out, "CSV path (default stdout)");

  sd::ServiceConfig svc;
  long idle = 1800;
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--host", svc.host, "Bind address");
  serve->add_option("--port", svc.port, "Port (0 picks a free one)");
  serve->add_option("--static-dir", svc.static_dir, "Console bundle served under /");
  serve->add_option("--idle-timeout", idle, "Seconds before an unused dataset is evicted");
  serve->add_option("--workers", svc.workers, "Request worker threads");

  std::string oracle_setting = "all";
  std::size_t oracle_draws = sd::kOracleDraws;
  std::uint64_t oracle_seed = sd::kOracleSeed;
  auto* oracle = app.add_subcommand("oracle", "Monte Carlo truths of the simulation settings");
  oracle->add_option("--setting", oracle_setting, "Setting name or 'all'");
  oracle->add_option("--draws", oracle_draws, "Draws per estimand");
  oracle->add_option("--seed", oracle_seed, "Oracle seed");

  int ex_which = 1;
  std::size_t ex_n = 500;
  std::uint64_t ex_seed = 1;
  std::string ex_dir = ".";
  auto* example = app.add_subcommand("example", "Write a stylized example pair and its spec");
  example->add_option("--which", ex_which, "1 (observable shift) or 2 (unobserved moderator)");
  example->add_option("--n", ex_n, "Units per study");
  example->add_option("--seed", ex_seed, "Seed");
  example->add_option("--out-dir", ex_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*decompose) return cmd_decompose(dec);
    if (*simulate) return cmd_simulate(sim);
    if (*plotdata) return cmd_plotdata(plot_in, plot_out);
    if (*oracle) return cmd_oracle(oracle_setting, oracle_draws, oracle_seed);
    if (*example) return cmd_example(ex_which, ex_n, ex_seed, ex_dir);
    if (*serve) {
      svc.idle_timeout = std::chrono::seconds(idle);
      return cmd_serve(svc);
    }
  } catch (const sd::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const sd::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const sd::SingularError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const sd::SelectionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSelection;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
