// seamless: batch simulation, dataset analysis and the trial-conduct service.
//
// Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "seamless/http.hpp"
#include "seamless/io/config.hpp"
#include "seamless/io/csv.hpp"
#include "seamless/io/json.hpp"
#include "seamless/service.hpp"
#include "seamless/simulation.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace seamless;

namespace {

constexpr int kValidation = 2;
constexpr int kRuntime = 3;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::IoError:
    case ErrorCode::NoValidReplicates: return kRuntime;
    default: return kValidation;
  }
}

std::string fmt(double x, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  require(f.good(), ErrorCode::IoError, "cannot write '" + p.string() + "'");
  f << text;
  require(f.good(), ErrorCode::IoError, "write to '" + p.string() + "' failed");
}

std::string replicates_csv(const std::vector<ReplicateResult>& rs) {
  std::string out =
      "replicate,phase1_total,phase1_backfill,early_stop,insufficient_candidates,obd_selected";
  for (const char* a : {"arm1", "arm2"})
    for (const char* f : {"dose", "n1", "n1_e", "n2", "n2_e", "mmd2", "w", "w_low", "w_high",
                          "borrow_mean", "borrow_low", "borrow_exceeds", "nob_mean", "nob_low",
                          "nob_exceeds"})
      out += std::string(",") + a + "_" + f;
  out += '\n';
  for (const auto& r : rs) {
    out += std::to_string(r.index) + "," + std::to_string(r.phase1_total) + "," +
           std::to_string(r.phase1_backfill) + "," + std::to_string(int(r.early_stop)) + "," +
           std::to_string(int(r.insufficient_candidates)) + "," + std::to_string(int(r.obd_selected));
    for (std::size_t k = 0; k < 2; ++k) {
      if (k < r.arms.size()) {
        const auto& a = r.arms[k];
        out += "," + std::to_string(a.dose) + "," + std::to_string(a.counts.n1) + "," +
               std::to_string(a.counts.n1_e) + "," + std::to_string(a.counts.n2) + "," +
               std::to_string(a.counts.n2_e) + "," + fmt(a.mmd2) + "," + fmt(a.weight.w) + "," +
               fmt(a.weight.ci_low) + "," + fmt(a.weight.ci_high) + "," + fmt(a.borrowing.mean) + "," +
               fmt(a.borrowing.interval.low) + "," + std::to_string(int(a.borrowing.exceeds)) + "," +
               fmt(a.no_borrowing.mean) + "," + fmt(a.no_borrowing.interval.low) + "," +
               std::to_string(int(a.no_borrowing.exceeds));
      } else {
        out += std::string(15, ',');
      }
    }
    out += '\n';
  }
  return out;
}

void print_simulation_table(const ScenarioConfig& cfg, const SimulationSummary& s) {
  std::printf("%s: %d replicates, seed %llu\n", cfg.name.empty() ? "scenario" : cfg.name.c_str(),
              s.replicates, static_cast<unsigned long long>(cfg.seed));
  std::printf("valid %d  early stops %d  insufficient candidates %d\n", s.valid, s.early_stops,
              s.insufficient_candidates);
  std::printf("true OBD %d selected in %.3f of replicates; mean Phase I n %.2f (backfill %.2f)\n\n",
              s.true_obd, s.p_obd_selected, s.mean_phase1_total, s.mean_phase1_backfill);
  std::printf("%-5s %-6s %-9s %-12s %-12s %-9s %-9s\n", "dose", "tox", "selected", "P(borrow)",
              "P(no borrow)", "disc +/-", "mean w");
  for (const auto& d : s.doses) {
    std::printf("%-5d %-6.2f %-9d %-12.4f %-12.4f %4d/%-4d %-9.4f\n", d.dose, d.tox_prob, d.selected,
                d.p_exceed_borrowing, d.p_exceed_no_borrowing, d.borrowing_only, d.no_borrowing_only,
                d.mean_weight);
  }
}

int run_simulate(const std::string& config, std::optional<int> replicates,
                 std::optional<std::uint64_t> seed, const std::string& out_dir, unsigned threads,
                 bool quiet) {
  auto cfg = load_scenario_config(config);
  if (replicates) cfg.replicates = *replicates;
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const auto results = run_simulation(cfg, threads);
  const auto summary = summarize(results, cfg);

  fs::create_directories(out_dir);
  json report{{"name", cfg.name},
              {"seed", cfg.seed},
              {"replicates", cfg.replicates},
              {"covariate_case", cfg.covariate_case},
              {"toxicity_probs", cfg.toxicity_probs},
              {"efficacy_intercepts", cfg.efficacy.intercepts},
              {"tau", cfg.tau},
              {"cred_alpha", cfg.cred_alpha},
              {"phase2_n_per_arm", cfg.phase2_n_per_arm},
              {"summary", summary}};
  write_file(fs::path(out_dir) / "summary.json", report.dump(2) + "\n");
  write_file(fs::path(out_dir) / "replicates.csv", replicates_csv(results));
  if (!quiet) print_simulation_table(cfg, summary);
  return 0;
}

void print_posterior_row(const char* label, const PosteriorSummary& p) {
  std::printf("  %-18s w=%-7.3f mean %.3f  CrI [%.3f, %.3f]  %s\n", label, p.w, p.mean, p.interval.low,
              p.interval.high, p.exceeds ? "exceeds tau" : "-");
}

int run_analyze(const std::string& p1, const std::string& p2, const std::string& schema_path,
                const AnalysisOptions& opt, const std::string& format, const std::string& out) {
  const auto schema = load_schema_config(schema_path);
  const auto phase1 = read_patient_csv(p1, schema, "dose");
  const auto phase2 = read_patient_csv(p2, schema, "arm");
  const auto res = analyze(schema, phase1, phase2, opt);

  json arms = json::array();
  for (const auto& d : res) arms.push_back(d);
  json report{{"tau", opt.tau},
              {"alpha", opt.alpha},
              {"weight_alpha", opt.weight_alpha},
              {"fixed_w", opt.fixed_w ? json(*opt.fixed_w) : json(nullptr)},
              {"doses", arms}};
  if (!out.empty()) write_file(out, report.dump(2) + "\n");
  if (format == "json") {
    std::cout << report.dump(2) << "\n";
    return 0;
  }
  for (const auto& d : res) {
    std::printf("dose %s: phase I %d/%d responders, phase II %d/%d\n", d.dose.c_str(), d.counts.n1_e,
                d.counts.n1, d.counts.n2_e, d.counts.n2);
    const auto& w = d.similarity.weight;
    std::printf("  weight w=%.3f  CI [%.3f, %.3f]", w.w, w.ci_low, w.ci_high);
    if (d.similarity.result)
      std::printf("  mmd2 %.5f  sigma %.4f", d.similarity.result->mmd.mmd2, d.similarity.result->mmd.sigma);
    std::printf("\n");
    for (const auto& warn : d.similarity.warnings) std::printf("  warning: %s\n", warn.c_str());
    print_posterior_row(opt.fixed_w ? "fixed borrowing" : "dynamic borrowing", d.dynamic);
    print_posterior_row("no borrowing", d.no_borrowing);
    print_posterior_row("full borrowing", d.full_borrowing);
  }
  return 0;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? v : fallback;
}

int run_serve(std::string data_dir, std::string host, int port) {
  TrialService svc(data_dir);
  httplib::Server srv;
  install_routes(srv, svc);
  std::fprintf(stderr, "serving %zu session(s) from %s on http://%s:%d\n", svc.session_count(),
               data_dir.c_str(), host.c_str(), port);
  if (!srv.listen(host, port)) {
    std::fprintf(stderr, "error: cannot listen on %s:%d\n", host.c_str(), port);
    return kRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seamless Phase I/II trial design: simulation, analysis and conduct service"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Run replicate trials for a scenario config");
  std::string config, out_dir = ".";
  std::optional<int> replicates;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool quiet = false;
  sim->add_option("--config", config, "Scenario YAML")->required()->check(CLI::ExistingFile);
  sim->add_option("--replicates", replicates, "Override replicate count")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "Override master seed");
  sim->add_option("--out", out_dir, "Output directory for summary.json and replicates.csv");
  sim->add_option("--threads", threads, "Worker threads (output does not depend on it)")
      ->check(CLI::Range(1u, 256u));
  sim->add_flag("--quiet", quiet, "Do not print the summary table");

  auto* an = app.add_subcommand("analyze", "Borrowing analysis of paired Phase I / Phase II data");
  std::string p1, p2, schema, format = "table", json_out, bandwidth = "median";
  AnalysisOptions opt;
  std::optional<double> fixed_w;
  an->add_option("--phase1", p1, "Phase I CSV (covariates, dose, response)")->required()->check(CLI::ExistingFile);
  an->add_option("--phase2", p2, "Phase II CSV (covariates, arm, response)")->required()->check(CLI::ExistingFile);
  an->add_option("--schema", schema, "Covariate schema YAML")->required()->check(CLI::ExistingFile);
  an->add_option("--tau", opt.tau, "Efficacy threshold")->check(CLI::Range(0.0, 1.0));
  an->add_option("--alpha", opt.alpha, "Credible interval level")->check(CLI::Range(0.0, 1.0));
  an->add_option("--weight-alpha", opt.weight_alpha, "CI level for the borrowing weight")
      ->check(CLI::Range(0.0, 1.0));
  an->add_option("--fixed-w", fixed_w, "Use this weight instead of the estimated one")
      ->check(CLI::Range(0.0, 1.0));
  an->add_option("--bandwidth", bandwidth, "Kernel bandwidth: 'median' or a positive number");
  an->add_option("--format", format, "Stdout format")->check(CLI::IsMember({"table", "json"}));
  an->add_option("--out", json_out, "Also write the JSON report here");

  auto* srv = app.add_subcommand("serve", "Run the trial-conduct HTTP service");
  std::string data_dir = env_or("SEAMLESS_DATA_DIR", "seamless-data");
  std::string host = env_or("SEAMLESS_HOST", "127.0.0.1");
  int port = 8080;
  try {
    port = std::stoi(env_or("SEAMLESS_PORT", "8080"));
  } catch (const std::exception&) {
    std::fprintf(stderr, "error: SEAMLESS_PORT is not a number\n");
    return kValidation;
  }
  srv->add_option("--data-dir", data_dir, "Session log directory (env SEAMLESS_DATA_DIR)");
  srv->add_option("--host", host, "Bind address (env SEAMLESS_HOST)");
  srv->add_option("--port", port, "Port (env SEAMLESS_PORT)")->check(CLI::Range(1, 65535));

  auto* init = app.add_subcommand("init-config", "Print a built-in scenario config as YAML");
  int scenario = 1, covariate_case = 1;
  init->add_option("--scenario", scenario, "Toxicity scenario 1..4")->check(CLI::Range(1, 4));
  init->add_option("--case", covariate_case, "Phase I covariate case 1..5")->check(CLI::Range(1, 5));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kValidation;
  }

  try {
    if (*sim) return run_simulate(config, replicates, seed, out_dir, threads, quiet);
    if (*an) {
      opt.fixed_w = fixed_w;
      if (bandwidth != "median") {
        double s = 0;
        require(detail::parse_double(bandwidth, s) && s > 0, ErrorCode::InvalidParams,
                "--bandwidth must be 'median' or a positive number");
        opt.kernel = KernelConfig::fixed(s);
      }
      return run_analyze(p1, p2, schema, opt, format, json_out);
    }
    if (*srv) return run_serve(data_dir, host, port);
    if (*init) {
      auto cfg = default_scenario(scenario, covariate_case);
      cfg.true_obd = true_obd(cfg);
      std::cout << scenario_config_yaml(cfg);
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(code_name(e.code())).c_str(), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return 0;
}
