/*
 * Copyright 2026 The pdc-mesh Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// pdc_mesh: build instances, run and sweep the solver, print constant sheets
// and run the verification suites.
//
// Exit codes: 0 success, 1 solver abort, 2 config error, 3 check failure.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdc/bounds.hpp"
#include "pdc/graph.hpp"
#include "pdc/harness.hpp"

namespace {

constexpr int kOk = 0, kAbort = 1, kConfig = 2, kCheck = 3;

struct Flags {
  std::string config;
  std::string out;
  std::optional<long long> seed;
  std::optional<int> threads;
  std::string suite;
  bool json = false;
};

int env_threads() {
  const char* v = std::getenv("PDC_MESH_THREADS");
  if (!v || !*v) return 0;
  try {
    std::size_t used = 0;
    const int t = std::stoi(v, &used);
    if (used != std::string(v).size() || t < 1) throw std::invalid_argument(v);
    return t;
  } catch (const std::exception&) {
    throw pdc::ConfigError(std::string("PDC_MESH_THREADS must be a positive integer, got '") + v + "'");
  }
}

// Flags override the environment, which overrides the config file.
pdc::ExperimentConfig resolve(const Flags& f, bool require_file) {
  if (require_file && f.config.empty()) throw pdc::ConfigError("--config is required");
  pdc::ExperimentConfig cfg = f.config.empty() ? pdc::ExperimentConfig{} : pdc::load_config(f.config);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.seed) {
    if (*f.seed < 0) throw pdc::ConfigError("--seed must be nonnegative");
    cfg.solver.seed = static_cast<std::uint64_t>(*f.seed);
    cfg.seeds.clear();
  }
  if (f.threads) {
    cfg.solver.threads = *f.threads;
  } else if (const int t = env_threads(); t > 0) {
    cfg.solver.threads = t;
  }
  cfg.validate();
  return cfg;
}

void print_outcomes(const pdc::ExperimentResult& r, const std::string& label) {
  for (const pdc::RunOutcome& o : r.runs) {
    std::cout << label << "seed " << o.seed << ": rounds " << o.trace.rounds.size();
    if (!o.trace.rounds.empty()) {
      const pdc::RoundRecord& last = o.trace.rounds.back();
      std::cout << " residue " << pdc::format_double(last.grad_residue) << " infeasibility "
                << pdc::format_double(last.infeasibility);
    }
    if (o.trace.diverged) std::cout << " diverged";
    if (o.aborted) std::cout << " ABORT " << o.abort_message;
    std::cout << '\n';
  }
}

int cmd_run(const Flags& f) {
  const pdc::ExperimentConfig cfg = resolve(f, true);
  const pdc::Graph g = pdc::build_graph(cfg);
  const pdc::CoupledProblem prob = pdc::build_problem(cfg, g);
  const pdc::ExperimentResult r = pdc::run_experiment(prob, g, cfg);
  pdc::write_experiment(r, cfg, cfg.out_dir);
  print_outcomes(r, "");
  std::cout << "wrote " << cfg.out_dir << '\n';
  return r.any_aborted() ? kAbort : kOk;
}

int cmd_sweep(const Flags& f) {
  const pdc::ExperimentConfig cfg = resolve(f, true);
  const pdc::Graph g = pdc::build_graph(cfg);
  const pdc::CoupledProblem prob = pdc::build_problem(cfg, g);
  const std::vector<pdc::SweepPoint> pts = pdc::run_sweep(prob, g, cfg, cfg.out_dir);
  bool aborted = false;
  for (const pdc::SweepPoint& pt : pts) {
    print_outcomes(pt.result, cfg.sweep.param + "=" + pdc::format_double(pt.value) + " ");
    aborted = aborted || pt.result.any_aborted();
  }
  std::cout << "wrote " << cfg.out_dir << "/sweep.csv\n";
  return aborted ? kAbort : kOk;
}

int cmd_check(const Flags& f) {
  std::optional<pdc::ExperimentConfig> cfg;
  if (!f.config.empty()) cfg = resolve(f, true);
  const std::vector<std::string>& suites = pdc::check_suites();
  std::vector<std::string> todo;
  if (f.suite == "all")
    todo = suites;
  else
    todo = {f.suite};
  bool ok = true;
  for (const std::string& s : todo) {
    const pdc::CheckReport rep = pdc::run_check(s, cfg ? &*cfg : nullptr);
    std::cout << pdc::format_report(rep);
    ok = ok && rep.passed();
  }
  return ok ? kOk : kCheck;
}

nlohmann::json sheet_json(const pdc::ConstantSheet& s, const std::vector<pdc::Condition>& conds) {
  nlohmann::json c = nlohmann::json::array();
  for (const pdc::Condition& k : conds)
    c.push_back({{"name", k.name}, {"satisfied", k.satisfied}, {"value", k.value}, {"limit", k.limit}});
  return {
      {"p", s.p}, {"rho", s.rho}, {"alpha", s.alpha}, {"beta", s.beta}, {"zeta", s.zeta},
      {"gamma_minus", s.gamma_minus}, {"gamma_plus", s.gamma_plus}, {"b_max", s.b_max},
      {"lambda_max", s.lambda_max}, {"n_agents", s.n_agents}, {"theta_source", s.theta_source},
      {"full_row_rank", s.theta.full_row_rank},
      {"sigma", {{"sigma1", s.sigma.sigma1}, {"sigma2", s.sigma.sigma2},
                 {"sigma3", s.sigma.sigma3}, {"sigma4", s.sigma.sigma4}}},
      {"theta", {{"theta1", s.theta1}, {"theta2", s.theta2}, {"theta3", s.theta3}}},
      {"a", {{"a1", s.a.a1}, {"a2", s.a.a2}, {"a3", s.a.a3}, {"a4", s.a.a4},
             {"a5", s.a.a5}, {"a6", s.a.a6}}},
      {"kappa", s.kappa},
      {"steps", {{"alpha_max", s.steps.alpha_max}, {"beta_max", s.steps.beta_max},
                 {"p_min", s.steps.p_min}, {"zeta_min", s.steps.zeta_min},
                 {"zeta_max", s.steps.zeta_max}, {"alpha_max_ipdc", s.steps.alpha_max_ipdc},
                 {"zeta_interval_empty", s.steps.zeta_interval_empty}}},
      {"descent", {{"delta", s.delta}, {"c1", s.c1}, {"c2", s.c2}, {"c3", s.c3}, {"c4", s.c4}}},
      {"conditions", c},
      {"inside_regime", pdc::inside_regime(conds)},
  };
}

int cmd_bounds(const Flags& f) {
  const pdc::ExperimentConfig cfg = resolve(f, true);
  const pdc::Graph g = pdc::build_graph(cfg);
  const pdc::CoupledProblem prob = pdc::build_problem(cfg, g);
  pdc::SheetRequest req;
  req.p = cfg.solver.p;
  req.rho = cfg.solver.rho;
  req.alpha = cfg.solver.alpha;
  req.beta = cfg.solver.beta;
  req.zeta = cfg.solver.mode == pdc::Mode::inexact_ipdc ? cfg.solver.zeta : 0.0;
  const pdc::ConstantSheet sheet = pdc::constant_sheet(prob, g, req);
  const std::vector<pdc::Condition> conds = pdc::regime_conditions(sheet);
  if (f.json) {
    std::cout << sheet_json(sheet, conds).dump(2) << '\n';
    return kOk;
  }
  std::cout << pdc::format_sheet(sheet);
  if (!sheet.theta.full_row_rank)
    std::cout << "warning: B is rank deficient; closed-form theta disabled, Hoffman estimate used\n";
  std::string bad;
  for (const pdc::Condition& c : conds) {
    std::cout << "condition " << c.name << ' ' << (c.satisfied ? "ok" : "VIOLATED") << " value "
              << pdc::format_double(c.value) << " limit " << pdc::format_double(c.limit) << '\n';
    if (!c.satisfied) bad += " " + c.name;
  }
  std::cout << "verdict " << (bad.empty() ? "inside regime" : "outside regime (violated:" + bad + ")")
            << '\n';
  return kOk;
}

int cmd_spectra(const Flags& f) {
  const pdc::ExperimentConfig cfg = resolve(f, false);
  const pdc::Graph g = pdc::build_graph(cfg);
  const pdc::SpectralSummary s = pdc::spectral_summary(pdc::derive_matrices(g));
  const nlohmann::json j{{"agents", g.n_agents()},
                         {"edges", g.n_edges()},
                         {"max_degree", g.max_degree()},
                         {"lambda_max_plus", s.lambda_max_plus},
                         {"sigma_min_minus", s.sigma_min_minus},
                         {"sigma_max_minus", s.sigma_max_minus},
                         {"zero_multiplicity", s.zero_multiplicity},
                         {"connected", s.connected}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proximal dual consensus solver for linearly coupled multi-agent problems"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", f.config, "flat key=value or JSON config file");
    if (needs_config) opt->required();
    sub->add_option("--out", f.out, "output directory (overrides output.dir)");
    sub->add_option("--seed", f.seed, "first run seed (overrides solver.seed and repeat.seeds)");
    sub->add_option("--threads", f.threads, "worker threads (overrides PDC_MESH_THREADS)")
        ->check(CLI::PositiveNumber);
  };
  CLI::App* run = app.add_subcommand("run", "run repeats and write traces");
  common(run, true);
  CLI::App* sweep = app.add_subcommand("sweep", "run one experiment per sweep value");
  common(sweep, true);
  CLI::App* check = app.add_subcommand("check", "run a verification suite");
  common(check, false);
  std::vector<std::string> names = pdc::check_suites();
  names.push_back("all");
  check->add_option("suite", f.suite, "spectra | bounds | oracles | descent | rate | all")
      ->required()
      ->check(CLI::IsMember(names));
  CLI::App* bounds = app.add_subcommand("bounds", "print the constant sheet and regime verdict");
  common(bounds, true);
  bounds->add_flag("--json", f.json, "JSON instead of text");
  CLI::App* spectra = app.add_subcommand("spectra", "spectral summary of the configured graph");
  common(spectra, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(f);
    if (*sweep) return cmd_sweep(f);
    if (*check) return cmd_check(f);
    if (*bounds) return cmd_bounds(f);
    return cmd_spectra(f);
  } catch (const pdc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kAbort;
  }
}
