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
#ifndef PDC_HARNESS_HPP_
#define PDC_HARNESS_HPP_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdc/engine.hpp"
#include "pdc/graph.hpp"
#include "pdc/problem.hpp"

namespace pdc {

// Unknown key, unparsable value or an invalid combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InstanceKind { quadratic, well_coupled, consensus, vertical_lr, vertical_nn };

const char* to_string(InstanceKind k);

struct InstanceSpec {
  InstanceKind kind = InstanceKind::quadratic;
  std::uint64_t seed = 1;
  int agents = 6;
  // quadratic / well_coupled / consensus
  int local_dim = 3;
  int constraints = 2;
  double shift = 1.0;
  double scale = 1.0;  // well_coupled only
  // vertical_lr / vertical_nn
  int samples = 100;
  int features_per_agent = 20;
  int classes = 2;
  double separation = 1.0;
  double lambda = 0.01;
  double xi = 0.5;
  int aux_agent = 0;
  int hidden = 8;
  std::string data_file;  // with partition_file, replaces the synthetic data
  std::string partition_file;
};

struct GraphSpec {
  std::string kind = "cycle";  // cycle | path | random | file
  double edge_prob = 0.5;
  std::uint64_t seed = 1;
  std::string file;
};

struct SweepSpec {
  std::string param;  // alpha | beta | p | rho | zeta; empty means no sweep
  std::vector<double> values;
};

struct ExperimentConfig {
  InstanceSpec instance;
  GraphSpec graph;
  SolverConfig solver;
  SweepSpec sweep;
  int repeat = 1;
  std::vector<std::uint64_t> seeds;  // empty: solver.seed, solver.seed + 1, ...
  std::string out_dir = "out";

  // Throws ConfigError.
  void validate() const;
  std::vector<std::uint64_t> run_seeds() const;
};

// Flat `key = value` lines (dotted keys, `#` comments) or a JSON document,
// nested or with dotted keys. Lists are comma separated in the flat form.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Every key with its current value, in the flat form parse_config accepts.
std::map<std::string, std::string> flatten_config(const ExperimentConfig& cfg);

Graph build_graph(const ExperimentConfig& cfg);
CoupledProblem build_problem(const ExperimentConfig& cfg, const Graph& graph);

// Setting a sweep parameter on a solver config.
void set_solver_param(SolverConfig& s, const std::string& param, double value);

struct RunOutcome {
  std::uint64_t seed = 0;
  IterationTrace trace;
  bool aborted = false;
  std::string abort_message;
  int abort_agent = -1;
  int abort_round = -1;
  std::vector<AgentState> last_state;  // state at the abort or at the end
  double seconds = 0.0;
};

// Per-round arithmetic means over runs, on the prefix every run reached.
struct MeanRow {
  int round = 0;
  double grad_residue = 0.0, infeasibility = 0.0, consensus_gap = 0.0;
  double dx = 0.0, dy = 0.0, dz = 0.0, inner_iters = 0.0, phi = 0.0;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::vector<MeanRow> mean;
  bool any_aborted() const;
};

std::vector<MeanRow> mean_trace(const std::vector<RunOutcome>& runs);
void write_mean_csv(std::ostream& os, const std::vector<MeanRow>& rows);

// Solver only; no files.
ExperimentResult run_experiment(const CoupledProblem& problem, const Graph& graph,
                                const ExperimentConfig& cfg);

// trace_run{k}.csv, trace_mean.csv, summary.json, timing.json and, for
// aborted runs, state_run{k}.txt. Creates dir.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& cfg,
                      const std::string& dir);

struct SweepPoint {
  double value = 0.0;
  ExperimentResult result;
};

// One experiment per sweep value, each written under dir/<param>_<value>,
// plus dir/sweep.csv.
std::vector<SweepPoint> run_sweep(const CoupledProblem& problem, const Graph& graph,
                                  const ExperimentConfig& cfg, const std::string& dir);
void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points);

// Verification suites behind `check`.
struct CheckLine {
  std::string name;
  std::string status;  // PASS, FAIL or WARN
  std::string detail;
};

struct CheckReport {
  std::string suite;
  std::vector<CheckLine> lines;
  bool passed() const;  // no FAIL line
};

const std::vector<std::string>& check_suites();
// cfg may be null; descent and rate then use a built-in quadratic instance.
CheckReport run_check(const std::string& suite, const ExperimentConfig* cfg);
std::string format_report(const CheckReport& report);

// Least-squares slope of log(y) against log(round) over [first, last].
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the fit in log space
  int points = 0;
};
SlopeFit best_iterate_slope(const std::vector<RoundRecord>& rounds, int first, int last);

// Φ along a run: number of increases above tol·(1+|Φ|) and the largest one.
struct DescentStats {
  int rounds = 0;
  int violations = 0;
  double worst = 0.0;  // largest (Φ_{r+1} − Φ_r)/(1+|Φ_r|)
  bool finite = true;
};
DescentStats phi_descent(const IterationTrace& trace, double tol);

}  // namespace pdc

#endif  // PDC_HARNESS_HPP_
