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
#include "pdc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "pdc/bounds.hpp"
#include "pdc/diagnostics.hpp"

namespace pdc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  }
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  const long long d = to_int(key, v);
  if (d < 0) throw ConfigError("config: " + key + " must be nonnegative");
  return static_cast<std::uint64_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " expects true or false, got '" + v + "'");
}

InitMode to_init(const std::string& key, const std::string& v) {
  if (v == "uniform") return InitMode::uniform;
  if (v == "zeros") return InitMode::zeros;
  throw ConfigError("config: " + key + " expects uniform or zeros, got '" + v + "'");
}

InstanceKind to_kind(const std::string& v) {
  if (v == "quadratic") return InstanceKind::quadratic;
  if (v == "well_coupled") return InstanceKind::well_coupled;
  if (v == "consensus") return InstanceKind::consensus;
  if (v == "vertical_lr") return InstanceKind::vertical_lr;
  if (v == "vertical_nn") return InstanceKind::vertical_nn;
  throw ConfigError("config: unknown instance.kind '" + v + "'");
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + format_double(v[k]);
  return out;
}

// JSON scalars and arrays become the flat string form.
std::string json_to_flat(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + json_to_flat(v[k]);
    return out;
  }
  throw ConfigError("config: unsupported JSON value " + v.dump());
}

void flatten_json(const json& j, const std::string& prefix, ExperimentConfig& cfg) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten_json(*it, key, cfg);
    else
      set_config_value(cfg, key, json_to_flat(*it));
  }
}

json record_json(const RoundRecord& r) {
  return json{{"round", r.round},
              {"grad_residue", r.grad_residue},
              {"infeasibility", r.infeasibility},
              {"consensus_gap", r.consensus_gap}};
}

std::string value_dir(const std::string& param, double v) { return param + "_" + format_double(v); }

}  // namespace

const char* to_string(InstanceKind k) {
  switch (k) {
    case InstanceKind::quadratic: return "quadratic";
    case InstanceKind::well_coupled: return "well_coupled";
    case InstanceKind::consensus: return "consensus";
    case InstanceKind::vertical_lr: return "vertical_lr";
    case InstanceKind::vertical_nn: return "vertical_nn";
  }
  return "?";
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  InstanceSpec& in = c.instance;
  SolverConfig& s = c.solver;
  auto i32 = [&](int& dst) { dst = static_cast<int>(to_int(key, v)); };
  auto f64 = [&](double& dst) { dst = to_double(key, v); };

  if (key == "instance.kind") in.kind = to_kind(v);
  else if (key == "instance.seed") in.seed = to_seed(key, v);
  else if (key == "instance.agents") i32(in.agents);
  else if (key == "instance.local_dim") i32(in.local_dim);
  else if (key == "instance.constraints") i32(in.constraints);
  else if (key == "instance.shift") f64(in.shift);
  else if (key == "instance.scale") f64(in.scale);
  else if (key == "instance.samples") i32(in.samples);
  else if (key == "instance.features_per_agent") i32(in.features_per_agent);
  else if (key == "instance.classes") i32(in.classes);
  else if (key == "instance.separation") f64(in.separation);
  else if (key == "instance.lambda") f64(in.lambda);
  else if (key == "instance.xi") f64(in.xi);
  else if (key == "instance.aux_agent") i32(in.aux_agent);
  else if (key == "instance.hidden") i32(in.hidden);
  else if (key == "instance.data_file") in.data_file = v;
  else if (key == "instance.partition_file") in.partition_file = v;
  else if (key == "graph.kind") c.graph.kind = v;
  else if (key == "graph.edge_prob") f64(c.graph.edge_prob);
  else if (key == "graph.seed") c.graph.seed = to_seed(key, v);
  else if (key == "graph.file") c.graph.file = v;
  else if (key == "solver.mode") {
    try {
      s.mode = parse_mode(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else if (key == "solver.p") f64(s.p);
  else if (key == "solver.alpha") f64(s.alpha);
  else if (key == "solver.beta") f64(s.beta);
  else if (key == "solver.rho") f64(s.rho);
  else if (key == "solver.zeta") f64(s.zeta);
  else if (key == "solver.subsolver_tol") f64(s.subsolver_tol);
  else if (key == "solver.subsolver_max_iter") i32(s.subsolver_max_iter);
  else if (key == "solver.max_rounds") i32(s.max_rounds);
  else if (key == "solver.tol_residue") f64(s.tol_residue);
  else if (key == "solver.tol_infeasibility") f64(s.tol_infeasibility);
  else if (key == "solver.divergence_limit") f64(s.divergence_limit);
  else if (key == "solver.seed") s.seed = to_seed(key, v);
  else if (key == "solver.record_phi") s.record_phi = to_bool(key, v);
  else if (key == "solver.x_init") s.x_init = to_init(key, v);
  else if (key == "solver.y_init") s.y_init = to_init(key, v);
  else if (key == "solver.threads") i32(s.threads);
  else if (key == "sweep.param") c.sweep.param = v;
  else if (key == "sweep.values") {
    c.sweep.values.clear();
    for (const std::string& item : split_list(v)) c.sweep.values.push_back(to_double(key, item));
  } else if (key == "repeat.count") i32(c.repeat);
  else if (key == "repeat.seeds") {
    c.seeds.clear();
    for (const std::string& item : split_list(v)) c.seeds.push_back(to_seed(key, item));
  } else if (key == "output.dir") c.out_dir = v;
  else throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    flatten_json(j, "", cfg);
  } else {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config: line " + std::to_string(lineno) + " has no '='");
      set_config_value(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::map<std::string, std::string> flatten_config(const ExperimentConfig& c) {
  const InstanceSpec& in = c.instance;
  const SolverConfig& s = c.solver;
  auto init = [](InitMode m) { return std::string(m == InitMode::uniform ? "uniform" : "zeros"); };
  std::string seeds;
  for (std::size_t k = 0; k < c.seeds.size(); ++k) seeds += (k ? "," : "") + std::to_string(c.seeds[k]);
  return {
      {"instance.kind", to_string(in.kind)},
      {"instance.seed", std::to_string(in.seed)},
      {"instance.agents", std::to_string(in.agents)},
      {"instance.local_dim", std::to_string(in.local_dim)},
      {"instance.constraints", std::to_string(in.constraints)},
      {"instance.shift", format_double(in.shift)},
      {"instance.scale", format_double(in.scale)},
      {"instance.samples", std::to_string(in.samples)},
      {"instance.features_per_agent", std::to_string(in.features_per_agent)},
      {"instance.classes", std::to_string(in.classes)},
      {"instance.separation", format_double(in.separation)},
      {"instance.lambda", format_double(in.lambda)},
      {"instance.xi", format_double(in.xi)},
      {"instance.aux_agent", std::to_string(in.aux_agent)},
      {"instance.hidden", std::to_string(in.hidden)},
      {"instance.data_file", in.data_file},
      {"instance.partition_file", in.partition_file},
      {"graph.kind", c.graph.kind},
      {"graph.edge_prob", format_double(c.graph.edge_prob)},
      {"graph.seed", std::to_string(c.graph.seed)},
      {"graph.file", c.graph.file},
      {"solver.mode", to_string(s.mode)},
      {"solver.p", format_double(s.p)},
      {"solver.alpha", format_double(s.alpha)},
      {"solver.beta", format_double(s.beta)},
      {"solver.rho", format_double(s.rho)},
      {"solver.zeta", format_double(s.zeta)},
      {"solver.subsolver_tol", format_double(s.subsolver_tol)},
      {"solver.subsolver_max_iter", std::to_string(s.subsolver_max_iter)},
      {"solver.max_rounds", std::to_string(s.max_rounds)},
      {"solver.tol_residue", format_double(s.tol_residue)},
      {"solver.tol_infeasibility", format_double(s.tol_infeasibility)},
      {"solver.divergence_limit", format_double(s.divergence_limit)},
      {"solver.seed", std::to_string(s.seed)},
      {"solver.record_phi", s.record_phi ? "true" : "false"},
      {"solver.x_init", init(s.x_init)},
      {"solver.y_init", init(s.y_init)},
      {"solver.threads", std::to_string(s.threads)},
      {"sweep.param", c.sweep.param},
      {"sweep.values", join(c.sweep.values)},
      {"repeat.count", std::to_string(c.repeat)},
      {"repeat.seeds", seeds},
      {"output.dir", c.out_dir},
  };
}

void set_solver_param(SolverConfig& s, const std::string& param, double value) {
  if (param == "alpha") s.alpha = value;
  else if (param == "beta") s.beta = value;
  else if (param == "p") s.p = value;
  else if (param == "rho") s.rho = value;
  else if (param == "zeta") s.zeta = value;
  else throw ConfigError("config: sweep.param must be one of alpha, beta, p, rho, zeta");
}

void ExperimentConfig::validate() const {
  try {
    solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (repeat < 1) throw ConfigError("config: repeat.count must be >= 1");
  if (!seeds.empty() && static_cast<int>(seeds.size()) != repeat)
    throw ConfigError("config: repeat.seeds must list exactly repeat.count seeds");
  if (instance.agents < 2) throw ConfigError("config: instance.agents must be >= 2");
  if (instance.aux_agent < 0 || instance.aux_agent >= instance.agents)
    throw ConfigError("config: instance.aux_agent out of range");
  if (instance.data_file.empty() != instance.partition_file.empty())
    throw ConfigError("config: instance.data_file and instance.partition_file go together");
  static const std::vector<std::string> graphs = {"cycle", "path", "random", "file"};
  if (std::find(graphs.begin(), graphs.end(), graph.kind) == graphs.end())
    throw ConfigError("config: graph.kind must be cycle, path, random or file");
  if (graph.kind == "file" && graph.file.empty()) throw ConfigError("config: graph.file is required");
  if (!sweep.param.empty() || !sweep.values.empty()) {
    if (sweep.values.empty()) throw ConfigError("config: sweep.values is empty");
    for (double v : sweep.values) {
      if (!(v > 0.0)) throw ConfigError("config: sweep values must be positive");
      SolverConfig probe = solver;
      set_solver_param(probe, sweep.param, v);
      try {
        probe.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("config: sweep value " + format_double(v) + ": " + e.what());
      }
    }
  }
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (int k = 0; k < repeat; ++k) out.push_back(solver.seed + static_cast<std::uint64_t>(k));
  return out;
}

Graph build_graph(const ExperimentConfig& cfg) {
  const int n = cfg.instance.agents;
  try {
    if (cfg.graph.kind == "cycle") return build_cycle(n);
    if (cfg.graph.kind == "path") return build_path(n);
    if (cfg.graph.kind == "random") return build_random_connected(n, cfg.graph.edge_prob, cfg.graph.seed);
    Graph g = read_edge_list_file(cfg.graph.file);
    if (g.n_agents() != n)
      throw ConfigError("config: graph file has " + std::to_string(g.n_agents()) +
                        " agents, instance.agents is " + std::to_string(n));
    return g;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: graph: ") + e.what());
  }
}

CoupledProblem build_problem(const ExperimentConfig& cfg, const Graph& graph) {
  const InstanceSpec& in = cfg.instance;
  try {
    switch (in.kind) {
      case InstanceKind::quadratic:
        return build_quadratic_instance(in.seed, in.agents, in.local_dim, in.constraints, in.shift);
      case InstanceKind::well_coupled:
        return build_well_coupled_quadratic(in.seed, in.agents, in.local_dim, in.constraints,
                                            in.shift, in.scale);
      case InstanceKind::consensus: {
        const CoupledProblem base =
            build_quadratic_instance(in.seed, in.agents, in.local_dim, 1, in.shift);
        return build_consensus_instance(base.objectives(), graph);
      }
      case InstanceKind::vertical_lr:
      case InstanceKind::vertical_nn: {
        const VerticalDataset data =
            in.data_file.empty()
                ? synthetic_vertical_dataset(in.seed, in.samples, in.agents, in.features_per_agent,
                                             in.classes, in.separation)
                : read_vertical_dataset(in.data_file, in.partition_file, in.classes);
        if (data.n_agents() != in.agents)
          throw ConfigError("config: the partition has " + std::to_string(data.n_agents()) +
                            " agents, instance.agents is " + std::to_string(in.agents));
        if (in.kind == InstanceKind::vertical_lr)
          return build_vertical_lr(data, in.lambda, in.xi, in.aux_agent);
        return build_vertical_nn(data, in.hidden, in.aux_agent, in.seed);
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: instance: ") + e.what());
  }
  throw ConfigError("config: unknown instance kind");
}

bool ExperimentResult::any_aborted() const {
  return std::any_of(runs.begin(), runs.end(), [](const RunOutcome& r) { return r.aborted; });
}

std::vector<MeanRow> mean_trace(const std::vector<RunOutcome>& runs) {
  std::vector<MeanRow> out;
  if (runs.empty()) return out;
  std::size_t len = runs.front().trace.rounds.size();
  for (const RunOutcome& r : runs) len = std::min(len, r.trace.rounds.size());
  const double w = 1.0 / static_cast<double>(runs.size());
  for (std::size_t k = 0; k < len; ++k) {
    MeanRow m;
    m.round = runs.front().trace.rounds[k].round;
    for (const RunOutcome& r : runs) {
      const RoundRecord& x = r.trace.rounds[k];
      m.grad_residue += w * x.grad_residue;
      m.infeasibility += w * x.infeasibility;
      m.consensus_gap += w * x.consensus_gap;
      m.dx += w * x.dx;
      m.dy += w * x.dy;
      m.dz += w * x.dz;
      m.inner_iters += w * static_cast<double>(x.inner_iters);
      m.phi += w * x.phi;
    }
    out.push_back(m);
  }
  return out;
}

void write_mean_csv(std::ostream& os, const std::vector<MeanRow>& rows) {
  os << "round,grad_residue,infeasibility,consensus_gap,dx,dy,dz,inner_iters,phi\n";
  for (const MeanRow& m : rows) {
    os << m.round << ',' << format_double(m.grad_residue) << ',' << format_double(m.infeasibility)
       << ',' << format_double(m.consensus_gap) << ',' << format_double(m.dx) << ','
       << format_double(m.dy) << ',' << format_double(m.dz) << ',' << format_double(m.inner_iters)
       << ',' << format_double(m.phi) << '\n';
  }
}

ExperimentResult run_experiment(const CoupledProblem& problem, const Graph& graph,
                                const ExperimentConfig& cfg) {
  ExperimentResult result;
  for (std::uint64_t seed : cfg.run_seeds()) {
    RunOutcome out;
    out.seed = seed;
    SolverConfig sc = cfg.solver;
    sc.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    PdcEngine engine(problem, graph, sc);
    try {
      engine.run_into(out.trace);
      out.last_state = out.trace.final_state;
    } catch (const SolverAbort& e) {
      out.aborted = true;
      out.abort_message = e.what();
      out.abort_agent = e.agent();
      out.abort_round = e.round();
      out.last_state = engine.agents();
      out.trace.subsolver = engine.subsolver_stats();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.runs.push_back(std::move(out));
  }
  result.mean = mean_trace(result.runs);
  return result;
}

void write_experiment(const ExperimentResult& result, const ExperimentConfig& cfg,
                      const std::string& dir) {
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  json runs = json::array(), timing = json::array();
  double total = 0.0;
  for (std::size_t k = 0; k < result.runs.size(); ++k) {
    const RunOutcome& r = result.runs[k];
    {
      std::ofstream f = open("trace_run" + std::to_string(k) + ".csv");
      write_trace_csv(f, r.trace.rounds);
    }
    json run{{"index", k},
             {"seed", r.seed},
             {"rounds", r.trace.rounds.size()},
             {"stopped_early", r.trace.stopped_early},
             {"diverged", r.trace.diverged},
             {"aborted", r.aborted},
             {"neighbor_reads", r.trace.neighbor_reads},
             {"locality_violations", r.trace.locality_violations},
             {"subsolver",
              {{"solves", r.trace.subsolver.solves},
               {"stopped_by_tol", r.trace.subsolver.stopped_by_tol},
               {"budget_exhausted", r.trace.subsolver.budget_exhausted},
               {"worst_residual", r.trace.subsolver.worst_residual}}}};
    if (!r.trace.rounds.empty()) run["final"] = record_json(r.trace.rounds.back());
    if (r.aborted) {
      run["abort"] = {{"message", r.abort_message}, {"agent", r.abort_agent}, {"round", r.abort_round}};
      std::ofstream f = open("state_run" + std::to_string(k) + ".txt");
      write_state_snapshot(f, r.last_state);
    }
    runs.push_back(run);
    timing.push_back({{"index", k}, {"seed", r.seed}, {"seconds", r.seconds}});
    total += r.seconds;
  }
  {
    std::ofstream f = open("trace_mean.csv");
    write_mean_csv(f, result.mean);
  }
  json config = json::object();
  for (const auto& [k, v] : flatten_config(cfg)) config[k] = v;
  json summary{{"config", config}, {"runs", runs}, {"aborted", result.any_aborted()}};
  if (!result.mean.empty()) {
    const MeanRow& m = result.mean.back();
    summary["mean_final"] = {{"round", m.round},
                             {"grad_residue", m.grad_residue},
                             {"infeasibility", m.infeasibility},
                             {"consensus_gap", m.consensus_gap}};
  }
  {
    std::ofstream f = open("summary.json");
    f << summary.dump(2) << '\n';
  }
  std::ofstream f = open("timing.json");
  f << json{{"runs", timing}, {"total_seconds", total}}.dump(2) << '\n';
}

std::vector<SweepPoint> run_sweep(const CoupledProblem& problem, const Graph& graph,
                                  const ExperimentConfig& cfg, const std::string& dir) {
  if (cfg.sweep.param.empty()) throw ConfigError("config: sweep.param is required for sweep");
  std::vector<SweepPoint> points;
  for (double v : cfg.sweep.values) {
    ExperimentConfig one = cfg;
    set_solver_param(one.solver, cfg.sweep.param, v);
    one.sweep = {};
    SweepPoint pt;
    pt.value = v;
    pt.result = run_experiment(problem, graph, one);
    write_experiment(pt.result, one, (fs::path(dir) / value_dir(cfg.sweep.param, v)).string());
    points.push_back(std::move(pt));
  }
  fs::create_directories(dir);
  std::ofstream f(fs::path(dir) / "sweep.csv");
  if (!f) throw std::runtime_error("cannot write sweep.csv");
  write_sweep_csv(f, points);
  return points;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
  os << "param_value,round,mean_grad_residue,mean_infeasibility\n";
  for (const SweepPoint& pt : points)
    for (const MeanRow& m : pt.result.mean)
      os << format_double(pt.value) << ',' << m.round << ',' << format_double(m.grad_residue) << ','
         << format_double(m.infeasibility) << '\n';
}

SlopeFit best_iterate_slope(const std::vector<RoundRecord>& rounds, int first, int last) {
  std::vector<double> xs, ys;
  double best = std::numeric_limits<double>::infinity();
  for (const RoundRecord& r : rounds) {
    best = std::min(best, r.grad_residue + r.infeasibility);
    if (r.round < first || r.round > last) continue;
    xs.push_back(std::log(static_cast<double>(r.round)));
    ys.push_back(std::log(std::max(best, std::numeric_limits<double>::min())));
  }
  SlopeFit fit;
  fit.points = static_cast<int>(xs.size());
  if (fit.points < 2) throw std::invalid_argument("best_iterate_slope: fewer than two rounds in range");
  const double n = fit.points;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < fit.points; ++k) {
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
  }
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0;
  for (int k = 0; k < fit.points; ++k) {
    const double e = ys[k] - fit.intercept - fit.slope * xs[k];
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

DescentStats phi_descent(const IterationTrace& trace, double tol) {
  DescentStats d;
  double prev = trace.initial_phi;
  d.finite = std::isfinite(prev);
  for (const RoundRecord& r : trace.rounds) {
    if (!std::isfinite(r.phi)) d.finite = false;
    const double rise = (r.phi - prev) / (1.0 + std::fabs(prev));
    if (!(rise <= tol)) ++d.violations;
    if (std::isfinite(rise)) d.worst = std::max(d.worst, rise);
    prev = r.phi;
    ++d.rounds;
  }
  return d;
}

// ---- check suites ---------------------------------------------------------

bool CheckReport::passed() const {
  return std::none_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.status == "FAIL"; });
}

const std::vector<std::string>& check_suites() {
  static const std::vector<std::string> s = {"spectra", "bounds", "oracles", "descent", "rate"};
  return s;
}

namespace {

std::string kv(const std::string& k, double v) { return k + "=" + format_double(v); }

void add(CheckReport& r, const std::string& name, bool ok, const std::string& detail) {
  r.lines.push_back({name, ok ? "PASS" : "FAIL", detail});
}

// The built-in quadratic for descent and rate: a well-conditioned coupling
// with parameters certified by the bounds module.
struct DefaultRun {
  CoupledProblem problem;
  Graph graph;
  SolverConfig solver;
};

DefaultRun default_quadratic_run(int rounds) {
  CoupledProblem prob = build_well_coupled_quadratic(7, 5, 3, 2, 2.0, 100.0);
  Graph g = build_cycle(5);
  SheetRequest req;
  req.p = 1e-4;
  req.rho = 300.0;
  const ConstantSheet sh = constant_sheet(prob, g, req);
  SolverConfig s;
  s.p = req.p;
  s.rho = req.rho;
  s.alpha = sh.steps.alpha_max;
  s.beta = std::min(0.5, 0.99 * sh.steps.beta_max);
  s.subsolver_tol = 1e-11;
  s.max_rounds = rounds;
  return {std::move(prob), std::move(g), s};
}

void suite_spectra(CheckReport& r) {
  int bad_sigma = 0, bad_lambda = 0;
  double worst = 0.0;
  for (int n = 3; n <= 64; ++n) {
    const SpectralSummary s = spectral_summary(derive_matrices(build_cycle(n)));
    const double expect = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi / n);
    const double err = std::fabs(s.sigma_min_minus - expect);
    worst = std::max(worst, err);
    if (err > 1e-12) ++bad_sigma;
    if (s.lambda_max_plus > 4.0 + 1e-12) ++bad_lambda;
  }
  add(r, "cycle_sigma_min_minus", bad_sigma == 0, kv("worst_abs_err", worst) + " cycles=62");
  add(r, "cycle_lambda_max_plus", bad_lambda == 0, "violations=" + std::to_string(bad_lambda));
  int bad_theta = 0;
  double prev12 = 0.0, prev3 = 0.0;
  for (int n = 4; n <= 32; ++n) {
    std::vector<ObjectivePtr> objs;
    std::vector<Mat> bs;
    for (int i = 0; i < n; ++i) {
      objs.push_back(std::make_shared<QuadraticObjective>(Mat::Identity(1, 1), Vec::Zero(1)));
      bs.push_back(Mat::Identity(1, 1));
    }
    const CoupledProblem prob(objs, bs, Vec::Zero(1), {"cycle", true, ""});
    const ThetaBounds t = theta_bounds_fullrank(prob, build_cycle(n));
    if (t.theta12_bound < prev12 || t.theta3_bound < prev3) ++bad_theta;
    prev12 = t.theta12_bound;
    prev3 = t.theta3_bound;
  }
  add(r, "cycle_theta_bounds_nondecreasing", bad_theta == 0, "N=4..32");
}

void suite_bounds(CheckReport& r) {
  int checked = 0, low = 0, low_printed = 0, up = 0, theta = 0;
  for (int s = 0; s < 80 && checked < 50; ++s) {
    const int n = 3 + s % 5, d = 1 + s % 3, m = 1 + (s * 5) % 4;
    const CoupledProblem prob = build_quadratic_instance(500 + s, n, d, m, 0.5 + s % 3);
    const Graph g = s % 2 ? build_random_connected(n, 0.6, s) : build_cycle(n);
    const ThetaBounds t = theta_bounds_fullrank(prob, g);
    if (!t.full_row_rank) continue;
    ++checked;
    const SingularValueChecks c = singular_value_checks(prob, g);
    if (c.sigma_min_m1 < c.lower_m1_min * (1 - 1e-12) || c.sigma_min_m2 < c.lower_m2_min * (1 - 1e-12)) ++low;
    if (c.sigma_min_m1 < c.lower_m1 * (1 - 1e-12) || c.sigma_min_m2 < c.lower_m2 * (1 - 1e-12)) ++low_printed;
    if (c.sigma_max_m1 > c.upper_m1 * (1 + 1e-12) || c.sigma_max_m2 > c.upper_m2 * (1 + 1e-12)) ++up;
    if (t.theta1_direct > t.theta12_bound) ++theta;
  }
  const std::string of = " instances=" + std::to_string(checked);
  add(r, "sigma_min_case_bounds", low == 0, "violations=" + std::to_string(low) + of);
  r.lines.push_back({"sigma_min_max_combined", low_printed == 0 ? "PASS" : "WARN",
                     "violations=" + std::to_string(low_printed) + of});
  add(r, "sigma_max_bounds", up == 0, "violations=" + std::to_string(up) + of);
  add(r, "theta_direct_below_closed_form", theta == 0, "violations=" + std::to_string(theta) + of);
  Rng rng(17);
  int block = 0;
  for (int k = 0; k < 100; ++k) {
    const Mat a = rng.normal_mat(1 + k % 4, 1 + k % 5), b = rng.normal_mat(1 + (k / 4) % 3, 1 + k % 5);
    Mat st(a.rows() + b.rows(), a.cols());
    st << a, b;
    if (spectral_norm(st) > spectral_norm(a) + spectral_norm(b) + 1e-12) ++block;
  }
  add(r, "stacked_block_norms", block == 0, "violations=" + std::to_string(block) + " pairs=100");
}

void suite_oracles(CheckReport& r) {
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3, m = 1 + trial % 2;
    const CoupledProblem prob = build_quadratic_instance(500 + trial, n, 2, m, 0.5);
    const Graph g = trial % 2 ? build_path(n) : build_random_connected(n, 0.5, trial);
    BlockVec x, ys;
    for (int i = 0; i < n; ++i) {
      x.push_back(rng.normal_vec(2));
      ys.push_back(rng.normal_vec(m));
    }
    const Vec pv = derive_matrices(g, m).A().transpose() * rng.normal_vec(g.n_edges() * m);
    const BlockVec pb = split(pv, std::vector<int>(n, m));
    const BlockVec oracle = brute_force_inner_max(x, pb, ys, 1.0, g, prob);
    for (int i = 0; i < n; ++i) {
      const Vec s = signless_neighbor_sum(NeighborView(g, ys, i, nullptr));
      const Vec yi = y_update(prob.B(i), x[i], prob.q(), n, pb[i], s, 1.0, g.degree(i));
      worst = std::max(worst, (yi - oracle[i]).lpNorm<Eigen::Infinity>());
    }
  }
  add(r, "y_update_vs_dense", worst <= 1e-10, kv("worst_abs_err", worst) + " instances=50");

  double worst_x = 0.0, worst_eps = 0.0;
  for (int s = 0; s < 5; ++s) {
    const int n = 3 + s, d = 2 + s % 3, m = 1 + s % d;
    const CoupledProblem prob = build_well_coupled_quadratic(100 + s, n, d, m, 2.0, 100.0);
    const Graph g = build_cycle(n);
    SheetRequest req;
    req.p = 1e-4;
    req.rho = 300.0;
    const ConstantSheet sh = constant_sheet(prob, g, req);
    SolverConfig c;
    c.p = req.p;
    c.rho = req.rho;
    c.alpha = sh.steps.alpha_max;
    c.beta = std::min(0.5, 0.99 * sh.steps.beta_max);
    c.subsolver_tol = 1e-11;
    c.max_rounds = 5000;
    c.seed = s;
    const IterationTrace tr = run(prob, g, c);
    const KktSolution kk = kkt_oracle_quadratic(prob);
    BlockVec z;
    for (int i = 0; i < n; ++i) {
      z.push_back(tr.final_state[i].z);
      worst_x = std::max(worst_x, (z[i] - kk.x[i]).lpNorm<Eigen::Infinity>());
    }
    worst_eps = std::max(worst_eps, eps_kkt(prob, z).epsilon);
  }
  add(r, "pdc_vs_kkt_oracle", worst_x <= 1e-6 && worst_eps <= 1e-8,
      kv("worst_x_err", worst_x) + " " + kv("worst_epsilon", worst_eps) + " instances=5");
}

// Runs the configured quadratic (or the built-in one) with Φ recording.
void suite_descent(CheckReport& r, const ExperimentConfig* cfg) {
  DefaultRun def = default_quadratic_run(500);
  std::unique_ptr<CoupledProblem> own;
  std::unique_ptr<Graph> own_g;
  const CoupledProblem* prob = &def.problem;
  const Graph* g = &def.graph;
  SolverConfig s = def.solver;
  if (cfg) {
    own_g = std::make_unique<Graph>(build_graph(*cfg));
    own = std::make_unique<CoupledProblem>(build_problem(*cfg, *own_g));
    prob = own.get();
    g = own_g.get();
    s = cfg->solver;
  }
  if (!prob->all_quadratic()) {
    add(r, "quadratic_instance", false, "phi needs a quadratic instance");
    return;
  }
  s.record_phi = true;
  s.mode = Mode::exact_pdc;
  s.zeta = 0.0;
  SheetRequest req;
  req.p = s.p;
  req.rho = s.rho;
  req.alpha = s.alpha;
  req.beta = s.beta;
  const ConstantSheet sh = constant_sheet(*prob, *g, req);
  const std::vector<Condition> conds = regime_conditions(sh);
  std::string bad;
  for (const Condition& c : conds)
    if (!c.satisfied) bad += (bad.empty() ? "" : ",") + c.name;
  const IterationTrace tr = run(*prob, *g, s);
  const DescentStats d = phi_descent(tr, 1e-9);
  const std::string detail = "rounds=" + std::to_string(d.rounds) + " violations=" +
                             std::to_string(d.violations) + " " + kv("worst_rise", d.worst);
  if (!bad.empty()) {
    r.lines.push_back({"regime", "WARN", "out_of_regime violated=" + bad});
    r.lines.push_back({"phi_nonincreasing", "WARN", detail});
    return;
  }
  r.lines.push_back({"regime", "PASS", "inside " + kv("alpha_max", sh.steps.alpha_max) + " " +
                                           kv("beta_max", sh.steps.beta_max)});
  add(r, "phi_nonincreasing", d.finite && d.violations == 0, detail);
}

void suite_rate(CheckReport& r, const ExperimentConfig* cfg) {
  DefaultRun def = default_quadratic_run(1000);
  IterationTrace tr;
  if (cfg) {
    const Graph g = build_graph(*cfg);
    const CoupledProblem prob = build_problem(*cfg, g);
    tr = run(prob, g, cfg->solver);
  } else {
    tr = run(def.problem, def.graph, def.solver);
  }
  const int last = std::min<int>(1000, static_cast<int>(tr.rounds.size()));
  if (last < 11) {
    add(r, "best_iterate_slope", false, "fewer than 11 rounds");
    return;
  }
  const SlopeFit fit = best_iterate_slope(tr.rounds, 10, last);
  add(r, "best_iterate_slope", fit.slope <= -0.75,
      kv("slope", fit.slope) + " " + kv("fit_residual", fit.residual) + " rounds=10.." +
          std::to_string(last));
}

}  // namespace

CheckReport run_check(const std::string& suite, const ExperimentConfig* cfg) {
  CheckReport r;
  r.suite = suite;
  if (suite == "spectra") suite_spectra(r);
  else if (suite == "bounds") suite_bounds(r);
  else if (suite == "oracles") suite_oracles(r);
  else if (suite == "descent") suite_descent(r, cfg);
  else if (suite == "rate") suite_rate(r, cfg);
  else throw ConfigError("check: unknown suite '" + suite + "'");
  return r;
}

std::string format_report(const CheckReport& report) {
  std::ostringstream os;
  for (const CheckLine& l : report.lines)
    os << "check " << report.suite << ' ' << l.name << ' ' << l.status << ' ' << l.detail << '\n';
  os << "suite " << report.suite << ' ' << (report.passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

}  // namespace pdc
