// opsr command-line front end.
//
// Subcommands:
//   enumerate-mini   count the mini-domain corpus and its abstract classes
//   solve            plan a single .task file and print the optimal rollout
//   discover         fit options to recorded traces
//   evaluate         run the transfer protocol and emit a report
//   report           re-emit artifacts from an existing report.json
//   verify-theory    property-check the abstraction theorems on random MDPs

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <set>

#include "opsr/harness.hpp"
#include "opsr/io.hpp"
#include "opsr/random_tasks.hpp"

namespace fs = std::filesystem;
using namespace opsr;

namespace {

int cmd_enumerate_mini(int horizon, const std::string& out_dir) {
  auto tasks = enumerate_mini_domain();
  std::vector<std::pair<TabularMdp, OutcomeModel>> compiled;
  long total_states = 0;
  for (const auto& spec : tasks) {
    CompiledTask t = compile_mini(spec);
    total_states += t.mdp.n_states;
    compiled.emplace_back(std::move(t.mdp), std::move(t.om));
  }
  std::set<OutcomeFingerprint> classes;
  for (const auto& [m, om] : compiled)
    for (int s = 0; s < m.n_states; ++s)
      classes.insert(fingerprint(m, om, s, horizon));
  std::cout << "tasks=" << tasks.size() << "\n"
            << "states=" << total_states << "\n"
            << "classes@h" << horizon << "=" << classes.size() << "\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "mini_%04zu.task", i);
      write_text_file((fs::path(out_dir) / name).string(), render_task(tasks[i]));
    }
    std::cout << "wrote " << tasks.size() << " task files to " << out_dir << "\n";
  }
  return 0;
}

int cmd_solve(const std::string& task_file, const std::string& trace_out, int task_id) {
  CompiledTask task = compile_task(parse_task(read_text_file(task_file)));
  auto [pol, v] = solve_optimal(task.mdp, 1e-10);
  int s0 = task.mdp.initial_state >= 0 ? task.mdp.initial_state : 0;
  std::cout << "domain=" << domain_name(task.spec.kind) << "\n"
            << "states=" << task.mdp.n_states << "\n"
            << "optimal_value=" << detail::format_double(v.values[s0]) << "\n";
  Trajectory tau = detail::optimal_trace(task.mdp, pol, task_id, 10000);
  if (!trace_out.empty()) {
    write_text_file(trace_out, trajectory_to_json(tau).dump(2) + "\n");
    std::cout << "wrote " << trace_out << "\n";
  }
  std::cout << "rollout_steps=" << tau.length() << "\n";
  for (int t = 0; t < tau.length(); ++t)
    std::cout << "  " << task.state_names[tau.states[t]] << " --a" << tau.actions[t]
              << " r=" << tau.rewards[t] << "--> "
              << task.state_names[tau.states[t + 1]] << "\n";
  std::vector<AnnotatedStep> steps;
  for (int t = 0; t < tau.length(); ++t)
    steps.push_back({tau.states[t], tau.actions[t], tau.rewards[t], -1});
  std::cout << "story=";
  bool first = true;
  for (const auto& label : extract_story(steps, tau.states.back(), task.mdp, task.om)) {
    std::cout << (first ? "" : ",") << label;
    first = false;
  }
  std::cout << "\n";
  return 0;
}

// Discover-config schema: {"tasks": [paths...], "opsr_k": int,
// "pca_variance": real, plus any DiscoveryConfig field by name}.
int cmd_discover(const std::string& config_file, const std::string& traces_dir,
                 const std::string& out_file) {
  json cfg_j = json::parse(read_text_file(config_file));
  DiscoveryConfig dcfg;
  dcfg.n_options = cfg_j.value("n_options", dcfg.n_options);
  dcfg.lr = cfg_j.value("lr", dcfg.lr);
  dcfg.likelihood_target = cfg_j.value("likelihood_target", dcfg.likelihood_target);
  dcfg.conv_tol = cfg_j.value("conv_tol", dcfg.conv_tol);
  dcfg.patience = cfg_j.value("patience", dcfg.patience);
  dcfg.max_epochs = cfg_j.value("max_epochs", dcfg.max_epochs);
  dcfg.seed = cfg_j.value("seed", dcfg.seed);
  dcfg.init_scale = cfg_j.value("init_scale", dcfg.init_scale);
  int opsr_k = cfg_j.value("opsr_k", 2);
  double pca_variance = cfg_j.value("pca_variance", 0.999);

  std::vector<CompiledTask> tasks;
  for (const std::string& path : cfg_j.at("tasks").get<std::vector<std::string>>())
    tasks.push_back(compile_task(parse_task(read_text_file(path))));

  std::vector<Trajectory> traces;
  std::vector<std::string> trace_files;
  for (const auto& e : fs::directory_iterator(traces_dir))
    if (e.path().extension() == ".json") trace_files.push_back(e.path().string());
  std::sort(trace_files.begin(), trace_files.end());
  for (const auto& path : trace_files)
    traces.push_back(trajectory_from_json(json::parse(read_text_file(path))));

  // shared OPSR feature space, PCA-reduced over all task states
  std::vector<Eigen::MatrixXd> raw;
  long rows = 0;
  for (const auto& t : tasks) {
    raw.push_back(detail::opsr_feature_matrix(t.mdp, t.om, opsr_k));
    rows += raw.back().rows();
  }
  Eigen::MatrixXd stacked(rows, raw[0].cols());
  long off = 0;
  for (const auto& r : raw) {
    stacked.middleRows(off, r.rows()) = r;
    off += r.rows();
  }
  PcaResult pca = pca_reduce(stacked, pca_variance);
  std::vector<DiscoveryTask> dtasks;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Eigen::MatrixXd feats =
        pca.n_components == 0
            ? Eigen::MatrixXd::Zero(raw[i].rows(), 1).eval()
            : ((raw[i].rowwise() - pca.mean) * pca.basis).eval();
    dtasks.push_back({tasks[i].mdp, feats});
  }
  dcfg.feature_id = "opsr-terminal-k" + std::to_string(opsr_k) + "-pca" +
                    std::to_string(std::max(pca.n_components, 1));

  DiscoveryResult res = discover_options(traces, dtasks, dcfg);
  json out = option_set_to_json(res.params);
  out["converged"] = res.converged;
  out["best_log_likelihood"] = res.best_log_likelihood;
  write_text_file(out_file, out.dump(2) + "\n");
  std::cout << "options=" << res.params.n_options
            << " converged=" << (res.converged ? "yes" : "no")
            << " best_log_likelihood=" << res.best_log_likelihood << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config_file, const std::string& options_file,
                 const std::string& out_dir) {
  ProtocolConfig cfg = protocol_config_from_json(json::parse(read_text_file(config_file)));
  ExperimentReport report;
  if (!options_file.empty()) {
    ExtendedOptionSet es = option_set_from_json(json::parse(read_text_file(options_file)));
    report = run_protocol(cfg, &es.options);
  } else {
    report = run_protocol(cfg);
  }
  for (const auto& path : emit_report(report, out_dir, {"csv", "json", "svg"}))
    std::cout << "wrote " << path << "\n";
  std::cout << "mean_aurc_options=" << detail::format_double(report.mean_aurc_options)
            << "\nmean_aurc_baseline=" << detail::format_double(report.mean_aurc_baseline)
            << "\np_value=" << detail::format_double(report.p_value) << "\n";
  return 0;
}

int cmd_report(const std::string& in_dir, const std::string& formats_csv) {
  ExperimentReport report = report_from_json(
      json::parse(read_text_file((fs::path(in_dir) / "report.json").string())));
  std::vector<std::string> formats;
  std::string cur;
  for (char c : formats_csv + ",") {
    if (c == ',') {
      if (!cur.empty()) formats.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  for (const auto& path : emit_report(report, in_dir, formats))
    std::cout << "wrote " << path << "\n";
  return 0;
}

std::vector<StateAbstraction> all_partitions(int n) {
  std::vector<StateAbstraction> out;
  std::vector<int> code(n, 0);
  auto rec = [&](auto&& self, int i, int max_used) -> void {
    if (i == n) {
      std::vector<std::string> labels(n);
      for (int s = 0; s < n; ++s) labels[s] = "c" + std::to_string(code[s]);
      out.push_back(StateAbstraction::from_labels(labels));
      return;
    }
    for (int c = 0; c <= max_used + 1; ++c) {
      code[i] = c;
      self(self, i + 1, std::max(max_used, c));
    }
  };
  rec(rec, 1, 0);
  return out;
}

int cmd_verify_theory(int max_states, std::uint64_t seed, int n_instances) {
  int failures = 0;
  auto record = [&](bool ok, const std::string& what) {
    if (!ok) {
      ++failures;
      std::cout << "FAIL " << what << "\n";
    }
  };

  // minimal outcome-equivalent abstractions are value-compatible and
  // transfer-optimal under arbitrary valid weightings
  Rng rng = make_rng(seed, {0x7EE0ULL});
  for (int i = 0; i < n_instances; ++i) {
    int n = 2 + static_cast<int>(uniform_index(rng, std::max(1, max_states - 1)));
    int a = 1 + static_cast<int>(uniform_index(rng, 3));
    int d = 1 + static_cast<int>(uniform_index(rng, 2));
    auto [m, om] = random_deterministic_task(rng, n, a, d);
    StateAbstraction phi = minimal_outcome_equivalent_abstraction(m, om, n + 2);
    for (int w = 0; w < 3; ++w) {
      WeightingFn wf = random_weighting(rng, phi);
      AbstractMdp amdp = build_abstract_mdp(m, phi, wf);
      TransferOptimalityResult t = check_transfer_optimality(amdp, m, phi, 1e-9);
      record(t.ok, "transfer optimality, instance " + std::to_string(i) +
                       " weighting " + std::to_string(w) + ": " + t.reason);
    }
  }

  // exhaustive control theorem and coarseness/containment equivalence on
  // small stochastic MDPs
  Rng rng2 = make_rng(seed, {0xC0A5ULL});
  int states = std::min(max_states, 4);
  auto [m, om] = random_stochastic_task(rng2, states, 2, 1, 0.9);
  auto partitions = all_partitions(states);
  for (const auto& phi : partitions) {
    auto pols = enumerate_derived_deterministic(phi, m);
    for (int s = 0; s < states; ++s)
      for (int t = 0; t < states; ++t) {
        bool same_class = phi.class_of[s] == phi.class_of[t];
        bool always_same = true;
        for (const auto& pol : pols)
          for (int a = 0; a < 2; ++a)
            if (pol.pi(s, a) != pol.pi(t, a)) always_same = false;
        record(same_class == always_same, "control theorem");
      }
  }
  auto key = [&](const TabularPolicy& p) { return p.action_probs; };
  for (const auto& p1 : partitions)
    for (const auto& p2 : partitions) {
      auto c = compare_coarseness(p1, p2);
      bool p1_finer = (c == Coarseness::isomorphic || c == Coarseness::strictly_finer);
      std::set<std::vector<double>> d1;
      for (const auto& pol : enumerate_derived_deterministic(p1, m)) d1.insert(key(pol));
      bool contained = true;
      for (const auto& pol : enumerate_derived_deterministic(p2, m))
        if (!d1.count(key(pol))) contained = false;
      record(p1_finer == contained, "coarseness/containment equivalence");
    }

  if (failures == 0) {
    std::cout << "verify-theory: all properties hold (" << n_instances
              << " random instances, exhaustive partitions up to " << states
              << " states)\n";
    return 0;
  }
  std::cout << "verify-theory: " << failures << " failures\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"outcome-equivalent abstraction and option discovery toolkit"};
  app.require_subcommand(1);

  int horizon = 6;
  std::string out_dir;
  auto* enum_cmd = app.add_subcommand("enumerate-mini", "enumerate the mini-domain corpus");
  enum_cmd->add_option("--horizon", horizon, "fingerprint horizon for the class count");
  enum_cmd->add_option("--out", out_dir, "directory to write .task files into");

  std::string task_file, trace_out;
  int trace_task_id = 0;
  auto* solve_cmd = app.add_subcommand("solve", "plan one task file");
  solve_cmd->add_option("taskfile", task_file, "a .task file")->required();
  solve_cmd->add_option("--trace-out", trace_out, "write the greedy rollout as trajectory JSON");
  solve_cmd->add_option("--task-id", trace_task_id, "task index recorded in the trajectory");

  std::string d_config, d_traces, d_out;
  auto* disc_cmd = app.add_subcommand("discover", "fit options to recorded traces");
  disc_cmd->add_option("--config", d_config, "discovery config JSON")->required();
  disc_cmd->add_option("--traces", d_traces, "directory of trajectory JSON files")->required();
  disc_cmd->add_option("--out", d_out, "output option-set JSON")->required();

  std::string e_config, e_options, e_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "run the transfer protocol");
  eval_cmd->add_option("--config", e_config, "protocol config JSON")->required();
  eval_cmd->add_option("--options", e_options, "pre-discovered option-set JSON (optional)");
  eval_cmd->add_option("--out", e_out, "report output directory")->required();

  std::string r_in, r_formats = "csv,svg";
  auto* rep_cmd = app.add_subcommand("report", "re-emit artifacts from report.json");
  rep_cmd->add_option("--in", r_in, "directory containing report.json")->required();
  rep_cmd->add_option("--formats", r_formats, "comma-separated subset of csv,json,svg");

  int vt_states = 6;
  std::uint64_t vt_seed = 0;
  int vt_instances = 50;
  auto* vt_cmd = app.add_subcommand("verify-theory", "property-check the abstraction theorems");
  vt_cmd->add_option("--max-states", vt_states, "largest random MDP size");
  vt_cmd->add_option("--seed", vt_seed, "master seed");
  vt_cmd->add_option("--instances", vt_instances, "number of random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enum_cmd) return cmd_enumerate_mini(horizon, out_dir);
    if (*solve_cmd) return cmd_solve(task_file, trace_out, trace_task_id);
    if (*disc_cmd) return cmd_discover(d_config, d_traces, d_out);
    if (*eval_cmd) return cmd_evaluate(e_config, e_options, e_out);
    if (*rep_cmd) return cmd_report(r_in, r_formats);
    if (*vt_cmd) return cmd_verify_theory(vt_states, vt_seed, vt_instances);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
