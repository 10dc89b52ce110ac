#pragma once

// Experiment harness: SARSA(lambda) learners over primitive or SMDP action
// sets, the discover-then-transfer protocol, analysis metrics (AURC, stories,
// occupancy), and report emission.

#include "opsr/discovery.hpp"
#include "opsr/domains.hpp"
#include "opsr/features.hpp"
#include "opsr/io.hpp"
#include "opsr/options.hpp"

#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

namespace opsr {

struct LearnerConfig {
  double epsilon = 0.05;
  double lambda = 0.99;
  double gamma = 0.999;
  double alpha = 0.2;
  int episodes = 100;
  int max_episode_steps = 500;
  bool replacing_traces = true;

  void check() const {
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!unit(epsilon) || !unit(lambda) || !unit(gamma) || alpha <= 0.0)
      throw std::invalid_argument("LearnerConfig: parameter out of range");
  }
};

struct LearningCurve {
  std::vector<double> returns;  // per-episode accumulated (undiscounted) reward
  std::vector<int> steps;       // primitive steps per episode
};

inline double aurc(const LearningCurve& curve) {
  if (curve.returns.empty()) throw std::invalid_argument("aurc: empty curve");
  return std::accumulate(curve.returns.begin(), curve.returns.end(), 0.0);
}

// One primitive step of an annotated trace: the controller is the option
// index, or -1 for a primitive chosen directly by the high-level policy.
struct AnnotatedStep {
  int s = 0, a = 0;
  double r = 0.0;
  int controller = -1;
};

struct AnnotatedTrace {
  std::vector<AnnotatedStep> steps;
  int end_state = -1;
};

struct SarsaResult {
  LearningCurve curve;
  Eigen::MatrixXd q;          // n_states x extended action count
  AnnotatedTrace greedy;      // one greedy rollout after training
};

namespace detail {

// initial_state is optional on TabularMdp (-1 when unset); episodes start at 0 then
inline int start_state(const TabularMdp& m) {
  return m.initial_state >= 0 ? m.initial_state : 0;
}

inline int argmax_q(const Eigen::MatrixXd& q, int s) {
  int best = 0;
  for (int a = 1; a < q.cols(); ++a)
    if (q(s, a) > q(s, best)) best = a;
  return best;
}

}  // namespace detail

// Tabular SARSA(lambda) with replacing eligibility traces over the extended
// action set. Option actions use the SMDP backup r_acc + gamma^k Q(s', a')
// and decay the traces by (gamma * lambda)^k.
template <typename FeatureFn>
SarsaResult sarsa_lambda_train(const TabularMdp& m, FeatureFn&& features,
                               const SmdpActionSet& acts, const LearnerConfig& cfg,
                               Rng& rng, const Eigen::MatrixXd* q_init = nullptr) {
  cfg.check();
  const int A = acts.size();
  SarsaResult res;
  res.q = q_init ? *q_init : Eigen::MatrixXd::Zero(m.n_states, A);
  Eigen::MatrixXd elig(m.n_states, A);

  auto pick = [&](int s) {
    if (uniform01(rng) < cfg.epsilon) return static_cast<int>(uniform_index(rng, A));
    return detail::argmax_q(res.q, s);
  };
  auto raw_step = [&](int s, int a, double* raw_ret, int* controller_steps,
                      std::vector<AnnotatedStep>* trace) {
    // like smdp_step, but also accumulates the undiscounted return and
    // optionally records the primitive trace
    SmdpStep st;
    if (!acts.is_option(a)) {
      double roll = uniform01(rng), acc = 0.0;
      int nxt = m.n_states - 1;
      for (int t = 0; t < m.n_states; ++t) {
        acc += m.p(s, a, t);
        if (roll < acc) { nxt = t; break; }
      }
      st.end_state = nxt;
      st.steps = 1;
      st.reward = m.r(s, a, nxt);
      *raw_ret += st.reward;
      if (trace) trace->push_back({s, a, st.reward, -1});
    } else {
      OptionRollout ro = execute_option(m, features, acts.option_of(a), s, rng,
                                        cfg.max_episode_steps);
      st.end_state = ro.end_state;
      st.steps = std::max(ro.steps, 1);
      st.reward = ro.reward;
      for (const auto& p : ro.trace) {
        *raw_ret += p.r;
        if (trace) trace->push_back({p.s, p.a, p.r, a - acts.n_primitive});
      }
    }
    *controller_steps = st.steps;
    return st;
  };

  for (int ep = 0; ep < cfg.episodes; ++ep) {
    elig.setZero();
    int s = detail::start_state(m);
    double ep_return = 0.0;
    int ep_steps = 0;
    int a = pick(s);
    while (ep_steps < cfg.max_episode_steps && !m.terminal[s]) {
      int k = 0;
      SmdpStep st = raw_step(s, a, &ep_return, &k, nullptr);
      ep_steps += st.steps;
      int s2 = st.end_state;
      bool done = m.terminal[s2];
      int a2 = done ? 0 : pick(s2);
      double gk = std::pow(cfg.gamma, k);
      double target = st.reward + (done ? 0.0 : gk * res.q(s2, a2));
      double delta = target - res.q(s, a);
      if (cfg.replacing_traces)
        elig(s, a) = 1.0;
      else
        elig(s, a) += 1.0;
      res.q += cfg.alpha * delta * elig;
      elig *= std::pow(cfg.gamma * cfg.lambda, k);
      s = s2;
      a = a2;
    }
    res.curve.returns.push_back(ep_return);
    res.curve.steps.push_back(ep_steps);
  }

  // greedy rollout (no exploration) with controller annotations
  {
    int s = detail::start_state(m), steps = 0;
    double unused = 0.0;
    while (steps < cfg.max_episode_steps && !m.terminal[s]) {
      int a = detail::argmax_q(res.q, s);
      int k = 0;
      SmdpStep st = raw_step(s, a, &unused, &k, &res.greedy.steps);
      steps += st.steps;
      s = st.end_state;
    }
    res.greedy.end_state = s;
  }
  return res;
}

// ---------------------------------------------------------------- stories ---

// Orders the nonzero outcome components of each transition; components
// flagged not story-relevant (e.g. a constant per-step cost) are skipped.
inline std::vector<std::string> extract_story(const std::vector<AnnotatedStep>& steps,
                                              int end_state, const TabularMdp& m,
                                              const OutcomeModel& om) {
  std::vector<std::string> story;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    int s = steps[i].s, a = steps[i].a;
    int t = (i + 1 < steps.size()) ? steps[i + 1].s : end_state;
    const double* sig = om.sig(m.n_actions, m.n_states, s, a, t);
    for (int j = 0; j < om.dim; ++j) {
      if (!om.story_relevant.empty() && !om.story_relevant[j]) continue;
      if (sig[j] != 0.0)
        story.push_back(j < static_cast<int>(om.labels.size()) ? om.labels[j]
                                                               : std::to_string(j));
    }
  }
  return story;
}

// -------------------------------------------------------------- occupancy ---

struct OccupancyRecord {
  // rows[t][c]: traces whose controller at primitive step t is c, where
  // c in 0..K-1 are options and index K is direct primitive control
  std::vector<std::vector<int>> rows;
  std::vector<int> alive;  // traces still running at step t
  int n_controllers = 1;
};

inline OccupancyRecord occupancy_graph(const std::vector<AnnotatedTrace>& traces,
                                       int n_options) {
  OccupancyRecord rec;
  rec.n_controllers = n_options + 1;
  std::size_t max_len = 0;
  for (const auto& tr : traces) max_len = std::max(max_len, tr.steps.size());
  rec.rows.assign(max_len, std::vector<int>(rec.n_controllers, 0));
  rec.alive.assign(max_len, 0);
  for (const auto& tr : traces)
    for (std::size_t t = 0; t < tr.steps.size(); ++t) {
      int c = tr.steps[t].controller;
      ++rec.rows[t][c < 0 ? n_options : c];
      ++rec.alive[t];
    }
  return rec;
}

// ---------------------------------------------------------------- protocol ---

struct ProtocolConfig {
  DomainKind domain = DomainKind::craftworld;
  int n_train = 10;
  int n_test = 5;
  int n_options = 3;       // K
  int opsr_k = 2;          // feature horizon
  double pca_variance = 0.999;
  int n_seeds = 20;
  std::uint64_t seed = 0;
  LearnerConfig learner;
  DiscoveryConfig discovery;
  int lightworld_rooms = 3;
};

struct RunRecord {
  int task_id = 0;
  int seed = 0;
  std::string agent;  // "options" or "baseline"
  LearningCurve curve;
  double aurc_value = 0.0;
};

struct ExperimentReport {
  ProtocolConfig config;
  std::vector<RunRecord> runs;
  OccupancyRecord occupancy;
  std::vector<std::vector<std::string>> train_stories;
  double mean_aurc_options = 0.0;
  double mean_aurc_baseline = 0.0;
  double p_value = 1.0;
  bool discovery_converged = false;
};

namespace detail {

inline GridTaskSpec generate_protocol_task(const ProtocolConfig& cfg,
                                           std::uint64_t task_seed) {
  switch (cfg.domain) {
    case DomainKind::craftworld: return craftworld_generate(task_seed);
    case DomainKind::lightworld: return lightworld_generate(task_seed, cfg.lightworld_rooms);
    default: throw std::invalid_argument("run_protocol: mini is enumerable, not generated");
  }
}

// greedy deterministic rollout of an optimal policy, as a trajectory
inline Trajectory optimal_trace(const TabularMdp& m, const TabularPolicy& pol,
                                int task_id, int max_steps) {
  Trajectory tau;
  tau.task = task_id;
  int s = detail::start_state(m);
  tau.states.push_back(s);
  for (int t = 0; t < max_steps && !m.terminal[s]; ++t) {
    int a = 0;
    double best = -1.0;
    for (int ai = 0; ai < m.n_actions; ++ai)
      if (pol.pi(s, ai) > best) {
        best = pol.pi(s, ai);
        a = ai;
      }
    int nxt = m.successor(s, a);
    tau.actions.push_back(a);
    tau.rewards.push_back(m.r(s, a, nxt));
    tau.states.push_back(nxt);
    s = nxt;
  }
  return tau;
}

inline Eigen::MatrixXd opsr_feature_matrix(const TabularMdp& m, const OutcomeModel& om,
                                           int k) {
  long len = opsr_terminal_up_to_length(m.n_actions, k, om.dim);
  Eigen::MatrixXd feats(m.n_states, len);
  for (int s = 0; s < m.n_states; ++s) {
    OpsrVector v = opsr_terminal_up_to(m, om, s, k);
    for (long j = 0; j < len; ++j) feats(s, j) = v.values[j];
  }
  return feats;
}

}  // namespace detail

// The discover-then-transfer protocol: sample and solve train tasks, record
// one greedy optimal trace each, fit the OPSR+PCA feature space on the train
// tasks, discover K options from the traces, then train matched-seed
// option-enabled and option-less SARSA learners on fresh test tasks.
// When preset_options is given, the discovery stage is skipped and the caller's
// options are evaluated instead; the feature space is still fit on the same
// seeded train tasks so the option policies see the coordinates they expect.
inline ExperimentReport run_protocol(const ProtocolConfig& cfg,
                                     const std::vector<OptionDef>* preset_options = nullptr) {
  ExperimentReport report;
  report.config = cfg;

  // train tasks and optimal traces
  std::vector<CompiledTask> train;
  std::vector<Trajectory> traces;
  for (int i = 0; i < cfg.n_train; ++i) {
    GridTaskSpec spec = detail::generate_protocol_task(
        cfg, derive_seed(cfg.seed, 0x7E57A000ULL + i));
    CompiledTask task = compile_task(spec);
    auto [pol, v] = solve_optimal(task.mdp, 1e-9);
    traces.push_back(detail::optimal_trace(task.mdp, pol, i,
                                           cfg.learner.max_episode_steps));
    train.push_back(std::move(task));
  }

  // feature space fit on train states: OPSR vectors reduced by PCA
  std::vector<Eigen::MatrixXd> raw;
  long total_rows = 0;
  for (const auto& t : train) {
    raw.push_back(detail::opsr_feature_matrix(t.mdp, t.om, cfg.opsr_k));
    total_rows += raw.back().rows();
  }
  Eigen::MatrixXd stacked(total_rows, raw[0].cols());
  long off = 0;
  for (const auto& r : raw) {
    stacked.middleRows(off, r.rows()) = r;
    off += r.rows();
  }
  PcaResult pca = pca_reduce(stacked, cfg.pca_variance);
  int feat_dim = std::max(pca.n_components, 1);
  auto project = [&](const Eigen::MatrixXd& rows) {
    if (pca.n_components == 0) return Eigen::MatrixXd::Zero(rows.rows(), 1).eval();
    return ((rows.rowwise() - pca.mean) * pca.basis).eval();
  };

  // discovery over the train traces
  std::vector<DiscoveryTask> dtasks;
  for (std::size_t i = 0; i < train.size(); ++i)
    dtasks.push_back({train[i].mdp, project(raw[i])});
  DiscoveryConfig dcfg = cfg.discovery;
  dcfg.n_options = cfg.n_options;
  dcfg.seed = derive_seed(cfg.seed, 0xD15C0000ULL);
  dcfg.feature_id = "opsr-terminal-k" + std::to_string(cfg.opsr_k) + "-pca" +
                    std::to_string(feat_dim);
  std::vector<OptionDef> options;
  if (preset_options) {
    options = *preset_options;
    report.discovery_converged = true;
  } else {
    DiscoveryResult disc = discover_options(traces, dtasks, dcfg);
    report.discovery_converged = disc.converged;
    // the per-task high-level policies are discarded; the SMDP learner on each
    // test task relearns when to invoke each option
    options = disc.params.options;
  }

  for (std::size_t i = 0; i < train.size(); ++i)
    report.train_stories.push_back(
        extract_story(
            [&] {
              std::vector<AnnotatedStep> st;
              for (int t = 0; t < traces[i].length(); ++t)
                st.push_back({traces[i].states[t], traces[i].actions[t],
                              traces[i].rewards[t], -1});
              return st;
            }(),
            traces[i].states.back(), train[i].mdp, train[i].om));

  // test tasks
  std::vector<AnnotatedTrace> option_traces;
  std::vector<double> aurc_opt, aurc_base;
  for (int i = 0; i < cfg.n_test; ++i) {
    GridTaskSpec spec = detail::generate_protocol_task(
        cfg, derive_seed(cfg.seed, 0x7E570000ULL + i));
    CompiledTask task = compile_task(spec);
    Eigen::MatrixXd feats =
        project(detail::opsr_feature_matrix(task.mdp, task.om, cfg.opsr_k));
    auto feature_of = [&](int s) { return feats.row(s).transpose().eval(); };
    SmdpActionSet with_options = smdp_action_set(task.mdp.n_actions, options);
    SmdpActionSet without = smdp_action_set(task.mdp.n_actions, {});
    for (int rep = 0; rep < cfg.n_seeds; ++rep) {
      // matched seeds: both agents draw from identically seeded streams
      Rng rng_opt = make_rng(cfg.seed, {0xEE, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(rep)});
      Rng rng_base = make_rng(cfg.seed, {0xEE, static_cast<std::uint64_t>(i),
                                         static_cast<std::uint64_t>(rep)});
      SarsaResult ro = sarsa_lambda_train(task.mdp, feature_of, with_options,
                                          cfg.learner, rng_opt);
      SarsaResult rb = sarsa_lambda_train(task.mdp, feature_of, without,
                                          cfg.learner, rng_base);
      double ao = aurc(ro.curve), ab = aurc(rb.curve);
      aurc_opt.push_back(ao);
      aurc_base.push_back(ab);
      report.runs.push_back({i, rep, "options", std::move(ro.curve), ao});
      report.runs.push_back({i, rep, "baseline", std::move(rb.curve), ab});
      option_traces.push_back(std::move(ro.greedy));
    }
  }

  report.occupancy = occupancy_graph(option_traces, static_cast<int>(options.size()));
  report.mean_aurc_options =
      std::accumulate(aurc_opt.begin(), aurc_opt.end(), 0.0) / aurc_opt.size();
  report.mean_aurc_baseline =
      std::accumulate(aurc_base.begin(), aurc_base.end(), 0.0) / aurc_base.size();
  // the paired test needs at least two matched pairs; degenerate runs get an
  // uninformative p-value instead of aborting the whole protocol
  report.p_value = aurc_opt.size() >= 2 ? paired_t_pvalue(aurc_opt, aurc_base) : 1.0;
  return report;
}

// ------------------------------------------------------------------ report ---

namespace detail {

inline std::string format_double(double x) {
  std::ostringstream ss;
  ss.precision(17);
  ss << x;
  return ss.str();
}

}  // namespace detail

inline json protocol_config_to_json(const ProtocolConfig& cfg) {
  return {{"domain", domain_name(cfg.domain)},
          {"n_train", cfg.n_train},
          {"n_test", cfg.n_test},
          {"n_options", cfg.n_options},
          {"opsr_k", cfg.opsr_k},
          {"pca_variance", cfg.pca_variance},
          {"n_seeds", cfg.n_seeds},
          {"seed", cfg.seed},
          {"lightworld_rooms", cfg.lightworld_rooms},
          {"learner",
           {{"epsilon", cfg.learner.epsilon},
            {"lambda", cfg.learner.lambda},
            {"gamma", cfg.learner.gamma},
            {"alpha", cfg.learner.alpha},
            {"episodes", cfg.learner.episodes},
            {"max_episode_steps", cfg.learner.max_episode_steps},
            {"replacing_traces", cfg.learner.replacing_traces}}},
          {"discovery",
           {{"lr", cfg.discovery.lr},
            {"likelihood_target", cfg.discovery.likelihood_target},
            {"conv_tol", cfg.discovery.conv_tol},
            {"patience", cfg.discovery.patience},
            {"max_epochs", cfg.discovery.max_epochs},
            {"init_scale", cfg.discovery.init_scale}}}};
}

// Missing keys keep their defaults, so sparse config files stay valid.
inline ProtocolConfig protocol_config_from_json(const json& j) {
  ProtocolConfig cfg;
  cfg.domain = domain_from_name(j.value("domain", domain_name(cfg.domain)));
  cfg.n_train = j.value("n_train", cfg.n_train);
  cfg.n_test = j.value("n_test", cfg.n_test);
  cfg.n_options = j.value("n_options", cfg.n_options);
  cfg.opsr_k = j.value("opsr_k", cfg.opsr_k);
  cfg.pca_variance = j.value("pca_variance", cfg.pca_variance);
  cfg.n_seeds = j.value("n_seeds", cfg.n_seeds);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.lightworld_rooms = j.value("lightworld_rooms", cfg.lightworld_rooms);
  if (j.contains("learner")) {
    const json& l = j.at("learner");
    cfg.learner.epsilon = l.value("epsilon", cfg.learner.epsilon);
    cfg.learner.lambda = l.value("lambda", cfg.learner.lambda);
    cfg.learner.gamma = l.value("gamma", cfg.learner.gamma);
    cfg.learner.alpha = l.value("alpha", cfg.learner.alpha);
    cfg.learner.episodes = l.value("episodes", cfg.learner.episodes);
    cfg.learner.max_episode_steps =
        l.value("max_episode_steps", cfg.learner.max_episode_steps);
    cfg.learner.replacing_traces =
        l.value("replacing_traces", cfg.learner.replacing_traces);
  }
  if (j.contains("discovery")) {
    const json& d = j.at("discovery");
    cfg.discovery.lr = d.value("lr", cfg.discovery.lr);
    cfg.discovery.likelihood_target =
        d.value("likelihood_target", cfg.discovery.likelihood_target);
    cfg.discovery.conv_tol = d.value("conv_tol", cfg.discovery.conv_tol);
    cfg.discovery.patience = d.value("patience", cfg.discovery.patience);
    cfg.discovery.max_epochs = d.value("max_epochs", cfg.discovery.max_epochs);
    cfg.discovery.init_scale = d.value("init_scale", cfg.discovery.init_scale);
  }
  cfg.learner.check();
  return cfg;
}

inline json report_to_json(const ExperimentReport& r) {
  json j;
  j["config"] = protocol_config_to_json(r.config);
  j["runs"] = json::array();
  for (const auto& run : r.runs)
    j["runs"].push_back({{"task_id", run.task_id},
                         {"seed", run.seed},
                         {"agent", run.agent},
                         {"returns", run.curve.returns},
                         {"steps", run.curve.steps},
                         {"aurc", run.aurc_value}});
  j["occupancy"] = {{"rows", r.occupancy.rows},
                    {"alive", r.occupancy.alive},
                    {"n_controllers", r.occupancy.n_controllers}};
  j["train_stories"] = r.train_stories;
  j["mean_aurc_options"] = r.mean_aurc_options;
  j["mean_aurc_baseline"] = r.mean_aurc_baseline;
  j["p_value"] = r.p_value;
  j["discovery_converged"] = r.discovery_converged;
  return j;
}

inline ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.config = protocol_config_from_json(j.at("config"));
  for (const json& run : j.at("runs")) {
    RunRecord rec;
    rec.task_id = run.at("task_id").get<int>();
    rec.seed = run.at("seed").get<int>();
    rec.agent = run.at("agent").get<std::string>();
    rec.curve.returns = run.at("returns").get<std::vector<double>>();
    rec.curve.steps = run.at("steps").get<std::vector<int>>();
    rec.aurc_value = run.at("aurc").get<double>();
    r.runs.push_back(std::move(rec));
  }
  r.occupancy.rows = j.at("occupancy").at("rows").get<std::vector<std::vector<int>>>();
  r.occupancy.alive = j.at("occupancy").at("alive").get<std::vector<int>>();
  r.occupancy.n_controllers = j.at("occupancy").at("n_controllers").get<int>();
  r.train_stories = j.at("train_stories").get<std::vector<std::vector<std::string>>>();
  r.mean_aurc_options = j.at("mean_aurc_options").get<double>();
  r.mean_aurc_baseline = j.at("mean_aurc_baseline").get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.discovery_converged = j.at("discovery_converged").get<bool>();
  return r;
}

// Writes curves.csv, aurc.csv, occupancy.csv, report.json, curves.svg into
// dir, restricted to the requested formats {"csv","json","svg"}.
inline std::vector<std::string> emit_report(const ExperimentReport& r,
                                            const std::string& dir,
                                            const std::vector<std::string>& formats) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  auto wants = [&](const std::string& f) {
    return std::find(formats.begin(), formats.end(), f) != formats.end();
  };
  if (wants("csv")) {
    std::ostringstream curves, aurcs, occ;
    curves << "task_id,seed,agent,episode,return,steps\n";
    aurcs << "task_id,seed,agent,aurc\n";
    for (const auto& run : r.runs) {
      for (std::size_t ep = 0; ep < run.curve.returns.size(); ++ep)
        curves << run.task_id << "," << run.seed << "," << run.agent << "," << ep
               << "," << detail::format_double(run.curve.returns[ep]) << ","
               << run.curve.steps[ep] << "\n";
      aurcs << run.task_id << "," << run.seed << "," << run.agent << ","
            << detail::format_double(run.aurc_value) << "\n";
    }
    occ << "timestep,controller,count,alive\n";
    for (std::size_t t = 0; t < r.occupancy.rows.size(); ++t)
      for (int c = 0; c < r.occupancy.n_controllers; ++c) {
        std::string name = (c == r.occupancy.n_controllers - 1)
                               ? std::string("primitive")
                               : "option" + std::to_string(c);
        occ << t << "," << name << "," << r.occupancy.rows[t][c] << ","
            << r.occupancy.alive[t] << "\n";
      }
    for (auto [name, text] : {std::pair<std::string, std::string>{"curves.csv", curves.str()},
                              {"aurc.csv", aurcs.str()},
                              {"occupancy.csv", occ.str()}}) {
      std::string path = (fs::path(dir) / name).string();
      write_text_file(path, text);
      written.push_back(path);
    }
  }
  if (wants("json")) {
    std::string path = (fs::path(dir) / "report.json").string();
    write_text_file(path, report_to_json(r).dump(2) + "\n");
    written.push_back(path);
  }
  if (wants("svg")) {
    // mean curve per agent with min/max band, pooled over tasks and seeds
    std::vector<PlotSeries> series;
    for (const std::string& agent : {"options", "baseline"}) {
      PlotSeries s;
      s.label = agent;
      std::size_t len = 0;
      for (const auto& run : r.runs)
        if (run.agent == agent) len = std::max(len, run.curve.returns.size());
      for (std::size_t ep = 0; ep < len; ++ep) {
        double sum = 0, lo = 0, hi = 0;
        int n = 0;
        for (const auto& run : r.runs) {
          if (run.agent != agent || ep >= run.curve.returns.size()) continue;
          double v = run.curve.returns[ep];
          if (n == 0) { lo = hi = v; }
          lo = std::min(lo, v);
          hi = std::max(hi, v);
          sum += v;
          ++n;
        }
        if (n == 0) break;
        s.mean.push_back(sum / n);
        s.lo.push_back(lo);
        s.hi.push_back(hi);
      }
      series.push_back(std::move(s));
    }
    std::string path = (fs::path(dir) / "curves.svg").string();
    write_text_file(path, render_svg_plot(series, "episode return"));
    written.push_back(path);
  }
  return written;
}

}  // namespace opsr
