#pragma once

// Option discovery from demonstration traces by maximum likelihood: the
// hierarchical generative model over latent options, a scaled Baum-Welch
// forward-backward pass, the expectation-gradient of the trace
// log-likelihood, and Adam ascent.

#include "opsr/mdp.hpp"
#include "opsr/options.hpp"
#include "opsr/rng.hpp"

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace opsr {

struct Trajectory {
  int task = 0;
  std::vector<int> states;    // s_1 .. s_{T+1}
  std::vector<int> actions;   // a_1 .. a_T
  std::vector<double> rewards;  // carried for analysis; unused by likelihood

  int length() const { return static_cast<int>(actions.size()); }
  void check() const {
    if (states.size() != actions.size() + 1 || rewards.size() != actions.size())
      throw std::invalid_argument("Trajectory: inconsistent lengths");
  }
};

struct DegenerateLikelihoodError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One task as seen by discovery: its dynamics and the per-state feature rows
// options condition on (rows of `features`, n_states x f).
struct DiscoveryTask {
  TabularMdp mdp;
  Eigen::MatrixXd features;
};

// The extended option set Omega+ = Omega ∪ {⊥}. The null token (index K) has
// termination identically 1 and its own per-task primitive policy. pi_h and
// pi_null act on one-hot ground features, so their parameters are plain logit
// tables with one column per ground state.
struct ExtendedOptionSet {
  int n_options = 0;  // K
  int n_actions = 0;
  std::vector<OptionDef> options;        // size K, shared across tasks
  std::vector<Eigen::MatrixXd> pi_h;     // per task: (K+1) x n_states logits
  std::vector<Eigen::MatrixXd> pi_null;  // per task: n_actions x n_states logits

  int null_token() const { return n_options; }

  Eigen::VectorXd high_level_dist(int task, int s) const {
    return softmax(pi_h[task].col(s));
  }
  Eigen::VectorXd null_action_dist(int task, int s) const {
    return softmax(pi_null[task].col(s));
  }
  double termination(const DiscoveryTask& env, int omega, int s) const {
    if (omega == n_options) return 1.0;  // beta_⊥ ≡ 1
    return option_termination_prob(options[omega], env.features.row(s).transpose());
  }
  Eigen::VectorXd action_dist(const DiscoveryTask& env, int task, int omega, int s) const {
    if (omega == n_options) return null_action_dist(task, s);
    return option_action_dist(options[omega], env.features.row(s).transpose());
  }
};

inline ExtendedOptionSet make_extended_option_set(int K, int n_actions, int n_features,
                                                  const std::vector<int>& task_sizes,
                                                  Rng& rng, double init_scale = 0.1) {
  ExtendedOptionSet es;
  es.n_options = K;
  es.n_actions = n_actions;
  auto init = [&](auto& m) {
    for (long i = 0; i < m.size(); ++i)
      m.data()[i] = uniform_real(rng, -init_scale, init_scale);
  };
  for (int k = 0; k < K; ++k) {
    OptionDef o = OptionDef::zeros(n_actions, n_features, "opt" + std::to_string(k));
    init(o.w_pi);
    init(o.b_pi);
    init(o.w_beta);
    init(o.b_beta);
    es.options.push_back(std::move(o));
  }
  for (int n : task_sizes) {
    Eigen::MatrixXd h(K + 1, n), p(n_actions, n);
    init(h);
    init(p);
    es.pi_h.push_back(std::move(h));
    es.pi_null.push_back(std::move(p));
  }
  return es;
}

// Pr(omega | omega_prev, s): the re-decision mixture. From ⊥ a fresh draw from
// pi_H; from an option, continue with probability 1-beta, else redraw.
inline double option_transition_prob(const ExtendedOptionSet& es,
                                     const DiscoveryTask& env, int task,
                                     int omega_prev, int omega, int s) {
  Eigen::VectorXd h = es.high_level_dist(task, s);
  if (omega_prev == es.null_token()) return h(omega);
  double beta = es.termination(env, omega_prev, s);
  return (1.0 - beta) * (omega_prev == omega ? 1.0 : 0.0) + beta * h(omega);
}

// Samples a trajectory of exactly T steps (or until a terminal state) from
// the hierarchical generative model, returning the latent option sequence.
inline std::pair<Trajectory, std::vector<int>> generative_rollout(
    const ExtendedOptionSet& es, const DiscoveryTask& env, int task, int s0,
    int T, Rng& rng) {
  Trajectory tau;
  tau.task = task;
  std::vector<int> latent;
  int s = s0, omega = es.null_token();
  tau.states.push_back(s);
  for (int t = 0; t < T && !env.mdp.terminal[s]; ++t) {
    if (uniform01(rng) < es.termination(env, omega, s)) {
      Eigen::VectorXd h = es.high_level_dist(task, s);
      std::vector<double> w(h.data(), h.data() + h.size());
      omega = static_cast<int>(sample_categorical(rng, w));
    }
    latent.push_back(omega);
    Eigen::VectorXd d = es.action_dist(env, task, omega, s);
    std::vector<double> w(d.data(), d.data() + d.size());
    int a = static_cast<int>(sample_categorical(rng, w));
    double roll = uniform01(rng), acc = 0.0;
    int nxt = env.mdp.n_states - 1;
    for (int t2 = 0; t2 < env.mdp.n_states; ++t2) {
      acc += env.mdp.p(s, a, t2);
      if (roll < acc) { nxt = t2; break; }
    }
    tau.actions.push_back(a);
    tau.rewards.push_back(env.mdp.r(s, a, nxt));
    tau.states.push_back(nxt);
    s = nxt;
  }
  return {std::move(tau), std::move(latent)};
}

struct Posteriors {
  Eigen::MatrixXd u;                 // T x (K+1): Pr(omega_t | tau)
  std::vector<Eigen::MatrixXd> v;    // T-1 entries: Pr(omega_t, omega_{t+1} | tau)
  double log_z = 0.0;                // log-likelihood (env transitions dropped)
};

// Scaled forward-backward over the latent option chain. Environment
// transition factors are constant in the parameters and excluded from log_z.
inline Posteriors forward_backward(const ExtendedOptionSet& es,
                                   const DiscoveryTask& env,
                                   const Trajectory& tau) {
  tau.check();
  const int T = tau.length();
  const int M = es.n_options + 1;
  if (T == 0) throw std::invalid_argument("forward_backward: empty trajectory");
  const int task = tau.task;

  // emissions b_t(omega) = pi_omega(a_t | s_t)
  Eigen::MatrixXd b(T, M);
  for (int t = 0; t < T; ++t)
    for (int w = 0; w < M; ++w)
      b(t, w) = es.action_dist(env, task, w, tau.states[t])(tau.actions[t]);

  // transition matrices Tm[t](w, w') for the move t -> t+1, evaluated at
  // s_{t+1} (the state where the re-decision happens)
  std::vector<Eigen::MatrixXd> Tm(T - 1);
  for (int t = 0; t + 1 < T; ++t) {
    Tm[t].resize(M, M);
    int s = tau.states[t + 1];
    Eigen::VectorXd h = es.high_level_dist(task, s);
    for (int w = 0; w < M; ++w) {
      double beta = es.termination(env, w, s);
      for (int w2 = 0; w2 < M; ++w2)
        Tm[t](w, w2) = (1.0 - beta) * (w == w2 ? 1.0 : 0.0) + beta * h(w2);
    }
  }

  Posteriors post;
  Eigen::MatrixXd alpha(T, M), beta_msg(T, M);
  std::vector<double> c(T);
  Eigen::VectorXd h1 = es.high_level_dist(task, tau.states[0]);
  alpha.row(0) = (h1.array() * b.row(0).transpose().array()).transpose();
  c[0] = alpha.row(0).sum();
  if (!(c[0] > 0.0))
    throw DegenerateLikelihoodError("forward_backward: zero-likelihood trace");
  alpha.row(0) /= c[0];
  for (int t = 1; t < T; ++t) {
    alpha.row(t) = (alpha.row(t - 1) * Tm[t - 1]).cwiseProduct(b.row(t));
    c[t] = alpha.row(t).sum();
    if (!(c[t] > 0.0))
      throw DegenerateLikelihoodError("forward_backward: zero-likelihood trace");
    alpha.row(t) /= c[t];
  }
  beta_msg.row(T - 1).setOnes();
  for (int t = T - 2; t >= 0; --t)
    beta_msg.row(t) =
        (Tm[t] * (b.row(t + 1).transpose().cwiseProduct(beta_msg.row(t + 1).transpose())))
            .transpose() /
        c[t + 1];

  post.u = alpha.cwiseProduct(beta_msg);
  post.v.resize(T - 1);
  for (int t = 0; t + 1 < T; ++t) {
    post.v[t] = (alpha.row(t).transpose() *
                 (b.row(t + 1).cwiseProduct(beta_msg.row(t + 1)))) // outer product
                    .cwiseProduct(Tm[t]) /
                c[t + 1];
  }
  post.log_z = 0.0;
  for (double ci : c) post.log_z += std::log(ci);
  return post;
}

inline double log_likelihood(const ExtendedOptionSet& es,
                             const std::vector<DiscoveryTask>& tasks,
                             const std::vector<Trajectory>& traces) {
  double total = 0.0;
  for (const auto& tau : traces)
    total += forward_backward(es, tasks[tau.task], tau).log_z;
  return total;
}

// Gradients mirror the parameter containers of ExtendedOptionSet.
struct OptionSetGradient {
  std::vector<OptionDef> options;        // same shapes, holding gradients
  std::vector<Eigen::MatrixXd> pi_h;
  std::vector<Eigen::MatrixXd> pi_null;

  static OptionSetGradient zeros_like(const ExtendedOptionSet& es) {
    OptionSetGradient g;
    for (const auto& o : es.options)
      g.options.push_back(OptionDef::zeros(o.n_actions(), o.n_features()));
    for (const auto& m : es.pi_h) g.pi_h.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    for (const auto& m : es.pi_null)
      g.pi_null.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    return g;
  }
};

// d log_z / d theta for one trace, accumulated into g: the initial pi_H term,
// the re-decision transition terms (chain-ruled through the continuation
// mixture into termination and pi_H parameters), and the emission terms.
inline void gradient(const ExtendedOptionSet& es, const DiscoveryTask& env,
                     const Trajectory& tau, const Posteriors& post,
                     OptionSetGradient& g) {
  const int T = tau.length();
  const int M = es.n_options + 1;
  const int K = es.n_options;
  const int task = tau.task;

  // initial term: grad of sum_w u_1(w) log pi_H(w | s_1)
  {
    Eigen::VectorXd h = es.high_level_dist(task, tau.states[0]);
    g.pi_h[task].col(tau.states[0]) += post.u.row(0).transpose() - h;
  }

  // transition terms
  for (int t = 0; t + 1 < T; ++t) {
    int s = tau.states[t + 1];
    Eigen::VectorXd h = es.high_level_dist(task, s);
    Eigen::VectorXd h_coef = Eigen::VectorXd::Zero(M);  // softmax-gradient mass on pi_H
    for (int w = 0; w < M; ++w) {
      double row_mass = post.v[t].row(w).sum();
      if (row_mass <= 0.0) continue;
      if (w == K) {
        // from ⊥ the transition is exactly pi_H
        h_coef += post.v[t].row(w).transpose();
        continue;
      }
      double beta = es.termination(env, w, s);
      Eigen::VectorXd feat = env.features.row(s).transpose();
      double g_beta = 0.0;
      for (int w2 = 0; w2 < M; ++w2) {
        double vt = post.v[t](w, w2);
        if (vt <= 0.0) continue;
        double q = (1.0 - beta) * (w == w2 ? 1.0 : 0.0) + beta * h(w2);
        g_beta += vt * (h(w2) - (w == w2 ? 1.0 : 0.0)) / q;
        h_coef(w2) += vt * beta * h(w2) / q;
      }
      // beta = softmax over (terminate, continue) logits; d beta / d logit0 =
      // beta (1 - beta), d beta / d logit1 = -beta (1 - beta)
      double d_logit = g_beta * beta * (1.0 - beta);
      g.options[w].w_beta.row(0) += d_logit * feat.transpose();
      g.options[w].w_beta.row(1) -= d_logit * feat.transpose();
      g.options[w].b_beta(0) += d_logit;
      g.options[w].b_beta(1) -= d_logit;
    }
    // pi_H softmax gradient: sum_w2 h_coef(w2) (e_{w2} - h)
    g.pi_h[task].col(s) += h_coef - h_coef.sum() * h;
  }

  // emission terms
  for (int t = 0; t < T; ++t) {
    int s = tau.states[t], a = tau.actions[t];
    for (int w = 0; w < M; ++w) {
      double ut = post.u(t, w);
      if (ut <= 0.0) continue;
      Eigen::VectorXd pi = es.action_dist(env, task, w, s);
      Eigen::VectorXd delta = -ut * pi;
      delta(a) += ut;
      if (w == K) {
        g.pi_null[task].col(s) += delta;
      } else {
        Eigen::VectorXd feat = env.features.row(s).transpose();
        g.options[w].w_pi += delta * feat.transpose();
        g.options[w].b_pi += delta;
      }
    }
  }
}

// ------------------------------------------------------------------ Adam ---

namespace detail {

// flat views over all trainable parameters, in a fixed order
inline std::vector<Eigen::Map<Eigen::VectorXd>> param_views(ExtendedOptionSet& es) {
  std::vector<Eigen::Map<Eigen::VectorXd>> v;
  for (auto& o : es.options) {
    v.emplace_back(o.w_pi.data(), o.w_pi.size());
    v.emplace_back(o.b_pi.data(), o.b_pi.size());
    v.emplace_back(o.w_beta.data(), o.w_beta.size());
    v.emplace_back(o.b_beta.data(), o.b_beta.size());
  }
  for (auto& m : es.pi_h) v.emplace_back(m.data(), m.size());
  for (auto& m : es.pi_null) v.emplace_back(m.data(), m.size());
  return v;
}

inline std::vector<Eigen::Map<Eigen::VectorXd>> param_views(OptionSetGradient& g) {
  std::vector<Eigen::Map<Eigen::VectorXd>> v;
  for (auto& o : g.options) {
    v.emplace_back(o.w_pi.data(), o.w_pi.size());
    v.emplace_back(o.b_pi.data(), o.b_pi.size());
    v.emplace_back(o.w_beta.data(), o.w_beta.size());
    v.emplace_back(o.b_beta.data(), o.b_beta.size());
  }
  for (auto& m : g.pi_h) v.emplace_back(m.data(), m.size());
  for (auto& m : g.pi_null) v.emplace_back(m.data(), m.size());
  return v;
}

}  // namespace detail

struct AdamState {
  Eigen::VectorXd m, v;
  long t = 0;
};

// One Adam ascent step on the flattened parameters.
inline void adam_step(ExtendedOptionSet& es, OptionSetGradient& grads, AdamState& state,
                      double lr = 0.3, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  auto pv = detail::param_views(es);
  auto gv = detail::param_views(grads);
  if (pv.size() != gv.size()) throw std::invalid_argument("adam_step: shape mismatch");
  long total = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i].size() != gv[i].size())
      throw std::invalid_argument("adam_step: shape mismatch");
    total += pv[i].size();
  }
  if (state.m.size() != total) {
    state.m = Eigen::VectorXd::Zero(total);
    state.v = Eigen::VectorXd::Zero(total);
    state.t = 0;
  }
  ++state.t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  long off = 0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    for (long j = 0; j < pv[i].size(); ++j) {
      double gij = gv[i](j);
      double& m = state.m(off + j);
      double& v = state.v(off + j);
      m = beta1 * m + (1.0 - beta1) * gij;
      v = beta2 * v + (1.0 - beta2) * gij * gij;
      pv[i](j) += lr * (m / bc1) / (std::sqrt(v / bc2) + eps);  // ascent
    }
    off += pv[i].size();
  }
}

// ------------------------------------------------------- training driver ---

struct DiscoveryConfig {
  int n_options = 3;
  double lr = 0.3;
  double likelihood_target = 0.99;  // per-step geometric-mean trace likelihood
  double conv_tol = 1e-6;
  int patience = 50;
  int max_epochs = 2000;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  std::string feature_id;
};

struct TrainingLogRow {
  int epoch = 0;
  double log_likelihood = 0.0;
  double grad_norm = 0.0;
};

struct DiscoveryResult {
  ExtendedOptionSet params;  // best-so-far by log-likelihood
  bool converged = false;
  double best_log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<TrainingLogRow> log;
};

// Expectation-Gradient training: per epoch, shuffle the traces and take one
// Adam step per trace.
inline DiscoveryResult discover_options(const std::vector<Trajectory>& traces,
                                        const std::vector<DiscoveryTask>& tasks,
                                        const DiscoveryConfig& cfg) {
  if (traces.empty()) throw std::invalid_argument("discover_options: no traces");
  long total_steps = 0;
  for (const auto& tau : traces) {
    tau.check();
    if (tau.task < 0 || tau.task >= static_cast<int>(tasks.size()))
      throw std::invalid_argument("discover_options: trace references unknown task");
    total_steps += tau.length();
  }
  int n_actions = tasks[0].mdp.n_actions;
  int n_features = static_cast<int>(tasks[0].features.cols());
  std::vector<int> sizes;
  for (const auto& t : tasks) sizes.push_back(t.mdp.n_states);

  Rng rng = make_rng(cfg.seed, {0xD15CULL});
  ExtendedOptionSet es = make_extended_option_set(cfg.n_options, n_actions, n_features,
                                                  sizes, rng, cfg.init_scale);
  for (auto& o : es.options) o.feature_id = cfg.feature_id;
  AdamState adam;
  DiscoveryResult res;
  res.params = es;
  int stale = 0;
  std::vector<std::size_t> order(traces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle(rng, order);
    double epoch_ll = 0.0, epoch_gnorm = 0.0;
    for (std::size_t idx : order) {
      const Trajectory& tau = traces[idx];
      Posteriors post = forward_backward(es, tasks[tau.task], tau);
      epoch_ll += post.log_z;
      OptionSetGradient g = OptionSetGradient::zeros_like(es);
      gradient(es, tasks[tau.task], tau, post, g);
      double gn = 0.0;
      for (auto& view : detail::param_views(g)) gn += view.squaredNorm();
      epoch_gnorm += std::sqrt(gn);
      adam_step(es, g, adam, cfg.lr);
    }
    res.log.push_back({epoch, epoch_ll, epoch_gnorm / static_cast<double>(traces.size())});
    if (epoch_ll > res.best_log_likelihood + cfg.conv_tol) {
      res.best_log_likelihood = epoch_ll;
      res.params = es;
      stale = 0;
    } else {
      ++stale;
    }
    double per_step = std::exp(epoch_ll / static_cast<double>(total_steps));
    if (per_step >= cfg.likelihood_target) {
      res.converged = true;
      if (epoch_ll > res.best_log_likelihood) {
        res.best_log_likelihood = epoch_ll;
        res.params = es;
      }
      break;
    }
    if (stale >= cfg.patience) break;
  }
  return res;
}

}  // namespace opsr
