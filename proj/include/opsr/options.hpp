#pragma once

// Options (temporally extended skills) with linear-softmax control and
// termination over a feature space, plus SMDP execution semantics.

#include "opsr/mdp.hpp"
#include "opsr/rng.hpp"

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace opsr {

struct OptionDef {
  std::string feature_id;    // describes the feature configuration
  Eigen::MatrixXd w_pi;      // actions x features
  Eigen::VectorXd b_pi;      // actions
  Eigen::MatrixXd w_beta;    // 2 x features; row 0 is the terminate logit
  Eigen::VectorXd b_beta;    // 2

  static OptionDef zeros(int n_actions, int n_features, std::string id = {}) {
    OptionDef o;
    o.feature_id = std::move(id);
    o.w_pi = Eigen::MatrixXd::Zero(n_actions, n_features);
    o.b_pi = Eigen::VectorXd::Zero(n_actions);
    o.w_beta = Eigen::MatrixXd::Zero(2, n_features);
    o.b_beta = Eigen::VectorXd::Zero(2);
    return o;
  }
  int n_actions() const { return static_cast<int>(w_pi.rows()); }
  int n_features() const { return static_cast<int>(w_pi.cols()); }
};

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  double mx = logits.maxCoeff();
  Eigen::VectorXd z(logits.size());
  for (long i = 0; i < logits.size(); ++i) z(i) = std::exp(logits(i) - mx);
  return z / z.sum();
}

inline Eigen::VectorXd option_action_dist(const OptionDef& opt,
                                          const Eigen::VectorXd& features) {
  if (features.size() != opt.w_pi.cols())
    throw std::invalid_argument("option_action_dist: feature dim mismatch");
  return softmax(opt.w_pi * features + opt.b_pi);
}

inline double option_termination_prob(const OptionDef& opt,
                                      const Eigen::VectorXd& features) {
  if (features.size() != opt.w_beta.cols())
    throw std::invalid_argument("option_termination_prob: feature dim mismatch");
  Eigen::VectorXd p = softmax(opt.w_beta * features + opt.b_beta);
  return p(0);
}

struct OptionRollout {
  int end_state = -1;
  int steps = 0;
  double reward = 0.0;  // gamma^i-discounted sum internal to the call
  struct Step { int s, a; double r; };
  std::vector<Step> trace;
};

// Runs the option from s until its termination coin (sampled before each
// action after the first), an environment terminal, or max_steps. The feature
// provider maps a state index to the option's feature vector.
template <typename FeatureFn>
OptionRollout execute_option(const TabularMdp& m, FeatureFn&& features,
                             const OptionDef& opt, int s, Rng& rng,
                             int max_steps = 100) {
  if (max_steps < 1) throw std::invalid_argument("execute_option: max_steps < 1");
  OptionRollout out;
  double disc = 1.0;
  int cur = s;
  for (int step = 0; step < max_steps; ++step) {
    if (m.terminal[cur]) break;
    if (step > 0 && uniform01(rng) < option_termination_prob(opt, features(cur)))
      break;
    Eigen::VectorXd dist = option_action_dist(opt, features(cur));
    std::vector<double> w(dist.data(), dist.data() + dist.size());
    int a = static_cast<int>(sample_categorical(rng, w));
    int nxt = -1;
    double roll = uniform01(rng), acc = 0.0;
    for (int t = 0; t < m.n_states; ++t) {
      acc += m.p(cur, a, t);
      if (roll < acc) { nxt = t; break; }
    }
    if (nxt < 0) nxt = m.n_states - 1;
    double r = m.r(cur, a, nxt);
    out.trace.push_back({cur, a, r});
    out.reward += disc * r;
    disc *= m.discount;
    cur = nxt;
    ++out.steps;
  }
  out.end_state = cur;
  return out;
}

// The SMDP action set: indices below n_primitive are ground actions, the rest
// dispatch to options.
struct SmdpActionSet {
  int n_primitive = 0;
  std::vector<OptionDef> options;
  int size() const { return n_primitive + static_cast<int>(options.size()); }
  bool is_option(int a) const { return a >= n_primitive; }
  const OptionDef& option_of(int a) const { return options.at(a - n_primitive); }
};

inline SmdpActionSet smdp_action_set(int n_primitive, std::vector<OptionDef> options) {
  return SmdpActionSet{n_primitive, std::move(options)};
}

struct SmdpStep {
  int end_state = -1;
  int steps = 1;
  double reward = 0.0;  // discounted inside the step; backup uses gamma^steps
};

// One high-level step: either a single primitive action or a full option
// rollout.
template <typename FeatureFn>
SmdpStep smdp_step(const TabularMdp& m, FeatureFn&& features,
                   const SmdpActionSet& acts, int s, int a, Rng& rng,
                   int max_steps = 100) {
  SmdpStep out;
  if (!acts.is_option(a)) {
    double roll = uniform01(rng), acc = 0.0;
    int nxt = m.n_states - 1;
    for (int t = 0; t < m.n_states; ++t) {
      acc += m.p(s, a, t);
      if (roll < acc) { nxt = t; break; }
    }
    out.end_state = nxt;
    out.steps = 1;
    out.reward = m.r(s, a, nxt);
    return out;
  }
  OptionRollout ro = execute_option(m, features, acts.option_of(a), s, rng, max_steps);
  out.end_state = ro.end_state;
  out.steps = std::max(ro.steps, 1);
  out.reward = ro.reward;
  return out;
}

}  // namespace opsr
