#pragma once

// Seeded generators for small random MDPs and outcome models, used by the
// property-test suites and the theory verifier.

#include "opsr/abstraction.hpp"
#include "opsr/mdp.hpp"
#include "opsr/outcomes.hpp"
#include "opsr/rng.hpp"

namespace opsr {

// Random episodic deterministic MDP with an outcome-decomposed reward.
// Outcomes are drawn from a small integer set so that distinct states often
// share fingerprints (exercising non-trivial abstractions). Guaranteed to
// have at least one terminal state reachable structure-wise (not necessarily
// from every state).
inline std::pair<TabularMdp, OutcomeModel> random_deterministic_task(
    Rng& rng, int n_states, int n_actions, int dim, double discount = 0.9) {
  TabularMdp m = TabularMdp::zeros(n_states, n_actions, discount);
  OutcomeModel om = OutcomeModel::zeros(m, dim);
  for (int j = 0; j < dim; ++j)
    om.reward_weights[j] = static_cast<double>(uniform_index(rng, 5)) - 2.0;  // {-2..2}
  int n_terminal = 1 + static_cast<int>(uniform_index(rng, std::max(1, n_states / 3)));
  std::vector<int> ids(n_states);
  for (int s = 0; s < n_states; ++s) ids[s] = s;
  shuffle(rng, ids);
  for (int i = 0; i < n_terminal; ++i) m.terminal[ids[i]] = 1;

  for (int s = 0; s < n_states; ++s) {
    if (m.terminal[s]) {
      m.make_terminal(s);
      continue;
    }
    for (int a = 0; a < n_actions; ++a) {
      int t = static_cast<int>(uniform_index(rng, n_states));
      m.p(s, a, t) = 1.0;
      double* sg = om.sig(n_actions, n_states, s, a, t);
      double r = 0.0;
      for (int j = 0; j < dim; ++j) {
        sg[j] = static_cast<double>(uniform_index(rng, 3)) - 1.0;  // {-1,0,1}
        r += sg[j] * om.reward_weights[j];
      }
      m.r(s, a, t) = r;
    }
  }
  return {m, om};
}

// Random stochastic MDP (rows are random distributions over a few support
// states); rewards decomposed through a random outcome model per transition.
inline std::pair<TabularMdp, OutcomeModel> random_stochastic_task(
    Rng& rng, int n_states, int n_actions, int dim, double discount = 0.9) {
  TabularMdp m = TabularMdp::zeros(n_states, n_actions, discount);
  OutcomeModel om = OutcomeModel::zeros(m, dim);
  for (int j = 0; j < dim; ++j)
    om.reward_weights[j] = uniform_real(rng, -2.0, 2.0);
  if (n_states > 1) m.terminal[n_states - 1] = 1;
  for (int s = 0; s < n_states; ++s) {
    if (m.terminal[s]) {
      m.make_terminal(s);
      continue;
    }
    for (int a = 0; a < n_actions; ++a) {
      int support = 1 + static_cast<int>(uniform_index(rng, 3));
      std::vector<double> w(support);
      std::vector<int> tgt(support);
      double total = 0.0;
      for (int i = 0; i < support; ++i) {
        tgt[i] = static_cast<int>(uniform_index(rng, n_states));
        w[i] = uniform_real(rng, 0.1, 1.0);
        total += w[i];
      }
      for (int i = 0; i < support; ++i) m.p(s, a, tgt[i]) += w[i] / total;
      for (int t = 0; t < n_states; ++t) {
        if (m.p(s, a, t) == 0.0) continue;
        double* sg = om.sig(n_actions, n_states, s, a, t);
        double r = 0.0;
        for (int j = 0; j < dim; ++j) {
          sg[j] = static_cast<double>(uniform_index(rng, 3)) - 1.0;
          r += sg[j] * om.reward_weights[j];
        }
        m.r(s, a, t) = r;
      }
    }
  }
  return {m, om};
}

// Random weighting for an abstraction: mixes a seeded Dirichlet-like draw per
// class (uniform positives, normalized).
inline WeightingFn random_weighting(Rng& rng, const StateAbstraction& phi) {
  WeightingFn w;
  w.weight.assign(phi.class_of.size(), 0.0);
  for (const auto& [_, members] : phi.classes) {
    double total = 0.0;
    std::vector<double> raw(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      raw[i] = uniform_real(rng, 0.05, 1.0);
      total += raw[i];
    }
    for (std::size_t i = 0; i < members.size(); ++i) w.weight[members[i]] = raw[i] / total;
  }
  return w;
}

inline TabularPolicy random_policy(Rng& rng, int n_states, int n_actions) {
  TabularPolicy p;
  p.n_states = n_states;
  p.n_actions = n_actions;
  p.action_probs.resize(static_cast<std::size_t>(n_states) * n_actions);
  for (int s = 0; s < n_states; ++s) {
    double total = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      double x = uniform_real(rng, 0.01, 1.0);
      p.pi(s, a) = x;
      total += x;
    }
    for (int a = 0; a < n_actions; ++a) p.pi(s, a) /= total;
  }
  return p;
}

}  // namespace opsr
