#pragma once

// A hand-built pair of two-action episodic tasks demonstrating that outcome
// equivalence alone does not yield transfer optimality when the target task
// is not plannable. Task alpha is deterministic; task beta branches
// stochastically after the first `a`, and only a reactive policy collects the
// larger payoff. The start states of both tasks are outcome-equivalent, yet
// transferring the source's optimal abstract behaviour to beta is
// suboptimal: the abstract optimum is worth 1 while beta's ground optimum at
// the start is 2.

#include "opsr/mdp.hpp"
#include "opsr/outcomes.hpp"

namespace opsr {

struct CounterexamplePair {
  TabularMdp m_alpha;   // states: 0 = start, 1 = mid, 2 = terminal
  TabularMdp m_beta;    // states: 0 = start, 1 = branch_a, 2 = branch_b, 3 = terminal
  OutcomeModel om_alpha;
  OutcomeModel om_beta;
  // action indices
  static constexpr int A = 0;
  static constexpr int B = 1;
};

inline CounterexamplePair make_counterexample_pair() {
  CounterexamplePair cx;

  // Task alpha (deterministic): start -b-> terminal(+1); start -a-> mid;
  // mid -a-> terminal(+1); mid -b-> terminal(+1).
  TabularMdp ma = TabularMdp::zeros(3, 2, 1.0);
  ma.initial_state = 0;
  ma.p(0, CounterexamplePair::A, 1) = 1.0;
  ma.p(0, CounterexamplePair::B, 2) = 1.0;
  ma.r(0, CounterexamplePair::B, 2) = 1.0;
  ma.p(1, CounterexamplePair::A, 2) = 1.0;
  ma.r(1, CounterexamplePair::A, 2) = 1.0;
  ma.p(1, CounterexamplePair::B, 2) = 1.0;
  ma.r(1, CounterexamplePair::B, 2) = 1.0;
  ma.make_terminal(2);

  // Task beta (stochastic): start -b-> terminal(+1);
  // start -a-> branch_a or branch_b each w.p. 0.5;
  // branch_a: a -> +2, b -> 0; branch_b: a -> 0, b -> +2.
  TabularMdp mb = TabularMdp::zeros(4, 2, 1.0);
  mb.initial_state = 0;
  mb.p(0, CounterexamplePair::B, 3) = 1.0;
  mb.r(0, CounterexamplePair::B, 3) = 1.0;
  mb.p(0, CounterexamplePair::A, 1) = 0.5;
  mb.p(0, CounterexamplePair::A, 2) = 0.5;
  mb.p(1, CounterexamplePair::A, 3) = 1.0;
  mb.r(1, CounterexamplePair::A, 3) = 2.0;
  mb.p(1, CounterexamplePair::B, 3) = 1.0;
  mb.r(1, CounterexamplePair::B, 3) = 0.0;
  mb.p(2, CounterexamplePair::A, 3) = 1.0;
  mb.r(2, CounterexamplePair::A, 3) = 0.0;
  mb.p(2, CounterexamplePair::B, 3) = 1.0;
  mb.r(2, CounterexamplePair::B, 3) = 2.0;
  mb.make_terminal(3);

  // Outcome = reward (d = 1, w_r = 1).
  auto reward_outcome = [](const TabularMdp& m) {
    OutcomeModel om = OutcomeModel::zeros(m, 1);
    om.reward_weights = {1.0};
    om.labels = {"reward"};
    for (int s = 0; s < m.n_states; ++s)
      for (int a = 0; a < m.n_actions; ++a)
        for (int t = 0; t < m.n_states; ++t)
          if (m.p(s, a, t) > 0.0) om.sig(m.n_actions, m.n_states, s, a, t)[0] = m.r(s, a, t);
    return om;
  };
  cx.m_alpha = ma;
  cx.m_beta = mb;
  cx.om_alpha = reward_outcome(ma);
  cx.om_beta = reward_outcome(mb);
  return cx;
}

}  // namespace opsr
