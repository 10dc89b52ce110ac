#pragma once

// Finite tabular MDPs: validation, exact policy evaluation, finite-horizon
// values, optimal control by policy iteration, open-loop (fixed action
// sequence) values, and a brute-force plannability check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace opsr {

struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  // transition[s*A*S + a*S + t] = p(t | s, a)
  std::vector<double> transition;
  // reward[s*A*S + a*S + t] = r(s, a, t), received on the transition
  std::vector<double> reward;
  double discount = 1.0;
  std::vector<std::uint8_t> terminal;
  int initial_state = -1;  // optional; -1 when unset

  double p(int s, int a, int t) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + t];
  }
  double& p(int s, int a, int t) {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + t];
  }
  double r(int s, int a, int t) const {
    return reward[(static_cast<std::size_t>(s) * n_actions + a) * n_states + t];
  }
  double& r(int s, int a, int t) {
    return reward[(static_cast<std::size_t>(s) * n_actions + a) * n_states + t];
  }

  // Expected one-step reward for (s, a).
  double expected_reward(int s, int a) const {
    double acc = 0.0;
    for (int t = 0; t < n_states; ++t) acc += p(s, a, t) * r(s, a, t);
    return acc;
  }

  bool is_deterministic() const {
    for (int s = 0; s < n_states; ++s)
      for (int a = 0; a < n_actions; ++a)
        for (int t = 0; t < n_states; ++t) {
          double v = p(s, a, t);
          if (v != 0.0 && v != 1.0) return false;
        }
    return true;
  }

  // Unique successor for deterministic (s, a) rows; -1 if the row is not a
  // point mass.
  int successor(int s, int a) const {
    for (int t = 0; t < n_states; ++t)
      if (p(s, a, t) == 1.0) return t;
    return -1;
  }

  static TabularMdp zeros(int n_states, int n_actions, double discount) {
    TabularMdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.discount = discount;
    std::size_t n = static_cast<std::size_t>(n_states) * n_actions * n_states;
    m.transition.assign(n, 0.0);
    m.reward.assign(n, 0.0);
    m.terminal.assign(n_states, 0);
    return m;
  }

  // Makes `s` terminal: absorbing self-loop with zero reward.
  void make_terminal(int s) {
    terminal[s] = 1;
    for (int a = 0; a < n_actions; ++a) {
      for (int t = 0; t < n_states; ++t) {
        p(s, a, t) = (t == s) ? 1.0 : 0.0;
        r(s, a, t) = 0.0;
      }
    }
  }
};

struct TabularPolicy {
  std::vector<double> action_probs;  // [s*A + a]
  int n_states = 0;
  int n_actions = 0;

  double pi(int s, int a) const { return action_probs[static_cast<std::size_t>(s) * n_actions + a]; }
  double& pi(int s, int a) { return action_probs[static_cast<std::size_t>(s) * n_actions + a]; }

  static TabularPolicy uniform(int n_states, int n_actions) {
    TabularPolicy p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.action_probs.assign(static_cast<std::size_t>(n_states) * n_actions,
                          1.0 / n_actions);
    return p;
  }

  static TabularPolicy deterministic(const std::vector<int>& actions, int n_actions) {
    TabularPolicy p;
    p.n_states = static_cast<int>(actions.size());
    p.n_actions = n_actions;
    p.action_probs.assign(static_cast<std::size_t>(p.n_states) * n_actions, 0.0);
    for (int s = 0; s < p.n_states; ++s) p.pi(s, actions[s]) = 1.0;
    return p;
  }
};

struct ValueFunction {
  std::vector<double> values;
  double operator[](int s) const { return values[s]; }
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapExceededError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- validation --------------------------------------------------------

namespace detail {

// States from which some policy stays among non-terminal states forever with
// probability 1 (greatest fixpoint). Empty iff every policy from every state
// reaches a terminal state almost surely.
inline std::vector<int> nonterminating_core(const TabularMdp& m) {
  std::vector<std::uint8_t> in(m.n_states, 0);
  for (int s = 0; s < m.n_states; ++s) in[s] = m.terminal[s] ? 0 : 1;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int s = 0; s < m.n_states; ++s) {
      if (!in[s]) continue;
      bool has_staying_action = false;
      for (int a = 0; a < m.n_actions && !has_staying_action; ++a) {
        double mass = 0.0;
        for (int t = 0; t < m.n_states; ++t)
          if (in[t]) mass += m.p(s, a, t);
        if (mass >= 1.0 - 1e-12) has_staying_action = true;
      }
      if (!has_staying_action) {
        in[s] = 0;
        changed = true;
      }
    }
  }
  std::vector<int> out;
  for (int s = 0; s < m.n_states; ++s)
    if (in[s]) out.push_back(s);
  return out;
}

}  // namespace detail

inline std::vector<std::string> validate_mdp(const TabularMdp& m) {
  std::vector<std::string> issues;
  auto note = [&](const std::string& s) { issues.push_back(s); };
  std::size_t expect = static_cast<std::size_t>(m.n_states) * m.n_actions * m.n_states;
  if (m.transition.size() != expect || m.reward.size() != expect ||
      m.terminal.size() != static_cast<std::size_t>(m.n_states)) {
    note("array sizes inconsistent with n_states/n_actions");
    return issues;
  }
  if (m.discount < 0.0 || m.discount > 1.0) note("discount outside [0,1]");
  for (int s = 0; s < m.n_states; ++s) {
    for (int a = 0; a < m.n_actions; ++a) {
      double sum = 0.0;
      for (int t = 0; t < m.n_states; ++t) {
        double v = m.p(s, a, t);
        if (v < 0.0) {
          std::ostringstream os;
          os << "negative transition probability at (s=" << s << ",a=" << a
             << ",s'=" << t << ")";
          note(os.str());
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "transition row (s=" << s << ",a=" << a << ") sums to " << sum
           << " (deficit " << (1.0 - sum) << ")";
        note(os.str());
      }
    }
  }
  for (int s = 0; s < m.n_states; ++s) {
    if (!m.terminal[s]) continue;
    for (int a = 0; a < m.n_actions; ++a) {
      if (std::abs(m.p(s, a, s) - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "terminal state " << s << " not absorbing under action " << a;
        note(os.str());
      }
      if (std::abs(m.r(s, a, s)) != 0.0) {
        std::ostringstream os;
        os << "terminal state " << s << " has nonzero self-loop reward under action " << a;
        note(os.str());
      }
    }
  }
  if (m.discount == 1.0) {
    auto core = detail::nonterminating_core(m);
    if (!core.empty()) {
      std::ostringstream os;
      os << "discount=1 requires termination w.p. 1 under every policy; "
            "violated from state "
         << core.front();
      note(os.str());
    }
  }
  if (m.initial_state >= m.n_states) note("initial_state out of range");
  return issues;
}

inline std::vector<std::string> validate_policy(const TabularPolicy& p) {
  std::vector<std::string> issues;
  for (int s = 0; s < p.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < p.n_actions; ++a) {
      if (p.pi(s, a) < 0.0) issues.push_back("negative action probability");
      sum += p.pi(s, a);
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "policy row " << s << " sums to " << sum;
      issues.push_back(os.str());
    }
  }
  return issues;
}

// --- evaluation --------------------------------------------------------

// One Bellman expectation backup of v under (m, policy).
inline std::vector<double> bellman_backup(const TabularMdp& m,
                                          const TabularPolicy& policy,
                                          const std::vector<double>& v) {
  std::vector<double> out(m.n_states, 0.0);
  for (int s = 0; s < m.n_states; ++s) {
    if (m.terminal[s]) continue;
    double acc = 0.0;
    for (int a = 0; a < m.n_actions; ++a) {
      double pa = policy.pi(s, a);
      if (pa == 0.0) continue;
      double q = 0.0;
      for (int t = 0; t < m.n_states; ++t) {
        double pr = m.p(s, a, t);
        if (pr == 0.0) continue;
        q += pr * (m.r(s, a, t) + m.discount * v[t]);
      }
      acc += pa * q;
    }
    out[s] = acc;
  }
  return out;
}

// Iterative policy evaluation to a Bellman residual of at most tol in
// sup-norm. Terminal states have value 0.
inline ValueFunction policy_evaluation(const TabularMdp& m,
                                       const TabularPolicy& policy,
                                       double tol,
                                       long max_iters = 2'000'000) {
  std::vector<double> v(m.n_states, 0.0);
  for (long it = 0; it < max_iters; ++it) {
    std::vector<double> nv = bellman_backup(m, policy, v);
    double delta = 0.0;
    for (int s = 0; s < m.n_states; ++s)
      delta = std::max(delta, std::abs(nv[s] - v[s]));
    v = std::move(nv);
    if (delta <= tol) return ValueFunction{std::move(v)};
  }
  throw DivergenceError("policy_evaluation did not converge (discount=1 with improper dynamics?)");
}

// Exact evaluation by solving the linear system on non-terminal states.
// Valid for discount < 1, and for discount = 1 on proper episodic MDPs.
inline ValueFunction policy_evaluation_exact(const TabularMdp& m,
                                             const TabularPolicy& policy) {
  std::vector<int> live;
  std::vector<int> idx(m.n_states, -1);
  for (int s = 0; s < m.n_states; ++s)
    if (!m.terminal[s]) {
      idx[s] = static_cast<int>(live.size());
      live.push_back(s);
    }
  int n = static_cast<int>(live.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    int s = live[i];
    for (int a = 0; a < m.n_actions; ++a) {
      double pa = policy.pi(s, a);
      if (pa == 0.0) continue;
      for (int t = 0; t < m.n_states; ++t) {
        double pr = m.p(s, a, t);
        if (pr == 0.0) continue;
        b(i) += pa * pr * m.r(s, a, t);
        if (idx[t] >= 0) A(i, idx[t]) -= pa * pr * m.discount;
      }
    }
  }
  Eigen::VectorXd x = A.partialPivLu().solve(b);
  std::vector<double> v(m.n_states, 0.0);
  for (int i = 0; i < n; ++i) v[live[i]] = x(i);
  return ValueFunction{std::move(v)};
}

// k-step truncated discounted value; v^0 = 0 everywhere.
inline ValueFunction k_horizon_value(const TabularMdp& m,
                                     const TabularPolicy& policy, int k) {
  std::vector<double> v(m.n_states, 0.0);
  for (int i = 0; i < k; ++i) v = bellman_backup(m, policy, v);
  return ValueFunction{std::move(v)};
}

// --- control -----------------------------------------------------------

// Policy iteration; returns the deterministic greedy policy (ties broken by
// lowest action index) and its value function.
inline std::pair<TabularPolicy, ValueFunction> solve_optimal(const TabularMdp& m,
                                                             double tol) {
  std::vector<int> actions(m.n_states, 0);
  ValueFunction v{std::vector<double>(m.n_states, 0.0)};
  for (int iter = 0; iter < m.n_states * m.n_actions + 64; ++iter) {
    TabularPolicy pol = TabularPolicy::deterministic(actions, m.n_actions);
    v = policy_evaluation_exact(m, pol);
    bool stable = true;
    for (int s = 0; s < m.n_states; ++s) {
      if (m.terminal[s]) continue;
      int best = 0;
      double best_q = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < m.n_actions; ++a) {
        double q = 0.0;
        for (int t = 0; t < m.n_states; ++t) {
          double pr = m.p(s, a, t);
          if (pr == 0.0) continue;
          q += pr * (m.r(s, a, t) + m.discount * v.values[t]);
        }
        if (q > best_q + tol) {
          best_q = q;
          best = a;
        }
      }
      if (best != actions[s]) {
        // Only switch when strictly better to guarantee termination and the
        // lowest-index tie-break.
        double q_cur = 0.0;
        for (int t = 0; t < m.n_states; ++t) {
          double pr = m.p(s, actions[s], t);
          if (pr != 0.0) q_cur += pr * (m.r(s, actions[s], t) + m.discount * v.values[t]);
        }
        if (best_q > q_cur + tol || (best < actions[s] && best_q >= q_cur - tol)) {
          actions[s] = best;
          stable = false;
        }
      }
    }
    if (stable) {
      // Final tie-break pass: among actions within tol of the max Q, pick the
      // lowest index.
      for (int s = 0; s < m.n_states; ++s) {
        if (m.terminal[s]) continue;
        double best_q = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.n_actions; ++a) {
          double q = 0.0;
          for (int t = 0; t < m.n_states; ++t) {
            double pr = m.p(s, a, t);
            if (pr != 0.0) q += pr * (m.r(s, a, t) + m.discount * v.values[t]);
          }
          best_q = std::max(best_q, q);
        }
        for (int a = 0; a < m.n_actions; ++a) {
          double q = 0.0;
          for (int t = 0; t < m.n_states; ++t) {
            double pr = m.p(s, a, t);
            if (pr != 0.0) q += pr * (m.r(s, a, t) + m.discount * v.values[t]);
          }
          if (q >= best_q - tol) {
            actions[s] = a;
            break;
          }
        }
      }
      TabularPolicy pol = TabularPolicy::deterministic(actions, m.n_actions);
      return {pol, policy_evaluation_exact(m, pol)};
    }
  }
  throw DivergenceError("solve_optimal: policy iteration failed to stabilize");
}

// Expected discounted reward of executing a fixed action sequence; states
// evolve stochastically, actions do not react.
inline double open_loop_value(const TabularMdp& m, int s,
                              const std::vector<int>& aseq) {
  if (aseq.empty()) throw std::invalid_argument("open_loop_value: empty sequence");
  if (s < 0 || s >= m.n_states) throw std::out_of_range("open_loop_value: bad state");
  std::vector<double> dist(m.n_states, 0.0);
  dist[s] = 1.0;
  double value = 0.0;
  double g = 1.0;
  for (int a : aseq) {
    if (a < 0 || a >= m.n_actions) throw std::out_of_range("open_loop_value: bad action");
    std::vector<double> next(m.n_states, 0.0);
    for (int u = 0; u < m.n_states; ++u) {
      if (dist[u] == 0.0) continue;
      for (int t = 0; t < m.n_states; ++t) {
        double pr = m.p(u, a, t);
        if (pr == 0.0) continue;
        value += g * dist[u] * pr * m.r(u, a, t);
        next[t] += dist[u] * pr;
      }
    }
    dist = std::move(next);
    g *= m.discount;
  }
  return value;
}

// Brute-force plannability check: for every deterministic policy, state, and
// horizon n <= `horizon`, some length-n action sequence must match the
// policy's n-horizon value. Deterministic MDPs short-circuit to true.
inline bool is_plannable_up_to(const TabularMdp& m, int horizon, double tol,
                               int state_cap = 8, int horizon_cap = 6) {
  if (m.n_states > state_cap) throw CapExceededError("is_plannable_up_to: state cap exceeded");
  if (horizon > horizon_cap) throw CapExceededError("is_plannable_up_to: horizon cap exceeded");
  if (m.is_deterministic()) return true;

  // All length-n open-loop values per state, computed once.
  // sequences[n] = list of values per state for each sequence of length n.
  std::vector<std::vector<std::vector<double>>> open_vals(horizon + 1);
  std::vector<std::vector<int>> seqs;   // current sequences
  seqs.push_back({});
  for (int n = 1; n <= horizon; ++n) {
    std::vector<std::vector<int>> next_seqs;
    for (const auto& base : seqs)
      for (int a = 0; a < m.n_actions; ++a) {
        auto s2 = base;
        s2.push_back(a);
        next_seqs.push_back(std::move(s2));
      }
    seqs = std::move(next_seqs);
    open_vals[n].reserve(seqs.size());
    for (const auto& q : seqs) {
      std::vector<double> per_state(m.n_states);
      for (int s = 0; s < m.n_states; ++s) per_state[s] = open_loop_value(m, s, q);
      open_vals[n].push_back(std::move(per_state));
    }
  }

  long n_policies = 1;
  for (int s = 0; s < m.n_states; ++s) {
    n_policies *= m.n_actions;
    if (n_policies > 10'000'000L) throw CapExceededError("is_plannable_up_to: policy count too large");
  }
  std::vector<int> actions(m.n_states, 0);
  for (long code = 0; code < n_policies; ++code) {
    long c = code;
    for (int s = 0; s < m.n_states; ++s) {
      actions[s] = static_cast<int>(c % m.n_actions);
      c /= m.n_actions;
    }
    TabularPolicy pol = TabularPolicy::deterministic(actions, m.n_actions);
    for (int n = 1; n <= horizon; ++n) {
      ValueFunction vn = k_horizon_value(m, pol, n);
      for (int s = 0; s < m.n_states; ++s) {
        bool matched = false;
        for (const auto& per_state : open_vals[n]) {
          if (std::abs(per_state[s] - vn.values[s]) <= tol) {
            matched = true;
            break;
          }
        }
        if (!matched) return false;
      }
    }
  }
  return true;
}

}  // namespace opsr
