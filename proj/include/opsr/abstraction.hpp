#pragma once

// State abstractions over tabular MDPs: abstract-MDP construction by weighted
// aggregation, policy derivation (full and partial), transfer cover,
// coarseness and transfer-value comparison, value compatibility, and transfer
// optimality — the latter two by brute force over small instances.

#include "opsr/mdp.hpp"
#include "opsr/outcomes.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace opsr {

struct StateAbstraction {
  std::vector<std::string> class_of;                // label per ground state
  std::map<std::string, std::vector<int>> classes;  // label -> sorted members

  int n_states() const { return static_cast<int>(class_of.size()); }
  int n_classes() const { return static_cast<int>(classes.size()); }

  static StateAbstraction from_labels(std::vector<std::string> labels) {
    StateAbstraction phi;
    phi.class_of = std::move(labels);
    for (int s = 0; s < phi.n_states(); ++s) phi.classes[phi.class_of[s]].push_back(s);
    return phi;
  }

  static StateAbstraction identity(int n_states) {
    std::vector<std::string> labels(n_states);
    for (int s = 0; s < n_states; ++s) labels[s] = "s" + std::to_string(s);
    return from_labels(std::move(labels));
  }

  // Sorted label list; fixes the abstract state indexing everywhere.
  std::vector<std::string> label_order() const {
    std::vector<std::string> out;
    for (const auto& [label, _] : classes) out.push_back(label);
    return out;
  }
};

// Minimal outcome-equivalent abstraction: states share a class iff their
// outcome fingerprints at `horizon` are equal. Labels are the fingerprint hex
// digests, so classes align across tasks by construction.
inline StateAbstraction minimal_outcome_equivalent_abstraction(
    const TabularMdp& m, const OutcomeModel& om, int horizon,
    double resolution = 1e-9) {
  std::vector<std::string> labels(m.n_states);
  for (int s = 0; s < m.n_states; ++s)
    labels[s] = fingerprint(m, om, s, horizon, resolution).hex();
  return StateAbstraction::from_labels(std::move(labels));
}

struct WeightingFn {
  std::vector<double> weight;  // per ground state
};

inline std::vector<std::string> validate_weighting(const StateAbstraction& phi,
                                                   const WeightingFn& w) {
  std::vector<std::string> issues;
  if (w.weight.size() != phi.class_of.size()) {
    issues.push_back("weighting size mismatch");
    return issues;
  }
  for (double x : w.weight)
    if (x < 0.0) issues.push_back("negative weight");
  for (const auto& [label, members] : phi.classes) {
    double sum = 0.0;
    for (int s : members) sum += w.weight[s];
    if (std::abs(sum - 1.0) > 1e-12)
      issues.push_back("weights of class " + label + " sum to " + std::to_string(sum));
  }
  return issues;
}

inline WeightingFn uniform_weighting(const StateAbstraction& phi) {
  WeightingFn w;
  w.weight.assign(phi.class_of.size(), 0.0);
  for (const auto& [_, members] : phi.classes)
    for (int s : members) w.weight[s] = 1.0 / members.size();
  return w;
}

struct AbstractMdp {
  TabularMdp mdp;                     // over abstract classes
  std::vector<std::string> labels;    // abstract index -> class label
  std::map<std::string, int> index_of;
  std::string provenance;

  bool has_label(const std::string& l) const { return index_of.count(l) > 0; }
};

struct InvalidWeightingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Aggregates ground dynamics into an abstract MDP:
//   p(B | A, a)    = sum_{s in A} w(s) sum_{t in B} p(t | s, a)
//   r(A, a, B)     = w-weighted mean of r(s, a, t) conditioned on landing in B
// A class is terminal iff all its members are terminal.
inline AbstractMdp build_abstract_mdp(const TabularMdp& m, const StateAbstraction& phi,
                                      const WeightingFn& w,
                                      const std::string& provenance = "") {
  if (!validate_weighting(phi, w).empty())
    throw InvalidWeightingError("build_abstract_mdp: invalid weighting");
  AbstractMdp out;
  out.labels = phi.label_order();
  for (int i = 0; i < static_cast<int>(out.labels.size()); ++i)
    out.index_of[out.labels[i]] = i;
  out.provenance = provenance;
  const int N = static_cast<int>(out.labels.size());
  out.mdp = TabularMdp::zeros(N, m.n_actions, m.discount);

  std::vector<int> class_idx(m.n_states);
  for (int s = 0; s < m.n_states; ++s) class_idx[s] = out.index_of.at(phi.class_of[s]);

  for (int i = 0; i < N; ++i) {
    const auto& members = phi.classes.at(out.labels[i]);
    bool all_terminal = true;
    for (int s : members) all_terminal = all_terminal && m.terminal[s];
    for (int a = 0; a < m.n_actions; ++a) {
      std::vector<double> pr(N, 0.0), rw(N, 0.0);
      for (int s : members) {
        double ws = w.weight[s];
        if (ws == 0.0) continue;
        for (int t = 0; t < m.n_states; ++t) {
          double pt = m.p(s, a, t);
          if (pt == 0.0) continue;
          pr[class_idx[t]] += ws * pt;
          rw[class_idx[t]] += ws * pt * m.r(s, a, t);
        }
      }
      for (int j = 0; j < N; ++j) {
        out.mdp.p(i, a, j) = pr[j];
        out.mdp.r(i, a, j) = pr[j] > 0.0 ? rw[j] / pr[j] : 0.0;
      }
    }
    if (all_terminal) out.mdp.make_terminal(i);
  }
  if (m.initial_state >= 0) out.mdp.initial_state = class_idx[m.initial_state];
  return out;
}

// Aggregates the outcome function with the same weighting and copies the
// reward weights (w_{r_phi} = w_r).
inline OutcomeModel abstract_outcome_model(const TabularMdp& m, const OutcomeModel& om,
                                           const StateAbstraction& phi,
                                           const WeightingFn& w,
                                           const AbstractMdp& amdp) {
  const int N = static_cast<int>(amdp.labels.size());
  OutcomeModel out = OutcomeModel::zeros(amdp.mdp, om.dim);
  out.reward_weights = om.reward_weights;
  out.labels = om.labels;
  out.story_relevant = om.story_relevant;

  std::vector<int> class_idx(m.n_states);
  for (int s = 0; s < m.n_states; ++s) class_idx[s] = amdp.index_of.at(phi.class_of[s]);

  for (int i = 0; i < N; ++i) {
    const auto& members = phi.classes.at(amdp.labels[i]);
    if (amdp.mdp.terminal[i]) continue;  // absorbing self-loop keeps zero sigma
    for (int a = 0; a < m.n_actions; ++a) {
      std::vector<std::vector<double>> acc(N, std::vector<double>(om.dim, 0.0));
      std::vector<double> mass(N, 0.0);
      for (int s : members) {
        double ws = w.weight[s];
        if (ws == 0.0) continue;
        for (int t = 0; t < m.n_states; ++t) {
          double pt = m.p(s, a, t);
          if (pt == 0.0) continue;
          const double* sg = om.sig(m.n_actions, m.n_states, s, a, t);
          mass[class_idx[t]] += ws * pt;
          for (int j = 0; j < om.dim; ++j) acc[class_idx[t]][j] += ws * pt * sg[j];
        }
      }
      for (int jcl = 0; jcl < N; ++jcl) {
        if (mass[jcl] == 0.0) continue;
        double* sg = out.sig(amdp.mdp.n_actions, N, i, a, jcl);
        for (int j = 0; j < om.dim; ++j) sg[j] = acc[jcl][j] / mass[jcl];
      }
    }
  }
  return out;
}

// delta(a|s) = pi_phi(a| phi(s)); requires every ground class to be present in
// the abstract MDP.
inline TabularPolicy derive_policy(const TabularPolicy& abstract_policy,
                                   const AbstractMdp& amdp,
                                   const StateAbstraction& phi) {
  TabularPolicy out;
  out.n_states = phi.n_states();
  out.n_actions = abstract_policy.n_actions;
  out.action_probs.assign(static_cast<std::size_t>(out.n_states) * out.n_actions, 0.0);
  for (int s = 0; s < out.n_states; ++s) {
    auto it = amdp.index_of.find(phi.class_of[s]);
    if (it == amdp.index_of.end())
      throw std::invalid_argument("derive_policy: ground class missing from abstract MDP");
    for (int a = 0; a < out.n_actions; ++a) out.pi(s, a) = abstract_policy.pi(it->second, a);
  }
  return out;
}

// Ground states of the target task whose class occurs in the source
// abstraction's label set.
inline std::vector<int> transfer_cover(const StateAbstraction& phi_alpha,
                                       const StateAbstraction& phi_beta) {
  std::set<std::string> alpha_labels;
  for (const auto& [label, _] : phi_alpha.classes) alpha_labels.insert(label);
  std::vector<int> cover;
  for (int s = 0; s < phi_beta.n_states(); ++s)
    if (alpha_labels.count(phi_beta.class_of[s])) cover.push_back(s);
  return cover;
}

// Cover for a source given as an abstract MDP's label set.
inline std::vector<int> transfer_cover(const AbstractMdp& amdp_alpha,
                                       const StateAbstraction& phi_beta) {
  std::vector<int> cover;
  for (int s = 0; s < phi_beta.n_states(); ++s)
    if (amdp_alpha.has_label(phi_beta.class_of[s])) cover.push_back(s);
  return cover;
}

struct PartiallyDerived {
  TabularPolicy policy;
  std::vector<int> cover;
};

// Derived rule on the transfer cover, caller-supplied default elsewhere.
inline PartiallyDerived partially_derive(const TabularPolicy& abstract_policy,
                                         const AbstractMdp& amdp_alpha,
                                         const StateAbstraction& phi_beta,
                                         const TabularPolicy& default_policy) {
  PartiallyDerived out;
  out.policy = default_policy;
  out.cover = transfer_cover(amdp_alpha, phi_beta);
  for (int s : out.cover) {
    int i = amdp_alpha.index_of.at(phi_beta.class_of[s]);
    for (int a = 0; a < out.policy.n_actions; ++a)
      out.policy.pi(s, a) = abstract_policy.pi(i, a);
  }
  return out;
}

enum class Coarseness {
  isomorphic,
  strictly_finer,
  finer,
  strictly_coarser,
  coarser,
  incomparable,
};

// phi1 is finer than phi2 when states equivalent under phi1 are also
// equivalent under phi2. Equal partitions are isomorphic (label-independent);
// strictness requires a proper refinement.
inline Coarseness compare_coarseness(const StateAbstraction& phi1,
                                     const StateAbstraction& phi2) {
  if (phi1.n_states() != phi2.n_states())
    throw std::invalid_argument("compare_coarseness: different ground state sets");
  auto refines = [](const StateAbstraction& a, const StateAbstraction& b) {
    // every class of a lies inside one class of b
    for (const auto& [_, members] : a.classes) {
      const std::string& lbl = b.class_of[members.front()];
      for (int s : members)
        if (b.class_of[s] != lbl) return false;
    }
    return true;
  };
  bool f12 = refines(phi1, phi2);
  bool f21 = refines(phi2, phi1);
  if (f12 && f21) return Coarseness::isomorphic;
  if (f12) return Coarseness::strictly_finer;
  if (f21) return Coarseness::strictly_coarser;
  return Coarseness::incomparable;
}

// All deterministic derived policies of phi on mdp (one action per class).
inline std::vector<TabularPolicy> enumerate_derived_deterministic(
    const StateAbstraction& phi, const TabularMdp& m, long cap = 4096) {
  double count = 1.0;
  for (int i = 0; i < phi.n_classes(); ++i) count *= m.n_actions;
  if (count > static_cast<double>(cap))
    throw CapExceededError("enumerate_derived_deterministic: cap exceeded");
  std::vector<std::string> order;
  for (const auto& [label, _] : phi.classes) order.push_back(label);
  std::vector<TabularPolicy> out;
  long total = static_cast<long>(count);
  for (long code = 0; code < total; ++code) {
    long c = code;
    std::map<std::string, int> choice;
    for (const auto& label : order) {
      choice[label] = static_cast<int>(c % m.n_actions);
      c /= m.n_actions;
    }
    std::vector<int> actions(m.n_states);
    for (int s = 0; s < m.n_states; ++s) actions[s] = choice[phi.class_of[s]];
    out.push_back(TabularPolicy::deterministic(actions, m.n_actions));
  }
  return out;
}

enum class TransferValueOrder {
  strictly_greater,
  greater,
  not_greater,
  incomparable,
};

// Compares the transfer value of phi against phi_prime on mdp by enumerating
// deterministic derived policies (the derived sets are closed under per-class
// action choice, so their optima are attained by deterministic members).
// Optionally restricts the state quantifier to `restrict_states` (the
// multi-task/conditional variant quantifies over the transfer cover).
inline TransferValueOrder has_greater_transfer_value(
    const StateAbstraction& phi, const StateAbstraction& phi_prime,
    const TabularMdp& m, double tol,
    const std::vector<int>* restrict_states = nullptr) {
  std::vector<int> states;
  if (restrict_states) {
    states = *restrict_states;
  } else {
    states.resize(m.n_states);
    for (int s = 0; s < m.n_states; ++s) states[s] = s;
  }
  auto values = [&](const StateAbstraction& p) {
    std::vector<std::vector<double>> vs;
    for (const auto& pol : enumerate_derived_deterministic(p, m))
      vs.push_back(policy_evaluation_exact(m, pol).values);
    return vs;
  };
  auto v1 = values(phi);
  auto v2 = values(phi_prime);
  auto dominates = [&](const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b, bool strict) {
    for (const auto& va : a) {
      bool ok = true;
      for (const auto& vb : b) {
        bool geq = true, somewhere_strict = false;
        for (int s : states) {
          if (va[s] < vb[s] - tol) { geq = false; break; }
          if (va[s] > vb[s] + tol) somewhere_strict = true;
        }
        if (!geq || (strict && !somewhere_strict)) { ok = false; break; }
      }
      if (ok) return true;
    }
    return false;
  };
  if (dominates(v1, v2, true)) return TransferValueOrder::strictly_greater;
  if (dominates(v1, v2, false)) return TransferValueOrder::greater;
  if (dominates(v2, v1, false)) return TransferValueOrder::not_greater;
  return TransferValueOrder::incomparable;
}

namespace detail {

// Enumerates deterministic completions of `base` over `free_states`, calling
// fn(policy) for each; returns false early if fn returns false.
template <typename Fn>
bool for_each_completion(const TabularPolicy& base, const std::vector<int>& free_states,
                         int n_actions, long cap, Fn&& fn) {
  double count = 1.0;
  for (std::size_t i = 0; i < free_states.size(); ++i) count *= n_actions;
  if (count > static_cast<double>(cap))
    throw CapExceededError("completion enumeration cap exceeded");
  long total = static_cast<long>(count);
  TabularPolicy pol = base;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int s : free_states) {
      int a = static_cast<int>(c % n_actions);
      c /= n_actions;
      for (int b = 0; b < n_actions; ++b) pol.pi(s, b) = (b == a) ? 1.0 : 0.0;
    }
    if (!fn(pol)) return false;
  }
  return true;
}

}  // namespace detail

// Value compatibility: for every partially derived policy of abstract_policy
// (i.e. every deterministic completion off the cover), the ground value at
// each cover state equals the abstract value of its class, within tol.
inline bool check_value_compatibility(const TabularPolicy& abstract_policy,
                                      const AbstractMdp& amdp,
                                      const TabularMdp& ground_mdp,
                                      const StateAbstraction& phi,
                                      double tol, long cap = 4096,
                                      int* witness_state = nullptr) {
  ValueFunction v_abs = policy_evaluation_exact(amdp.mdp, abstract_policy);
  std::vector<int> cover = transfer_cover(amdp, phi);
  std::vector<std::uint8_t> on_cover(ground_mdp.n_states, 0);
  for (int s : cover) on_cover[s] = 1;
  std::vector<int> off;
  for (int s = 0; s < ground_mdp.n_states; ++s)
    if (!on_cover[s]) off.push_back(s);

  TabularPolicy base = TabularPolicy::uniform(ground_mdp.n_states, ground_mdp.n_actions);
  for (int s : cover) {
    int i = amdp.index_of.at(phi.class_of[s]);
    for (int a = 0; a < ground_mdp.n_actions; ++a) base.pi(s, a) = abstract_policy.pi(i, a);
  }
  int witness = -1;
  bool ok = detail::for_each_completion(
      base, off, ground_mdp.n_actions, cap, [&](const TabularPolicy& pol) {
        ValueFunction v = policy_evaluation_exact(ground_mdp, pol);
        for (int s : cover) {
          int i = amdp.index_of.at(phi.class_of[s]);
          if (std::abs(v.values[s] - v_abs.values[i]) > tol) {
            witness = s;
            return false;
          }
        }
        return true;
      });
  if (!ok && witness_state) *witness_state = witness;
  return ok;
}

struct TransferOptimalityResult {
  bool ok = true;
  // On failure: which condition broke, the offending ground state, and the
  // per-class actions of the offending optimal abstract policy.
  std::string reason;
  int witness_state = -1;
  std::vector<int> witness_abstract_actions;
};

namespace detail {

// All deterministic abstract policies greedy w.r.t. the optimal values.
inline std::vector<std::vector<int>> optimal_abstract_action_sets(const TabularMdp& m,
                                                                  double tol) {
  auto [pol, v] = solve_optimal(m, tol);
  std::vector<std::vector<int>> per_state(m.n_states);
  for (int s = 0; s < m.n_states; ++s) {
    if (m.terminal[s]) {
      per_state[s] = {0};
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> q(m.n_actions, 0.0);
    for (int a = 0; a < m.n_actions; ++a) {
      for (int t = 0; t < m.n_states; ++t) {
        double pr = m.p(s, a, t);
        if (pr != 0.0) q[a] += pr * (m.r(s, a, t) + m.discount * v.values[t]);
      }
      best = std::max(best, q[a]);
    }
    for (int a = 0; a < m.n_actions; ++a)
      if (q[a] >= best - tol) per_state[s].push_back(a);
  }
  return per_state;
}

}  // namespace detail

// Transfer optimality of a source abstract MDP for a target ground task:
// (1) every optimal abstract policy must be derived value-compatible, and
// (2) from every optimal abstract policy, some partially derived policy must
//     attain the ground-optimal value on the transfer cover.
inline TransferOptimalityResult check_transfer_optimality(const AbstractMdp& amdp_alpha,
                                                          const TabularMdp& m_beta,
                                                          const StateAbstraction& phi_beta,
                                                          double tol, long cap = 4096) {
  TransferOptimalityResult res;
  std::vector<int> cover = transfer_cover(amdp_alpha, phi_beta);
  std::vector<std::uint8_t> on_cover(m_beta.n_states, 0);
  for (int s : cover) on_cover[s] = 1;
  std::vector<int> off;
  for (int s = 0; s < m_beta.n_states; ++s)
    if (!on_cover[s]) off.push_back(s);

  ValueFunction v_star = solve_optimal(m_beta, tol).second;

  auto action_sets = detail::optimal_abstract_action_sets(amdp_alpha.mdp, tol);
  const int N = amdp_alpha.mdp.n_states;
  double n_opt = 1.0;
  for (int i = 0; i < N; ++i) n_opt *= action_sets[i].size();
  if (n_opt > static_cast<double>(cap))
    throw CapExceededError("check_transfer_optimality: too many optimal abstract policies");

  std::vector<int> pick(N, 0);
  long total = static_cast<long>(n_opt);
  for (long code = 0; code < total; ++code) {
    long c = code;
    std::vector<int> actions(N);
    for (int i = 0; i < N; ++i) {
      actions[i] = action_sets[i][c % action_sets[i].size()];
      c /= static_cast<long>(action_sets[i].size());
    }
    TabularPolicy pi_abs = TabularPolicy::deterministic(actions, amdp_alpha.mdp.n_actions);

    int witness = -1;
    if (!check_value_compatibility(pi_abs, amdp_alpha, m_beta, phi_beta, tol, cap, &witness)) {
      res.ok = false;
      res.reason = "optimal abstract policy not derived value-compatible";
      res.witness_state = witness;
      res.witness_abstract_actions = actions;
      return res;
    }

    TabularPolicy base = TabularPolicy::uniform(m_beta.n_states, m_beta.n_actions);
    for (int s : cover) {
      int i = amdp_alpha.index_of.at(phi_beta.class_of[s]);
      for (int a = 0; a < m_beta.n_actions; ++a) base.pi(s, a) = pi_abs.pi(i, a);
    }
    bool attains = false;
    int worst = -1;
    detail::for_each_completion(
        base, off, m_beta.n_actions, cap, [&](const TabularPolicy& pol) {
          ValueFunction v = policy_evaluation_exact(m_beta, pol);
          bool all = true;
          for (int s : cover)
            if (v.values[s] < v_star.values[s] - tol) {
              all = false;
              worst = s;
              break;
            }
          if (all) {
            attains = true;
            return false;  // stop early, found one
          }
          return true;
        });
    if (!attains) {
      res.ok = false;
      res.reason = "no partially derived policy attains the ground optimum on the cover";
      res.witness_state = worst;
      res.witness_abstract_actions = actions;
      return res;
    }
  }
  return res;
}

}  // namespace opsr
