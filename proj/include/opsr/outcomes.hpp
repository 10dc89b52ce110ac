#pragma once

// Outcome models sigma(s,a,s') in R^d with reward decomposition r = sigma^T w,
// expected outcome sequences under fixed action sequences, outcome-equivalence
// tests, and canonical fingerprints of a state's outcome behaviour up to a
// horizon.

#include "opsr/mdp.hpp"
#include "opsr/rng.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace opsr {

struct OutcomeModel {
  int dim = 0;
  // sigma[(((s*A)+a)*S+t)*dim + j]
  std::vector<double> sigma;
  std::vector<double> reward_weights;
  // Optional component names, used by story extraction and reports.
  std::vector<std::string> labels;
  // Components flagged false are bookkeeping terms (e.g. a constant per-step
  // cost carrier) and are skipped by story extraction.
  std::vector<std::uint8_t> story_relevant;

  const double* sig(int n_actions, int n_states, int s, int a, int t) const {
    return &sigma[(((static_cast<std::size_t>(s) * n_actions) + a) * n_states + t) * dim];
  }
  double* sig(int n_actions, int n_states, int s, int a, int t) {
    return &sigma[(((static_cast<std::size_t>(s) * n_actions) + a) * n_states + t) * dim];
  }

  static OutcomeModel zeros(const TabularMdp& m, int dim) {
    OutcomeModel om;
    om.dim = dim;
    om.sigma.assign(static_cast<std::size_t>(m.n_states) * m.n_actions * m.n_states * dim, 0.0);
    om.reward_weights.assign(dim, 0.0);
    om.labels.resize(dim);
    for (int j = 0; j < dim; ++j) om.labels[j] = "o" + std::to_string(j);
    om.story_relevant.assign(dim, 1);
    return om;
  }
};

struct ExpectedOutcomeSequence {
  std::vector<std::vector<double>> entries;  // one d-vector per step
};

// True iff r(s,a,s') = sigma(s,a,s')^T w_r on every transition with positive
// probability, within tol.
inline bool check_reward_decomposition(const TabularMdp& m, const OutcomeModel& om,
                                       double tol) {
  if (om.reward_weights.size() != static_cast<std::size_t>(om.dim))
    throw std::invalid_argument("check_reward_decomposition: weight size != dim");
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a)
      for (int t = 0; t < m.n_states; ++t) {
        if (m.p(s, a, t) <= 0.0) continue;
        const double* sg = om.sig(m.n_actions, m.n_states, s, a, t);
        double pred = 0.0;
        for (int j = 0; j < om.dim; ++j) pred += sg[j] * om.reward_weights[j];
        if (std::abs(pred - m.r(s, a, t)) > tol) return false;
      }
  return true;
}

namespace detail {

// Walks the action-sequence tree up to `horizon` in lexicographic (DFS
// preorder) action order. At every node (i.e. every nonempty prefix) calls
// visit(depth, outcome) with the expected outcome of the prefix's final step.
// Uses a single-state fast path on deterministic MDPs.
template <typename Visit>
void walk_outcome_tree(const TabularMdp& m, const OutcomeModel& om, int s,
                       int horizon, Visit&& visit) {
  const int A = m.n_actions, S = m.n_states, d = om.dim;
  if (m.is_deterministic()) {
    // stack of current states along the prefix
    std::vector<double> out(d);
    auto rec = [&](auto&& self, int cur, int depth) -> void {
      if (depth == horizon) return;
      for (int a = 0; a < A; ++a) {
        int nxt = m.successor(cur, a);
        const double* sg = om.sig(A, S, cur, a, nxt);
        for (int j = 0; j < d; ++j) out[j] = sg[j];
        visit(depth + 1, out.data());
        self(self, nxt, depth + 1);
      }
    };
    rec(rec, s, 0);
    return;
  }
  std::vector<double> out(d);
  std::vector<double> dist(S, 0.0);
  dist[s] = 1.0;
  auto rec = [&](auto&& self, const std::vector<double>& cur, int depth) -> void {
    if (depth == horizon) return;
    for (int a = 0; a < A; ++a) {
      std::vector<double> next(S, 0.0);
      for (int j = 0; j < d; ++j) out[j] = 0.0;
      for (int u = 0; u < S; ++u) {
        if (cur[u] == 0.0) continue;
        for (int t = 0; t < S; ++t) {
          double pr = m.p(u, a, t);
          if (pr == 0.0) continue;
          double w = cur[u] * pr;
          next[t] += w;
          const double* sg = om.sig(A, S, u, a, t);
          for (int j = 0; j < d; ++j) out[j] += w * sg[j];
        }
      }
      visit(depth + 1, out.data());
      self(self, next, depth + 1);
    }
  };
  rec(rec, dist, 0);
}

}  // namespace detail

// Entry j is E[sigma(S_{j-1}, a_j, S_j)] when executing aseq from s, computed
// by exact forward propagation of the state distribution.
inline ExpectedOutcomeSequence expected_outcome_sequence(const TabularMdp& m,
                                                         const OutcomeModel& om,
                                                         int s,
                                                         const std::vector<int>& aseq) {
  if (aseq.empty()) throw std::invalid_argument("expected_outcome_sequence: empty sequence");
  if (s < 0 || s >= m.n_states) throw std::out_of_range("expected_outcome_sequence: bad state");
  const int A = m.n_actions, S = m.n_states, d = om.dim;
  std::vector<double> dist(S, 0.0);
  dist[s] = 1.0;
  ExpectedOutcomeSequence seq;
  for (int a : aseq) {
    if (a < 0 || a >= A) throw std::out_of_range("expected_outcome_sequence: bad action");
    std::vector<double> next(S, 0.0);
    std::vector<double> out(d, 0.0);
    for (int u = 0; u < S; ++u) {
      if (dist[u] == 0.0) continue;
      for (int t = 0; t < S; ++t) {
        double pr = m.p(u, a, t);
        if (pr == 0.0) continue;
        double w = dist[u] * pr;
        next[t] += w;
        const double* sg = om.sig(A, S, u, a, t);
        for (int j = 0; j < d; ++j) out[j] += w * sg[j];
      }
    }
    seq.entries.push_back(std::move(out));
    dist = std::move(next);
  }
  return seq;
}

// Distribution over realized (quantized) outcome sequences when executing
// aseq from s. Keys are sequences of per-step d-vectors quantized at
// `resolution`.
inline std::map<std::vector<long long>, double> outcome_sequence_distribution(
    const TabularMdp& m, const OutcomeModel& om, int s, const std::vector<int>& aseq,
    int length_cap = 12, double resolution = 1e-9) {
  if (static_cast<int>(aseq.size()) > length_cap)
    throw CapExceededError("outcome_sequence_distribution: sequence length cap exceeded");
  const int A = m.n_actions, S = m.n_states, d = om.dim;
  std::map<std::vector<long long>, double> dist;
  std::vector<long long> key;
  auto rec = [&](auto&& self, int cur, std::size_t depth, double prob) -> void {
    if (depth == aseq.size()) {
      dist[key] += prob;
      return;
    }
    int a = aseq[depth];
    for (int t = 0; t < S; ++t) {
      double pr = m.p(cur, a, t);
      if (pr == 0.0) continue;
      const double* sg = om.sig(A, S, cur, a, t);
      for (int j = 0; j < d; ++j)
        key.push_back(static_cast<long long>(std::llround(sg[j] / resolution)));
      self(self, t, depth + 1, prob * pr);
      key.resize(key.size() - d);
    }
  };
  rec(rec, s, 0, 1.0);
  return dist;
}

// Canonical digest of all expected outcome sequences from a state, for
// sequences of length 1..horizon. By prefix consistency only the final-step
// outcome of each prefix is encoded, in lexicographic action order. Episode
// state matters: states that have already terminated are kept distinct from
// live states whose outcome future happens to be identically zero.
struct OutcomeFingerprint {
  int horizon = 0;
  std::uint64_t h1 = 0, h2 = 0;

  bool operator==(const OutcomeFingerprint& o) const {
    return horizon == o.horizon && h1 == o.h1 && h2 == o.h2;
  }
  bool operator<(const OutcomeFingerprint& o) const {
    if (horizon != o.horizon) return horizon < o.horizon;
    if (h1 != o.h1) return h1 < o.h1;
    return h2 < o.h2;
  }
  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string s(32, '0');
    for (int i = 0; i < 16; ++i) {
      s[15 - i] = digits[(h1 >> (4 * i)) & 0xf];
      s[31 - i] = digits[(h2 >> (4 * i)) & 0xf];
    }
    return s;
  }
};

namespace detail {

struct Digest128 {
  std::uint64_t h1 = 0x6a09e667f3bcc908ULL;
  std::uint64_t h2 = 0xbb67ae8584caa73bULL;
  void mix(std::uint64_t token) {
    std::uint64_t x = token;
    std::uint64_t z = splitmix64(x);
    h1 = (h1 ^ z) * 0x9e3779b97f4a7c15ULL;
    h1 ^= h1 >> 29;
    std::uint64_t y = token + 0x517cc1b727220a95ULL;
    std::uint64_t w = splitmix64(y);
    h2 = (h2 ^ w) * 0xc2b2ae3d27d4eb4fULL;
    h2 ^= h2 >> 31;
  }
};

}  // namespace detail

inline OutcomeFingerprint fingerprint(const TabularMdp& m, const OutcomeModel& om,
                                      int s, int horizon,
                                      double resolution = 1e-9,
                                      long node_cap = 500'000'000L) {
  if (horizon < 1) throw std::invalid_argument("fingerprint: horizon must be >= 1");
  double nodes = 0.0, pw = 1.0;
  for (int i = 0; i < horizon; ++i) {
    pw *= m.n_actions;
    nodes += pw;
  }
  if (nodes > static_cast<double>(node_cap))
    throw CapExceededError("fingerprint: enumeration cap exceeded");
  detail::Digest128 dg;
  dg.mix(0x464e4750ULL);  // domain separator
  dg.mix(static_cast<std::uint64_t>(m.n_actions));
  dg.mix(static_cast<std::uint64_t>(om.dim));
  dg.mix(static_cast<std::uint64_t>(horizon));
  dg.mix(m.terminal[s] ? 1ULL : 0ULL);
  const int d = om.dim;
  detail::walk_outcome_tree(m, om, s, horizon, [&](int, const double* out) {
    for (int j = 0; j < d; ++j)
      dg.mix(static_cast<std::uint64_t>(
          static_cast<std::int64_t>(std::llround(out[j] / resolution))));
  });
  return OutcomeFingerprint{horizon, dg.h1, dg.h2};
}

// True iff for every action sequence of length <= horizon the expected
// outcome sequences from (taskA, sA) and (taskB, sB) agree entrywise within
// tol. By prefix consistency it suffices to compare the final-step outcome of
// every prefix; episode state is compared like in fingerprints.
inline bool outcome_equivalent(const TabularMdp& ma, const OutcomeModel& oma, int sa,
                               const TabularMdp& mb, const OutcomeModel& omb, int sb,
                               int horizon, double tol) {
  if (ma.n_actions != mb.n_actions) throw std::invalid_argument("outcome_equivalent: action sets differ");
  if (oma.dim != omb.dim) throw std::invalid_argument("outcome_equivalent: outcome dims differ");
  if (static_cast<bool>(ma.terminal[sa]) != static_cast<bool>(mb.terminal[sb])) return false;
  const int A = ma.n_actions, d = oma.dim;
  // Propagate both distributions in lockstep over the sequence tree.
  std::vector<double> da(ma.n_states, 0.0), db(mb.n_states, 0.0);
  da[sa] = 1.0;
  db[sb] = 1.0;
  auto expect_step = [d](const TabularMdp& m, const OutcomeModel& om,
                         const std::vector<double>& cur, int a,
                         std::vector<double>& next, std::vector<double>& out) {
    next.assign(m.n_states, 0.0);
    out.assign(d, 0.0);
    for (int u = 0; u < m.n_states; ++u) {
      if (cur[u] == 0.0) continue;
      for (int t = 0; t < m.n_states; ++t) {
        double pr = m.p(u, a, t);
        if (pr == 0.0) continue;
        double w = cur[u] * pr;
        next[t] += w;
        const double* sg = om.sig(m.n_actions, m.n_states, u, a, t);
        for (int j = 0; j < d; ++j) out[j] += w * sg[j];
      }
    }
  };
  auto rec = [&](auto&& self, const std::vector<double>& ca,
                 const std::vector<double>& cb, int depth) -> bool {
    if (depth == horizon) return true;
    std::vector<double> na, nb, oa, ob;
    for (int a = 0; a < A; ++a) {
      expect_step(ma, oma, ca, a, na, oa);
      expect_step(mb, omb, cb, a, nb, ob);
      for (int j = 0; j < d; ++j)
        if (std::abs(oa[j] - ob[j]) > tol) return false;
      if (!self(self, na, nb, depth + 1)) return false;
    }
    return true;
  };
  return rec(rec, da, db, 0);
}

}  // namespace opsr
