#pragma once

// Outcome-predictive state representation (OPSR) feature vectors over
// enumerated action sequences, the horizon-refinement search, PCA reduction,
// and a Laplacian-eigenmap embedding for visualization.

#include "opsr/abstraction.hpp"
#include "opsr/mdp.hpp"
#include "opsr/outcomes.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <map>
#include <vector>

namespace opsr {

enum class OpsrVariant { full_stack, terminal_up_to };

struct OpsrVector {
  int k = 0;
  OpsrVariant variant = OpsrVariant::terminal_up_to;
  std::vector<double> values;
};

inline long opsr_full_length(int n_actions, int k, int dim) {
  double len = 1.0;
  for (int i = 0; i < k; ++i) len *= n_actions;
  return static_cast<long>(len) * k * dim;
}

inline long opsr_terminal_up_to_length(int n_actions, int k, int dim) {
  long len = 0, pw = 1;
  for (int i = 1; i <= k; ++i) {
    pw *= n_actions;
    len += pw;
  }
  return len * dim;
}

// Per-step expected outcomes of every exact-length-k action sequence,
// stacked in lexicographic sequence order.
inline OpsrVector opsr_full(const TabularMdp& m, const OutcomeModel& om, int s, int k,
                            long cap = 50'000'000L) {
  long len = opsr_full_length(m.n_actions, k, om.dim);
  if (len > cap) throw CapExceededError("opsr_full: cap exceeded");
  OpsrVector out;
  out.k = k;
  out.variant = OpsrVariant::full_stack;
  out.values.reserve(len);
  // Walk the prefix tree keeping the running per-step outcome stack; emit the
  // whole stack at each leaf (exact-length sequence).
  std::vector<double> stack(static_cast<std::size_t>(k) * om.dim);
  detail::walk_outcome_tree(m, om, s, k, [&](int depth, const double* o) {
    for (int j = 0; j < om.dim; ++j)
      stack[static_cast<std::size_t>(depth - 1) * om.dim + j] = o[j];
    if (depth == k)
      out.values.insert(out.values.end(), stack.begin(), stack.end());
  });
  return out;
}

// Final-step expected outcome of every sequence of length 1..k, in DFS
// preorder (lexicographic, prefixes first).
inline OpsrVector opsr_terminal_up_to(const TabularMdp& m, const OutcomeModel& om,
                                      int s, int k, long cap = 50'000'000L) {
  long len = opsr_terminal_up_to_length(m.n_actions, k, om.dim);
  if (len > cap) throw CapExceededError("opsr_terminal_up_to: cap exceeded");
  OpsrVector out;
  out.k = k;
  out.variant = OpsrVariant::terminal_up_to;
  out.values.reserve(len);
  detail::walk_outcome_tree(m, om, s, k, [&](int, const double* o) {
    out.values.insert(out.values.end(), o, o + om.dim);
  });
  return out;
}

namespace detail {

// Class counts of the fingerprint partition of a set of (task, state) pairs.
template <typename TaskRange>
std::map<OutcomeFingerprint, int> fingerprint_partition(const TaskRange& tasks, int k) {
  std::map<OutcomeFingerprint, int> classes;
  for (const auto& [m, om] : tasks)
    for (int s = 0; s < m.n_states; ++s) ++classes[fingerprint(m, om, s, k)];
  return classes;
}

}  // namespace detail

// Smallest k for which the outcome partition at k equals the partition at
// k+1, or k_max if none stabilizes. Works on a single task or a union of
// tasks (vector of (mdp, outcome model) pairs).
inline int finest_horizon(const std::vector<std::pair<TabularMdp, OutcomeModel>>& tasks,
                          int k_max) {
  auto assignment = [&](int k) {
    std::vector<OutcomeFingerprint> labels;
    for (const auto& [m, om] : tasks)
      for (int s = 0; s < m.n_states; ++s) labels.push_back(fingerprint(m, om, s, k));
    return labels;
  };
  auto same_partition = [](const std::vector<OutcomeFingerprint>& a,
                           const std::vector<OutcomeFingerprint>& b) {
    std::map<OutcomeFingerprint, OutcomeFingerprint> fwd, bwd;
    for (std::size_t i = 0; i < a.size(); ++i) {
      auto [it1, new1] = fwd.emplace(a[i], b[i]);
      if (!new1 && !(it1->second == b[i])) return false;
      auto [it2, new2] = bwd.emplace(b[i], a[i]);
      if (!new2 && !(it2->second == a[i])) return false;
    }
    return true;
  };
  std::vector<OutcomeFingerprint> prev = assignment(1);
  for (int k = 1; k < k_max; ++k) {
    std::vector<OutcomeFingerprint> next = assignment(k + 1);
    if (same_partition(prev, next)) return k;
    prev = std::move(next);
  }
  return k_max;
}

inline int finest_horizon(const TabularMdp& m, const OutcomeModel& om, int k_max) {
  return finest_horizon({{m, om}}, k_max);
}

struct PcaResult {
  Eigen::MatrixXd basis;        // columns are principal directions
  Eigen::MatrixXd reduced;      // rows are projected data points
  Eigen::VectorXd eigenvalues;  // variance per retained component
  Eigen::RowVectorXd mean;
  int n_components = 0;
};

// Centered PCA keeping the smallest number of components whose variance share
// reaches variance_fraction. Degenerate (all-identical-row) data keeps zero
// components.
inline PcaResult pca_reduce(const Eigen::MatrixXd& data, double variance_fraction) {
  if (variance_fraction <= 0.0 || variance_fraction > 1.0)
    throw std::invalid_argument("pca_reduce: variance_fraction outside (0,1]");
  if (data.rows() < 1) throw std::invalid_argument("pca_reduce: no rows");
  PcaResult res;
  res.mean = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - res.mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd sv = svd.singularValues();
  long n = data.rows();
  Eigen::VectorXd var = sv.array().square() / std::max<long>(n - 1, 1);
  double total = var.sum();
  if (total <= 1e-24) {  // all rows identical
    res.n_components = 0;
    res.basis = Eigen::MatrixXd::Zero(data.cols(), 0);
    res.reduced = Eigen::MatrixXd::Zero(data.rows(), 0);
    res.eigenvalues = Eigen::VectorXd::Zero(0);
    return res;
  }
  double acc = 0.0;
  int keep = 0;
  while (keep < var.size() && acc / total < variance_fraction - 1e-15) {
    acc += var(keep);
    ++keep;
  }
  res.n_components = keep;
  res.basis = svd.matrixV().leftCols(keep);
  // Deterministic sign convention: largest-magnitude entry of each basis
  // vector is positive.
  for (int c = 0; c < keep; ++c) {
    int idx = 0;
    res.basis.col(c).cwiseAbs().maxCoeff(&idx);
    if (res.basis(idx, c) < 0.0) res.basis.col(c) = -res.basis.col(c);
  }
  res.reduced = centered * res.basis;
  res.eigenvalues = var.head(keep);
  return res;
}

inline Eigen::RowVectorXd pca_project(const PcaResult& pca, const Eigen::RowVectorXd& x) {
  return (x - pca.mean) * pca.basis;
}

struct EigenmapResult {
  Eigen::MatrixXd embedding;        // points x out_dims (zero-padded if rank-deficient)
  std::vector<int> component;       // connected-component label per point
  int n_components = 1;
};

// Laplacian eigenmap on the symmetric (union) k-NN graph with binary weights
// and the unnormalized Laplacian. Disconnected graphs are embedded per
// component. Sign convention: first nonzero coordinate of each eigenvector is
// positive.
inline EigenmapResult laplacian_eigenmap(const Eigen::MatrixXd& points, int knn,
                                         int out_dims) {
  const long n = points.rows();
  if (knn < 1) throw std::invalid_argument("laplacian_eigenmap: knn < 1");
  if (n < out_dims + 2) throw std::invalid_argument("laplacian_eigenmap: too few points");
  // Pairwise squared distances.
  Eigen::MatrixXd d2(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) d2(i, j) = (points.row(i) - points.row(j)).squaredNorm();
  // Symmetric k-NN adjacency.
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    std::vector<long> order(n);
    for (long j = 0; j < n; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](long a, long b) {
      if (d2(i, a) != d2(i, b)) return d2(i, a) < d2(i, b);
      return a < b;
    });
    int taken = 0;
    for (long j : order) {
      if (j == i) continue;
      adj(i, j) = adj(j, i) = 1.0;
      if (++taken == knn) break;
    }
  }
  // Connected components.
  EigenmapResult res;
  res.component.assign(n, -1);
  int n_comp = 0;
  for (long i = 0; i < n; ++i) {
    if (res.component[i] >= 0) continue;
    std::vector<long> stack = {i};
    res.component[i] = n_comp;
    while (!stack.empty()) {
      long u = stack.back();
      stack.pop_back();
      for (long v = 0; v < n; ++v)
        if (adj(u, v) > 0.0 && res.component[v] < 0) {
          res.component[v] = n_comp;
          stack.push_back(v);
        }
    }
    ++n_comp;
  }
  res.n_components = n_comp;
  res.embedding = Eigen::MatrixXd::Zero(n, out_dims);
  for (int comp = 0; comp < n_comp; ++comp) {
    std::vector<long> members;
    for (long i = 0; i < n; ++i)
      if (res.component[i] == comp) members.push_back(i);
    long m = static_cast<long>(members.size());
    if (m < 2) continue;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (long a = 0; a < m; ++a) {
      double deg = 0.0;
      for (long b = 0; b < m; ++b) {
        if (a == b) continue;
        double w = adj(members[a], members[b]);
        L(a, b) = -w;
        deg += w;
      }
      L(a, a) = deg;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    const auto& evals = es.eigenvalues();
    const auto& evecs = es.eigenvectors();
    double scale = std::max(1.0, evals.cwiseAbs().maxCoeff());
    int placed = 0;
    for (long c = 0; c < m && placed < out_dims; ++c) {
      if (evals(c) <= 1e-9 * scale) continue;  // skip the constant null space
      Eigen::VectorXd v = evecs.col(c);
      for (long a = 0; a < m; ++a) {
        if (std::abs(v(a)) > 1e-12) {
          if (v(a) < 0.0) v = -v;
          break;
        }
      }
      for (long a = 0; a < m; ++a) res.embedding(members[a], placed) = v(a);
      ++placed;
    }
  }
  return res;
}

}  // namespace opsr
