#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opsr/counterexample.hpp"
#include "opsr/features.hpp"
#include "opsr/random_tasks.hpp"

#include <map>
#include <set>

using namespace opsr;

namespace {

// A three-state deterministic corridor: 0 -a-> 1 -a-> 2(terminal, +1), action
// b stays put everywhere.
std::pair<TabularMdp, OutcomeModel> corridor() {
  TabularMdp m = TabularMdp::zeros(3, 2, 1.0);
  OutcomeModel om = OutcomeModel::zeros(m, 1);
  om.reward_weights = {1.0};
  m.p(0, 0, 1) = 1.0;
  m.p(0, 1, 0) = 1.0;
  m.p(1, 0, 2) = 1.0;
  m.p(1, 1, 1) = 1.0;
  m.r(1, 0, 2) = 1.0;
  om.sig(2, 3, 1, 0, 2)[0] = 1.0;
  m.make_terminal(2);
  return {m, om};
}

}  // namespace

TEST_CASE("vector lengths match the closed forms") {
  CHECK(opsr_full_length(4, 6, 1) == 4096 * 6);
  CHECK(opsr_full_length(4, 6, 6) == 4096 * 36);
  CHECK(opsr_terminal_up_to_length(4, 6, 1) == 5460);
  // sum_{i=1..6} 4^i = 5460
  long acc = 0, pw = 1;
  for (int i = 1; i <= 6; ++i) { pw *= 4; acc += pw; }
  CHECK(acc == 5460);
  CHECK(opsr_terminal_up_to_length(2, 3, 2) == (2 + 4 + 8) * 2);
}

TEST_CASE("corridor OPSR vectors against hand-computed entries") {
  auto [m, om] = corridor();
  // terminal_up_to, k=2, DFS preorder over sequences: a, aa, ab, b, ba, bb
  OpsrVector t = opsr_terminal_up_to(m, om, 0, 2);
  REQUIRE(t.values.size() == 6);
  CHECK(t.values[0] == doctest::Approx(0.0));  // a
  CHECK(t.values[1] == doctest::Approx(1.0));  // aa: enters terminal
  CHECK(t.values[2] == doctest::Approx(0.0));  // ab
  CHECK(t.values[3] == doctest::Approx(0.0));  // b
  CHECK(t.values[4] == doctest::Approx(0.0));  // ba
  CHECK(t.values[5] == doctest::Approx(0.0));  // bb

  // full_stack, k=2: per-step outcomes of aa, ab, ba, bb
  OpsrVector f = opsr_full(m, om, 0, 2);
  REQUIRE(f.values.size() == 8);
  CHECK(f.values[0] == doctest::Approx(0.0));  // aa step 1
  CHECK(f.values[1] == doctest::Approx(1.0));  // aa step 2
  CHECK(f.values[2] == doctest::Approx(0.0));  // ab step 1
  CHECK(f.values[3] == doctest::Approx(0.0));  // ab step 2
  for (int i = 4; i < 8; ++i) CHECK(f.values[i] == doctest::Approx(0.0));
}

TEST_CASE("full-stack entries agree with expected_outcome_sequence") {
  Rng rng = make_rng(7, {1});
  for (int trial = 0; trial < 20; ++trial) {
    auto [m, om] = random_stochastic_task(rng, 4, 2, 2);
    const int k = 3;
    OpsrVector f = opsr_full(m, om, 0, k);
    // enumerate sequences lexicographically, matching the stack layout
    std::vector<std::vector<int>> seqs;
    std::vector<int> cur;
    std::function<void()> rec = [&]() {
      if (static_cast<int>(cur.size()) == k) { seqs.push_back(cur); return; }
      for (int a = 0; a < m.n_actions; ++a) { cur.push_back(a); rec(); cur.pop_back(); }
    };
    rec();
    REQUIRE(f.values.size() == seqs.size() * k * om.dim);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      auto eos = expected_outcome_sequence(m, om, 0, seqs[i]);
      for (int step = 0; step < k; ++step)
        for (int j = 0; j < om.dim; ++j)
          CHECK(f.values[(i * k + step) * om.dim + j] ==
                doctest::Approx(eos.entries[step][j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("the two variants induce the same state partition") {
  // Equality of terminal_up_to vectors must coincide with equality of
  // full-stack vectors (both encode the same expected outcome tree).
  Rng rng = make_rng(11, {2});
  for (int trial = 0; trial < 30; ++trial) {
    auto [m, om] = random_deterministic_task(rng, 6, 2, 1);
    const int k = 4;
    auto quant = [](const std::vector<double>& v) {
      std::vector<long long> q;
      for (double x : v) q.push_back(llround(x / 1e-9));
      return q;
    };
    std::map<std::vector<long long>, std::set<int>> by_t, by_f;
    for (int s = 0; s < m.n_states; ++s) {
      by_t[quant(opsr_terminal_up_to(m, om, s, k).values)].insert(s);
      by_f[quant(opsr_full(m, om, s, k).values)].insert(s);
    }
    std::set<std::set<int>> pt, pf;
    for (auto& [kk, v] : by_t) pt.insert(v);
    for (auto& [kk, v] : by_f) pf.insert(v);
    CHECK(pt == pf);
  }
}

TEST_CASE("partitions refine monotonically in the horizon") {
  Rng rng = make_rng(13, {3});
  for (int trial = 0; trial < 20; ++trial) {
    auto [m, om] = random_stochastic_task(rng, 5, 2, 1);
    std::vector<std::map<OutcomeFingerprint, std::set<int>>> parts;
    for (int k = 1; k <= 4; ++k) {
      std::map<OutcomeFingerprint, std::set<int>> p;
      for (int s = 0; s < m.n_states; ++s) p[fingerprint(m, om, s, k)].insert(s);
      parts.push_back(p);
    }
    // every class at k+1 is contained in some class at k
    for (int k = 0; k + 1 < 4; ++k)
      for (auto& [fp, members] : parts[k + 1]) {
        bool contained = false;
        for (auto& [fp0, coarse] : parts[k]) {
          bool all = true;
          for (int s : members) all = all && coarse.count(s);
          contained = contained || all;
        }
        CHECK(contained);
      }
  }
}

TEST_CASE("finest horizon on hand-built chains") {
  // In a length-L chain, state i first sees the goal outcome after L-1-i
  // steps, so horizon k lumps exactly {i : i < L-1-k}. The partition stops
  // changing once that lump is a singleton, i.e. at k = L-2.
  for (int L : {3, 4, 5, 6}) {
    TabularMdp m = TabularMdp::zeros(L, 1, 1.0);
    OutcomeModel om = OutcomeModel::zeros(m, 1);
    om.reward_weights = {1.0};
    for (int s = 0; s + 1 < L; ++s) m.p(s, 0, s + 1) = 1.0;
    m.r(L - 2, 0, L - 1) = 1.0;
    om.sig(1, L, L - 2, 0, L - 1)[0] = 1.0;
    m.make_terminal(L - 1);
    CHECK(finest_horizon(m, om, 10) == L - 2);
  }
}

TEST_CASE("finest horizon of the counterexample pair as a task union") {
  auto pair = make_counterexample_pair();
  std::vector<std::pair<TabularMdp, OutcomeModel>> tasks = {
      {pair.m_alpha, pair.om_alpha}, {pair.m_beta, pair.om_beta}};
  int k = finest_horizon(tasks, 8);
  CHECK(k >= 1);
  CHECK(k < 8);  // must stabilize well before the cap
  // stabilization is real: partitions at k and k+3 still have equal class counts
  std::map<OutcomeFingerprint, int> a, b;
  for (const auto& [m, om] : tasks)
    for (int s = 0; s < m.n_states; ++s) {
      ++a[fingerprint(m, om, s, k)];
      ++b[fingerprint(m, om, s, k + 3)];
    }
  CHECK(a.size() == b.size());
}

TEST_CASE("PCA recovers an exact low-rank structure") {
  // rank-1 data: x_i = t_i * d + mean, PCA with any fraction keeps 1 component
  Eigen::RowVectorXd dir(4);
  dir << 1.0, -2.0, 0.5, 3.0;
  Eigen::RowVectorXd mean(4);
  mean << 5.0, 5.0, 5.0, 5.0;
  Eigen::MatrixXd data(6, 4);
  for (int i = 0; i < 6; ++i) data.row(i) = mean + (i - 2.5) * dir;
  PcaResult pca = pca_reduce(data, 0.99);
  CHECK(pca.n_components == 1);
  // reconstruction is exact
  Eigen::MatrixXd recon = (pca.reduced * pca.basis.transpose()).rowwise() + pca.mean;
  CHECK((recon - data).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-9));
  // projection of a fresh point on the line is consistent
  Eigen::RowVectorXd x = mean + 7.0 * dir;
  Eigen::RowVectorXd p = pca_project(pca, x);
  Eigen::RowVectorXd back = p * pca.basis.transpose() + pca.mean;
  CHECK((back - x).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("PCA on isotropic data keeps all components, on constant data none") {
  Eigen::MatrixXd iso = Eigen::MatrixXd::Identity(4, 4);
  PcaResult p1 = pca_reduce(iso, 1.0);
  CHECK(p1.n_components == 3);  // 4 points centered span a 3-dim space
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(5, 3, 2.5);
  PcaResult p2 = pca_reduce(flat, 0.95);
  CHECK(p2.n_components == 0);
  CHECK(p2.reduced.rows() == 5);
  CHECK(p2.reduced.cols() == 0);
}

TEST_CASE("PCA variance ordering and threshold behaviour") {
  Rng rng = make_rng(23, {5});
  Eigen::MatrixXd data(40, 6);
  // anisotropic scales so components have well-separated variances
  std::vector<double> scale = {8.0, 4.0, 2.0, 1.0, 0.5, 0.25};
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 6; ++j)
      data(i, j) = scale[j] * (uniform01(rng) - 0.5);
  PcaResult full = pca_reduce(data, 1.0);
  for (int c = 0; c + 1 < full.n_components; ++c)
    CHECK(full.eigenvalues(c) >= full.eigenvalues(c + 1));
  PcaResult half = pca_reduce(data, 0.5);
  CHECK(half.n_components >= 1);
  CHECK(half.n_components < full.n_components);
  // retained variance actually reaches the threshold
  double total = full.eigenvalues.sum();
  CHECK(half.eigenvalues.sum() / total >= 0.5 - 1e-12);
}

TEST_CASE("eigenmap separates two far clusters into components") {
  Eigen::MatrixXd pts(8, 2);
  for (int i = 0; i < 4; ++i) {
    pts.row(i) << 0.1 * i, 0.0;
    pts.row(4 + i) << 100.0 + 0.1 * i, 0.0;
  }
  EigenmapResult em = laplacian_eigenmap(pts, 2, 2);
  CHECK(em.n_components == 2);
  for (int i = 0; i < 4; ++i) {
    CHECK(em.component[i] == em.component[0]);
    CHECK(em.component[4 + i] == em.component[4]);
  }
  CHECK(em.component[0] != em.component[4]);
  CHECK(em.embedding.rows() == 8);
  CHECK(em.embedding.cols() == 2);
}

TEST_CASE("eigenmap of a cycle reproduces the circle ordering") {
  // Points on a circle with 2-NN graph: the embedding's first two coordinates
  // should place neighbours close and antipodes far.
  const int n = 12;
  Eigen::MatrixXd pts(n, 2);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * M_PI * i / n;
    pts.row(i) << std::cos(th), std::sin(th);
  }
  EigenmapResult em = laplacian_eigenmap(pts, 2, 2);
  CHECK(em.n_components == 1);
  auto emb_dist = [&](int i, int j) {
    return (em.embedding.row(i) - em.embedding.row(j)).norm();
  };
  for (int i = 0; i < n; ++i) {
    double near = emb_dist(i, (i + 1) % n);
    double far = emb_dist(i, (i + n / 2) % n);
    CHECK(near < far);
  }
}

TEST_CASE("eigenmap handles duplicated points") {
  Eigen::MatrixXd pts(6, 2);
  pts << 0, 0, 0, 0, 1, 0, 1, 0, 2, 0, 2, 0;
  EigenmapResult em = laplacian_eigenmap(pts, 2, 2);
  CHECK(em.embedding.allFinite());
  // zero-distance ties must not break connectivity
  CHECK(em.n_components == 1);
}

TEST_CASE("caps throw") {
  auto [m, om] = corridor();
  CHECK_THROWS_AS(opsr_full(m, om, 0, 40, 1000), CapExceededError);
  CHECK_THROWS_AS(opsr_terminal_up_to(m, om, 0, 40, 1000), CapExceededError);
}
