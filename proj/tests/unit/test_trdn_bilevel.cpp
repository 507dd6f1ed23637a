#include "mamt/bilevel/bilevel.hpp"
#include "gradcheck.hpp"

#include <gtest/gtest.h>

using namespace mamt;
using nets::Mat;
using nets::Scalar;
using nets::Var;

namespace {

Mat random_mat(int r, int c, nn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

struct Fixture {
  int n;
  int b;
  nn::Rng rng;
  trdn::Trdn net;
  std::vector<Mat> obs, acts;
  std::vector<double> eps;
  Mat weights;

  Fixture(int agents, int batch, std::uint64_t seed)
      : n(agents), b(batch), rng(seed), net(4, 3, trdn::TrdnOptions{16, 8, 1}, rng) {
    std::uniform_int_distribution<int> act(0, 2);
    for (int i = 0; i < n; ++i) {
      obs.push_back(random_mat(b, 4, rng));
      std::vector<int> a;
      for (int r = 0; r < b; ++r) a.push_back(act(rng));
      acts.push_back(nets::one_hot(a, 3));
      eps.push_back(std::exp(random_mat(1, 1, rng, -2.0, 2.0)(0, 0)));
    }
    weights = random_mat(n, n, rng, 0.0, 1.0);
    weights = 0.5 * (weights + weights.transpose()).eval();
    weights.diagonal().setZero();
  }

  Mat estimate(const std::vector<double>& e) const {
    ad::NoGradGuard g;
    return net.forward(obs, acts, ad::constant<Scalar>(trdn::epsilon_leaf(e).value()), weights).value();
  }
  Mat estimate() const { return estimate(eps); }
};

Mat node_value(const std::vector<Var>& h, int i) { return h[static_cast<std::size_t>(i)].value(); }

}  // namespace

TEST(Trdn, OneNonNegativeEstimatePerAgent) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Fixture f(2 + static_cast<int>(s % 4), 7, s);
    const Mat k = f.estimate();
    EXPECT_EQ(k.rows(), 1);
    EXPECT_EQ(k.cols(), f.n);
    EXPECT_GE(k.minCoeff(), 0.0);
  }
}

TEST(Trdn, EncodingIsLocalInTrustRegionSize) {
  Fixture f(3, 5, 1);
  ad::NoGradGuard g;
  const auto& br = f.net.branch_f();
  const auto before = br.encode(f.obs, f.acts, ad::log(trdn::epsilon_leaf(f.eps)));
  auto e = f.eps;
  e[1] *= 3.0;
  const auto after = br.encode(f.obs, f.acts, ad::log(trdn::epsilon_leaf(e)));
  EXPECT_EQ(node_value(before, 0), node_value(after, 0));
  EXPECT_EQ(node_value(before, 2), node_value(after, 2));
  EXPECT_GT((node_value(before, 1) - node_value(after, 1)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(br.encode(f.obs, f.acts, ad::log(trdn::epsilon_leaf(std::vector<double>{1.0, 1.0}))),
               std::invalid_argument);
}

TEST(Trdn, EmbeddingHasNonZeroTrustRegionDerivative) {
  Fixture f(3, 5, 2);
  const auto& br = f.net.branch_f();
  for (int k = 0; k < 3; ++k) {
    auto probe = [&](double h) {
      ad::NoGradGuard g;
      auto e = f.eps;
      e[k] += h;
      return br.encode(f.obs, f.acts, ad::log(trdn::epsilon_leaf(e)))[k].value().sum();
    };
    EXPECT_GT(std::abs((probe(1e-5) - probe(-1e-5)) / 2e-5), 1e-6) << "agent " << k;
  }
}

TEST(Trdn, ZeroWeightsLeaveOnlyTheSelfPath) {
  Fixture f(3, 4, 3);
  const auto& br = f.net.branch_g();
  ad::NoGradGuard g;
  const Var le = ad::log(trdn::epsilon_leaf(f.eps));
  const Mat zero = Mat::Zero(3, 3);
  const auto before = br.message_pass(br.encode(f.obs, f.acts, le), zero);
  f.obs[2] = random_mat(4, 4, f.rng);
  const auto after = br.message_pass(br.encode(f.obs, f.acts, le), zero);
  EXPECT_EQ(node_value(before, 0), node_value(after, 0));
  EXPECT_EQ(node_value(before, 1), node_value(after, 1));
  EXPECT_NE(node_value(before, 2), node_value(after, 2));
}

TEST(Trdn, IsolatedComponentsDoNotInteract) {
  Fixture f(4, 4, 4);
  f.weights.setZero();
  f.weights(0, 1) = f.weights(1, 0) = 0.7;
  f.weights(2, 3) = f.weights(3, 2) = 0.4;
  const Mat before = f.estimate();
  f.obs[3] = random_mat(4, 4, f.rng);
  f.eps[2] *= 5.0;
  const Mat after = f.estimate();
  EXPECT_EQ(before(0, 0), after(0, 0));
  EXPECT_EQ(before(0, 1), after(0, 1));
  EXPECT_NE(before(0, 2), after(0, 2));
}

TEST(Trdn, RelabellingAgentsPermutesEstimates) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Fixture f(4, 6, 10 + s);
    const Mat before = f.estimate();
    std::vector<int> perm{0, 1, 2, 3};
    std::shuffle(perm.begin(), perm.end(), f.rng);
    Fixture g = f;
    for (int k = 0; k < 4; ++k) {
      g.obs[k] = f.obs[perm[k]];
      g.acts[k] = f.acts[perm[k]];
      g.eps[k] = f.eps[perm[k]];
      for (int l = 0; l < 4; ++l) g.weights(k, l) = f.weights(perm[k], perm[l]);
    }
    const Mat after = g.estimate();
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(after(0, k), before(0, perm[k]), 1e-12);
  }
}

TEST(Trdn, BranchesShareNothing) {
  Fixture f(3, 4, 5);
  nets::Params pf, pg;
  f.net.branch_f().collect(pf);
  f.net.branch_g().collect(pg);
  for (const auto& a : pf)
    for (const auto& b : pg) EXPECT_NE(a.node().get(), b.node().get());
  const Mat before = f.estimate();
  for (auto& p : f.net.branch_g_parameters()) p.mutable_value().setZero();
  EXPECT_GT((f.estimate() - before).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Trdn, RegressionLossGradientMatchesFiniteDifferences) {
  Fixture f(3, 4, 6);
  const std::vector<double> d{0.3, 0.05, 1.2};
  const Var e = ad::constant<Scalar>(trdn::epsilon_leaf(f.eps).value());
  auto loss = [&] { return ns::ns_regression_loss(f.net.forward(f.obs, f.acts, e, f.weights), d); };
  const auto r = testsupport::grad_check<Scalar>(f.net.parameters(), loss, 1e-5, 5);
  EXPECT_GT(r.checked, 200);
  EXPECT_LT(r.worst_rel, 1e-4);
}

TEST(Trdn, TrustRegionPathwayMatchesFiniteDifferences) {
  Fixture f(3, 4, 7);
  const Var leaf = trdn::epsilon_leaf(f.eps);
  auto loss = [&] { return ad::sum(f.net.forward(f.obs, f.acts, leaf, f.weights)); };
  const auto r = testsupport::grad_check<Scalar>({leaf}, loss, 1e-6);
  EXPECT_EQ(r.checked, 3);
  EXPECT_LT(r.worst_rel, 1e-4);
}

TEST(Trdn, FittingAFixedSignalLowersTheLoss) {
  Fixture f(3, 8, 8);
  ad::Adam<Scalar> opt(f.net.parameters(), ad::AdamOptions{1e-3});
  const std::vector<double> d{0.4, 0.1, 0.9};
  std::vector<double> trace;
  for (int k = 0; k < 40; ++k) {
    const auto r = bilevel::trdn_update(f.net, opt, f.obs, f.acts, f.eps, f.weights, d, 5, 30.0);
    trace.push_back(r.loss_first);
  }
  const double head = (trace[0] + trace[1] + trace[2] + trace[3]) / 4.0;
  const double tail = (trace[36] + trace[37] + trace[38] + trace[39]) / 4.0;
  EXPECT_LT(tail, 0.1 * head);
}

TEST(Objective, EqualsValueWhenEstimatesVanish) {
  const Var zero = ad::constant<Scalar>(Mat::Zero(1, 3));
  EXPECT_DOUBLE_EQ(bilevel::objective_F(-4.25, zero).item(), -4.25);
  const Var k = ad::constant<Scalar>((Mat(1, 2) << 0.5, 0.25).finished());
  EXPECT_DOUBLE_EQ(bilevel::objective_F(1.0, k).item(), 0.25);
}

TEST(Objective, TrdnPathGradientOpposesEstimateGrowth) {
  for (std::uint64_t s = 0; s < 8; ++s) {
    Fixture f(3, 5, 20 + s);
    const auto g = bilevel::trdn_path_gradient(f.net, f.obs, f.acts, f.eps, f.weights);
    for (int k = 0; k < 3; ++k) {
      auto up = f.eps, down = f.eps;
      up[k] += 1e-6;
      down[k] -= 1e-6;
      const double slope = (f.estimate(up).sum() - f.estimate(down).sum()) / 2e-6;
      EXPECT_NEAR(g[k], -slope, 1e-5 * std::max(1.0, std::abs(slope)));
      if (slope > 1e-8) EXPECT_LT(g[k], 0.0);
    }
    for (const auto& p : f.net.parameters()) EXPECT_EQ(p.grad().size(), 0);
  }
}

TEST(Objective, FiniteAtClipBoundaries) {
  Fixture f(3, 4, 9);
  for (double e : {bilevel::kEpsMin, bilevel::kEpsMax}) {
    const std::vector<double> all(3, e);
    const Mat k = f.estimate(all);
    EXPECT_TRUE(std::isfinite(bilevel::objective_F(1.0, ad::constant<Scalar>(k)).item()));
    for (double g : bilevel::trdn_path_gradient(f.net, f.obs, f.acts, all, f.weights)) EXPECT_TRUE(std::isfinite(g));
  }
}

TEST(Objective, ActorPathGradientMatchesFiniteDifferences) {
  const std::vector<double> kl{0.02, 0.3, 0.0}, eps{0.5, 2.0, 1.0};
  const auto g = bilevel::actor_path_gradient(kl, eps);
  for (std::size_t i = 0; i < 3; ++i) {
    auto penalty = [&](double e) { return -kl[i] / e; };
    EXPECT_NEAR(g[i], (penalty(eps[i] + 1e-6) - penalty(eps[i] - 1e-6)) / 2e-6, 1e-6);
  }
  EXPECT_THROW(bilevel::actor_path_gradient(kl, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(EpsilonUpdate, ZeroGradientLeavesAllocationUnchanged) {
  auto a = bilevel::TrustRegionAllocation::uniform(3, 0.7);
  const std::vector<double> zero(3, 0.0);
  EXPECT_EQ(bilevel::epsilon_update(a, zero, 1e-3).eps, a.eps);
}

TEST(EpsilonUpdate, ClipsAtBothEnds) {
  auto a = bilevel::TrustRegionAllocation::uniform(2, 1.0);
  const std::vector<double> g{-1e6, 1e6};
  const auto b = bilevel::epsilon_update(a, g, 1.0);
  EXPECT_EQ(b.eps[0], 0.01);
  EXPECT_EQ(b.eps[1], 100.0);
  EXPECT_EQ(bilevel::TrustRegionAllocation::uniform(2, 1e9).eps[0], 100.0);
  EXPECT_THROW(bilevel::epsilon_update(a, g, 0.0), std::invalid_argument);
  EXPECT_THROW(bilevel::epsilon_update(a, std::vector<double>{1.0}, 1.0), std::invalid_argument);
}

TEST(EpsilonUpdate, StaysInRangeUnderRandomSteps) {
  nn::Rng rng(11);
  std::normal_distribution<double> nd(0.0, 50.0);
  auto a = bilevel::TrustRegionAllocation::uniform(5);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> g(5);
    for (double& v : g) v = nd(rng);
    a = bilevel::epsilon_update(a, g, 0.5);
    ASSERT_TRUE(a.within_bounds());
  }
}

TEST(TrdnUpdate, ZeroLossLeavesParametersUnchanged) {
  Fixture f(3, 4, 12);
  const Mat k = f.estimate();
  const std::vector<double> d{k(0, 0), k(0, 1), k(0, 2)};
  ad::Adam<Scalar> opt(f.net.parameters(), ad::AdamOptions{1e-3});
  std::vector<Mat> before;
  for (const auto& p : f.net.parameters()) before.push_back(p.value());
  const auto r = bilevel::trdn_update(f.net, opt, f.obs, f.acts, f.eps, f.weights, d, 3, 30.0);
  EXPECT_EQ(r.loss_first, 0.0);
  const auto after = f.net.parameters();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after[i].value(), before[i]);
}

TEST(TrdnUpdate, RunsTheConfiguredNumberOfFastSteps) {
  Fixture f(2, 4, 13);
  ad::Adam<Scalar> opt(f.net.parameters(), ad::AdamOptions{1e-3});
  const std::vector<double> d{1.0, 1.0};
  for (int outer = 1; outer <= 4; ++outer) {
    bilevel::trdn_update(f.net, opt, f.obs, f.acts, f.eps, f.weights, d, 5, 30.0);
    EXPECT_EQ(opt.steps(), 5 * outer);
  }
  EXPECT_THROW(bilevel::trdn_update(f.net, opt, f.obs, f.acts, f.eps, f.weights, d, 0, 30.0), std::invalid_argument);
}
