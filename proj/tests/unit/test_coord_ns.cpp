#include "mamt/ns/signal.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

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

Mat random_probs(int r, int c, nn::Rng& rng) {
  Mat m = random_mat(r, c, rng, 0.05, 1.0);
  for (Eigen::Index i = 0; i < r; ++i) m.row(i) /= m.row(i).sum();
  return m;
}

// Q_i for a single transition, every action given explicitly.
double q_single(const nets::AttentionCritic& critic, const std::vector<Mat>& obs, int row, const std::vector<int>& joint,
                int agent) {
  std::vector<Var> o, a;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    o.push_back(ad::constant<Scalar>(obs[k].row(row)));
    Mat oh = Mat::Zero(1, critic.action_dims()[k]);
    oh(0, joint[k]) = 1.0;
    a.push_back(ad::constant<Scalar>(oh));
  }
  ad::NoGradGuard g;
  return critic.forward(o, a).q_all[agent].value()(0, joint[agent]);
}

}  // namespace

TEST(Coordination, TwoAgentsKeepTheirSingleEntry) {
  Mat gaps(2, 2);
  gaps << 0.0, 3.7, 0.2, 0.0;
  const auto c = coord::coordination_from_gaps(gaps, 0.9);
  EXPECT_DOUBLE_EQ(c.pre(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(c.post(1, 0), 1.0);
  EXPECT_EQ(c.post.diagonal(), Eigen::Vector2d::Zero());
}

TEST(Coordination, EqualGapsSplitEvenly) {
  Mat gaps = Mat::Constant(3, 3, 1.3);
  const auto c = coord::coordination_from_gaps(gaps);
  EXPECT_NEAR(c.post(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(c.post(0, 2), 0.5, 1e-15);
}

TEST(Coordination, SmallShareFallsBelowThreshold) {
  Mat gaps = Mat::Zero(3, 3);
  gaps(0, 1) = 2.0;
  gaps(0, 2) = 0.0;
  const auto c = coord::coordination_from_gaps(gaps, 0.2);
  const double big = 1.0 / (1.0 + std::exp(-2.0));
  EXPECT_NEAR(c.pre(0, 1), big, 1e-12);
  EXPECT_NEAR(c.pre(0, 1), 0.881, 5e-4);
  EXPECT_NEAR(c.pre(0, 2), 1.0 - big, 1e-12);
  EXPECT_NEAR(c.post(0, 1), big, 1e-12);
  EXPECT_EQ(c.post(0, 2), 0.0);
}

TEST(Coordination, RowPropertiesOnRandomGaps) {
  nn::Rng rng(1);
  for (int t = 0; t < 300; ++t) {
    const int n = 2 + t % 6;
    const double delta = 0.05 * (t % 19);
    const auto c = coord::coordination_from_gaps(random_mat(n, n, rng, 0.0, 5.0), delta);
    for (int i = 0; i < n; ++i) {
      EXPECT_EQ(c.pre(i, i), 0.0);
      EXPECT_NEAR(c.pre.row(i).sum(), 1.0, 1e-6);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        EXPECT_GT(c.pre(i, j), 0.0);
        EXPECT_LE(c.post(i, j), 1.0);
        EXPECT_TRUE(c.post(i, j) == 0.0 || c.post(i, j) >= delta);
        for (int k = 0; k < n; ++k)
          if (k != i && c.post(i, j) > 0.0 && c.post(i, k) > 0.0)
            EXPECT_EQ(c.pre(i, j) < c.pre(i, k), c.post(i, j) < c.post(i, k));
      }
    }
    EXPECT_EQ(coord::apply_threshold(c.post, delta), c.post);
    const Mat s = c.symmetric();
    EXPECT_EQ(s, s.transpose());
  }
}

TEST(Coordination, InvalidInputsRejected) {
  EXPECT_THROW(coord::coordination_from_gaps(Mat::Zero(1, 1)), std::invalid_argument);
  EXPECT_THROW(coord::coordination_from_gaps(Mat::Zero(3, 3), 1.0), std::invalid_argument);
  EXPECT_THROW(coord::coordination_from_gaps(Mat::Zero(3, 3), -0.1), std::invalid_argument);
  EXPECT_THROW(coord::coordination_from_gaps(Mat::Zero(2, 3)), std::invalid_argument);
}

TEST(CounterfactualMarginal, ExpectationArithmetic) {
  const std::vector<double> q{0.0, 4.0}, half{0.5, 0.5}, det{0.0, 1.0};
  EXPECT_DOUBLE_EQ(coord::counterfactual_marginal(q, half), 2.0);
  EXPECT_DOUBLE_EQ(coord::counterfactual_marginal(q, det), 4.0);
  EXPECT_THROW(coord::counterfactual_marginal(q, std::vector<double>{1.0}), std::invalid_argument);
}

class CriticGaps : public ::testing::Test {
 protected:
  nn::Rng rng{2};
  nets::AttentionCritic critic{{3, 3, 3}, {2, 3, 2}, 8, 4, rng};
  std::vector<Mat> obs{random_mat(5, 3, rng), random_mat(5, 3, rng), random_mat(5, 3, rng)};
  std::vector<std::vector<int>> acts{{0, 1, 1, 0, 1}, {2, 0, 1, 2, 0}, {1, 1, 0, 0, 1}};
  std::vector<Mat> pi{random_probs(5, 2, rng), random_probs(5, 3, rng), random_probs(5, 2, rng)};
};

TEST_F(CriticGaps, MatchesPerTransitionEnumeration) {
  const Mat gaps = coord::counterfactual_gaps(critic, obs, acts, pi);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) {
        EXPECT_EQ(gaps(i, j), 0.0);
        continue;
      }
      double mean = 0.0;
      for (int r = 0; r < 5; ++r) {
        std::vector<int> joint{acts[0][r], acts[1][r], acts[2][r]};
        const double q = q_single(critic, obs, r, joint, i);
        double marg = 0.0;
        for (int alt = 0; alt < critic.action_dims()[j]; ++alt) {
          joint[j] = alt;
          marg += pi[j](r, alt) * q_single(critic, obs, r, joint, i);
        }
        mean += std::abs(marg - q) / 5.0;
      }
      EXPECT_NEAR(gaps(i, j), mean, 1e-12) << i << "," << j;
    }
}

TEST_F(CriticGaps, DeterministicOpponentAtItsActionHasNoGap) {
  pi[1] = nets::one_hot(acts[1], 3);
  const Mat gaps = coord::counterfactual_gaps(critic, obs, acts, pi);
  EXPECT_NEAR(gaps(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(gaps(2, 1), 0.0, 1e-14);
  EXPECT_GT(gaps(0, 2), 0.0);
}

TEST_F(CriticGaps, SlotCountChecked) {
  pi.pop_back();
  EXPECT_THROW(coord::counterfactual_gaps(critic, obs, acts, pi), std::invalid_argument);
}

TEST(NsSignal, MatchingModelsGiveZero) {
  nn::Rng rng(3);
  nets::ModelingNets models({2, 2}, {3, 3}, 8, rng, nn::Init::Zero);
  std::vector<nets::Policy> pols{nets::Policy(2, 3, 8, rng, nn::Init::Zero), nets::Policy(2, 3, 8, rng, nn::Init::Zero)};
  const std::vector<Mat> obs{random_mat(6, 2, rng), random_mat(6, 2, rng)};
  const Mat kl = ns::pairwise_model_kl(models, pols, obs);
  EXPECT_NEAR(kl.cwiseAbs().maxCoeff(), 0.0, 1e-15);
  const auto sig = ns::signal(Mat::Constant(2, 2, 1.0), kl);
  EXPECT_NEAR(sig.system, 0.0, 1e-15);
}

TEST(NsSignal, SinglePairTwoActionValue) {
  // Uniform model against an opponent fixed at (0.25, 0.75).
  nn::Rng rng(4);
  nets::ModelingNets models({2, 2}, {2, 2}, 8, rng, nn::Init::Zero);
  std::vector<nets::Policy> pols{nets::Policy(2, 2, 8, rng, nn::Init::Zero), nets::Policy(2, 2, 8, rng, nn::Init::Zero)};
  pols[1].parameters().back().mutable_value() << std::log(0.25), std::log(0.75);
  const std::vector<Mat> obs{random_mat(4, 2, rng), random_mat(4, 2, rng)};
  const Mat kl = ns::pairwise_model_kl(models, pols, obs);
  const double want = testsupport::ref_kl({0.5, 0.5}, {0.25, 0.75});
  EXPECT_NEAR(kl(0, 1), want, 1e-6);
  Mat c = Mat::Zero(2, 2);
  c(0, 1) = 1.0;
  EXPECT_NEAR(ns::local_ns(0, c, kl), want, 1e-6);
  EXPECT_NEAR(ns::local_ns(0, c, kl, 0.1), 0.1, 1e-15);
  EXPECT_EQ(ns::local_ns(1, c, kl), 0.0);  // decoupled row
}

TEST(NsSignal, ProjectionAndSum) {
  EXPECT_EQ(ns::project(-0.5), 0.0);
  EXPECT_EQ(ns::project(12.0), 10.0);
  EXPECT_EQ(ns::project(3.0, 2.0), 2.0);
  std::vector<double> v{0.1, 0.2, 0.3};
  EXPECT_NEAR(ns::system_ns(v), 0.6, 1e-15);
  std::vector<double> zero(3, 0.0);
  EXPECT_EQ(ns::system_ns(zero), 0.0);
  nn::Rng rng(5);
  const Mat c = random_mat(4, 4, rng, 0.0, 1.0), kl = random_mat(4, 4, rng, 0.0, 30.0);
  const auto s = ns::signal(c, kl);
  double total = 0.0;
  for (double d : s.local) {
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, ns::kDefaultCap);
    total += d;
  }
  EXPECT_NEAR(s.system, total, 1e-10);
  std::reverse(v.begin(), v.end());
  EXPECT_NEAR(ns::system_ns(v), 0.6, 1e-15);
}

TEST(ModelingLoss, UniformModelCostsLogKPerPair) {
  nn::Rng rng(6);
  nets::ModelingNets models({2, 2, 2}, {4, 4, 4}, 8, rng, nn::Init::Zero);
  const std::vector<Mat> obs{random_mat(5, 2, rng), random_mat(5, 2, rng), random_mat(5, 2, rng)};
  const std::vector<std::vector<int>> acts{{0, 1, 2, 3, 0}, {1, 1, 1, 1, 1}, {3, 2, 1, 0, 3}};
  EXPECT_NEAR(ns::modeling_loss(models, obs, acts, 0.0).item(), 6.0 * std::log(4.0), 1e-12);
}

TEST(ModelingLoss, CertainCorrectModelCostsNothing) {
  nn::Rng rng(7);
  nets::ModelingNets models({2, 2}, {3, 3}, 8, rng, nn::Init::Zero);
  for (auto& p : models.parameters())
    if (p.rows() == 1 && p.cols() == 3) p.mutable_value() << 0.0, 0.0, 60.0;  // always predict action 2
  const std::vector<Mat> obs{random_mat(4, 2, rng), random_mat(4, 2, rng)};
  const std::vector<std::vector<int>> acts{{2, 2, 2, 2}, {2, 2, 2, 2}};
  EXPECT_LT(ns::modeling_loss(models, obs, acts, 0.0).item(), 1e-7);
}

TEST(ModelingLoss, InvariantToRelabellingUnusedActions) {
  nn::Rng rng(8);
  nets::ModelingNets models({2, 2}, {4, 4}, 8, rng);
  const std::vector<Mat> obs{random_mat(6, 2, rng), random_mat(6, 2, rng)};
  const std::vector<std::vector<int>> acts{{0, 1, 0, 1, 1, 0}, {1, 0, 0, 1, 0, 1}};
  const double before = ns::modeling_loss(models, obs, acts, 0.0).item();
  // Swap output columns 2 and 3 of every head; neither action was executed.
  for (auto& p : models.parameters())
    if (p.cols() == 4) p.mutable_value().col(2).swap(p.mutable_value().col(3));
  EXPECT_NEAR(ns::modeling_loss(models, obs, acts, 0.0).item(), before, 1e-12);
}

TEST(NsRegressionLoss, Arithmetic) {
  const Var k = ad::constant<Scalar>((Mat(1, 3) << 0.2, 0.3, 0.5).finished());
  const std::vector<double> same{0.5, 0.3, 0.2}, zero(3, 0.0);
  EXPECT_NEAR(ns::ns_regression_loss(k, same, 0.0).item(), 0.0, 1e-15);
  EXPECT_NEAR(ns::ns_regression_loss(k, zero, 0.0).item(), 1.0, 1e-15);
  EXPECT_NEAR(ns::ns_regression_loss(k, zero, 0.1).item(), 1.0 + 0.1 * 0.38, 1e-15);
  EXPECT_THROW(ns::ns_regression_loss(k, std::vector<double>{1.0}), std::invalid_argument);
}
