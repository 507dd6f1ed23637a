#include "mamt/divergence/oracles.hpp"
#include "mamt/env/make_env.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace mamt;
using namespace mamt::divergence;
using testsupport::ref_kl;

namespace {

// q such that KL(Bern(0.5) || Bern(q)) = target, q in (0, 0.5].
double bernoulli_with_kl(double target) {
  double lo = 1e-12, hi = 0.5;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ref_kl({0.5, 0.5}, {mid, 1.0 - mid}) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TabularPolicy single(DiscreteDistribution d) { return TabularPolicy({std::move(d)}); }

}  // namespace

TEST(Distribution, ValidatesNormalisation) {
  EXPECT_NO_THROW(DiscreteDistribution({0.25, 0.75}));
  EXPECT_THROW(DiscreteDistribution({0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(DiscreteDistribution({1.2, -0.2}), std::invalid_argument);
  EXPECT_THROW(DiscreteDistribution(std::vector<double>{}), std::invalid_argument);
  EXPECT_NO_THROW(DiscreteDistribution({0.5, 0.5 + 5e-11}));
}

TEST(Kl, IdenticalIsZero) { EXPECT_EQ(kl(DiscreteDistribution{0.5, 0.5}, DiscreteDistribution{0.5, 0.5}), 0.0); }

TEST(Kl, HalfAgainstQuarter) {
  const double v = kl(DiscreteDistribution{0.5, 0.5}, DiscreteDistribution{0.25, 0.75});
  EXPECT_NEAR(v, 0.1438410362258904, 1e-12);
  EXPECT_NEAR(v, testsupport::closed_form_policy_kl(0.5), 1e-12);
}

TEST(Kl, PointMassAgainstUniform) {
  EXPECT_NEAR(kl(DiscreteDistribution{1.0, 0.0}, DiscreteDistribution{0.5, 0.5}), std::log(2.0), 1e-15);
}

TEST(Kl, Errors) {
  EXPECT_THROW(kl(DiscreteDistribution{0.5, 0.5}, DiscreteDistribution{1.0, 0.0}), DivergenceUndefined);
  EXPECT_THROW(kl(DiscreteDistribution{0.5, 0.5}, DiscreteDistribution{0.2, 0.3, 0.5}), DivergenceUndefined);
}

TEST(Kl, NonNegativeOnRandomPairs) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 2000; ++t) {
    const int k = 2 + t % 5;
    const auto p = random_distribution(k, rng), q = random_distribution(k, rng);
    const double v = kl(p, q);
    EXPECT_GE(v, -1e-12);
    EXPECT_NEAR(v, ref_kl({p.probs().begin(), p.probs().end()}, {q.probs().begin(), q.probs().end()}), 1e-12);
  }
}

TEST(JointKl, UnchangedPoliciesGiveZero) {
  JointPolicy pi{single({0.3, 0.7}), single({0.1, 0.2, 0.7})};
  EXPECT_EQ(joint_kl_exact(pi, pi, JointObservationIndex{0, 0}), 0.0);
  const std::vector<WeightedObservation> batch{{{0, 0}, 1.0}};
  EXPECT_EQ(joint_kl_meanfield(pi, pi, batch), 0.0);
}

TEST(JointKl, TwoIndependentAgentsAdd) {
  JointPolicy pi{single({0.5, 0.5}), single({0.5, 0.5})};
  JointPolicy old{single({0.25, 0.75}), single({0.25, 0.75})};
  EXPECT_NEAR(joint_kl_exact(pi, old, JointObservationIndex{0, 0}), 2.0 * 0.1438410362258904, 1e-12);
}

TEST(JointKl, ThreeAgentsWithGivenLocalDivergences) {
  const double q1 = bernoulli_with_kl(0.1), q2 = bernoulli_with_kl(0.2);
  JointPolicy pi{single({0.5, 0.5}), single({0.5, 0.5}), single({0.3, 0.7})};
  JointPolicy old{single(DiscreteDistribution::bernoulli(q1)), single(DiscreteDistribution::bernoulli(q2)), single({0.3, 0.7})};
  EXPECT_NEAR(joint_kl_exact(pi, old, JointObservationIndex{0, 0, 0}), 0.3, 1e-10);
  const std::vector<WeightedObservation> batch{{{0, 0, 0}, 1.0}};
  EXPECT_NEAR(joint_kl_meanfield(pi, old, batch), 0.3, 1e-10);
}

TEST(JointKl, MatchesReferenceEnumeration) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::vector<double>> fp, fq;
    JointPolicy pi, old;
    for (int i = 0; i < 3; ++i) {
      const auto p = random_distribution(2 + (t + i) % 3, rng), q = random_distribution(p.size(), rng);
      fp.emplace_back(p.probs().begin(), p.probs().end());
      fq.emplace_back(q.probs().begin(), q.probs().end());
      pi.push_back(single(p));
      old.push_back(single(q));
    }
    const double want = ref_kl(testsupport::ref_product(fp), testsupport::ref_product(fq));
    EXPECT_NEAR(joint_kl_exact(pi, old, JointObservationIndex{0, 0, 0}), want, 1e-12);
  }
}

TEST(JointKl, EnumerationCapRefuses) {
  JointPolicy pi;
  for (int i = 0; i < 4; ++i) pi.push_back(single(DiscreteDistribution::uniform(40)));
  EXPECT_THROW(joint_kl_exact(pi, pi, JointObservationIndex{0, 0, 0, 0}), EnumerationLimit);
  EXPECT_NO_THROW(joint_kl_exact(pi, pi, JointObservationIndex{0, 0, 0, 0}, 3'000'000));
}

TEST(JointKl, MeanFieldSingleAgentIsLocalKl) {
  JointPolicy pi{TabularPolicy({{0.2, 0.8}, {0.6, 0.4}})};
  JointPolicy old{TabularPolicy({{0.5, 0.5}, {0.3, 0.7}})};
  const std::vector<WeightedObservation> batch{{{0}, 1.0}, {{1}, 3.0}};
  const double want = 0.25 * ref_kl({0.2, 0.8}, {0.5, 0.5}) + 0.75 * ref_kl({0.6, 0.4}, {0.3, 0.7});
  EXPECT_NEAR(joint_kl_meanfield(pi, old, batch), want, 1e-14);
  EXPECT_NEAR(joint_kl_exact(pi, old, batch), want, 1e-14);
}

TEST(JointKl, MeanFieldRejectsEmptyBatch) {
  JointPolicy pi{single({0.5, 0.5}), single({0.5, 0.5})};
  EXPECT_THROW(joint_kl_meanfield(pi, pi, std::vector<WeightedObservation>{}), std::invalid_argument);
}

TEST(JointKl, DecompositionEqualityOnRandomInstances) {
  const auto r = check_decomposition(300, 9);
  EXPECT_TRUE(r.pass) << r.worst;
  EXPECT_LE(r.worst, 1e-8);
}

TEST(OthersJointKl, TwoAgentsReducesToOpponentLocal) {
  JointPolicy pi{single({0.3, 0.7}), single({0.5, 0.5})};
  JointPolicy old{single({0.6, 0.4}), single({0.25, 0.75})};
  EXPECT_NEAR(others_joint_kl(pi, old, {0, 0}, 0), ref_kl({0.5, 0.5}, {0.25, 0.75}), 1e-14);
  EXPECT_EQ(others_joint_kl(pi, pi, {0, 0}, 1), 0.0);
  JointPolicy one{single({0.3, 0.7})};
  EXPECT_EQ(others_joint_kl(one, JointPolicy{single({0.5, 0.5})}, {0}, 0), 0.0);
}

TEST(OthersJointKl, FactoredThreeAgentsSumsRemainingLocals) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    JointPolicy pi, old;
    std::vector<double> local;
    for (int i = 0; i < 3; ++i) {
      const auto p = random_distribution(3, rng), q = random_distribution(3, rng);
      local.push_back(kl(p, q));
      pi.push_back(single(p));
      old.push_back(single(q));
    }
    EXPECT_NEAR(others_joint_kl(pi, old, {0, 0, 0}, 1), local[0] + local[2], 1e-12);
  }
}

TEST(AverageBound, IdenticalJointsHaveZeroMargin) {
  std::mt19937_64 rng(5);
  const auto p = random_joint({2, 3, 2}, rng);
  EXPECT_NEAR(verify_theorem2(p, p), 0.0, 1e-15);
}

TEST(AverageBound, RandomFactoredThreeBinaryAgents) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_factored({2, 2, 2}, rng), q = random_factored({2, 2, 2}, rng);
    EXPECT_GE(verify_theorem2(p, q), -1e-10);
  }
}

TEST(AverageBound, RandomCorrelatedTwoAgents) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 1000; ++t) {
    const auto p = random_joint({3, 2}, rng), q = random_joint({3, 2}, rng);
    EXPECT_GE(verify_theorem2(p, q), -1e-10);
  }
}

TEST(AverageBound, ChainRuleReconstructsJointKl) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 300; ++t) {
    const auto p = random_joint({2, 3, 2}, rng), q = random_joint({2, 3, 2}, rng);
    const double joint = kl(p, q);
    for (int i = 0; i < 3; ++i) {
      const auto c = chain_decomposition(p, q, i);
      EXPECT_GE(c.conditional, -1e-12);
      EXPECT_LE(c.others, joint + 1e-12);
      EXPECT_NEAR(c.others + c.conditional, joint, 1e-12);
    }
  }
}

TEST(AverageBound, NeedsTwoAgents) {
  const JointDistribution p({2}, {0.5, 0.5});
  EXPECT_THROW(verify_theorem2(p, p), std::invalid_argument);
}

TEST(TransitionKl, StartingPointValue) {
  env::TabularGame g;
  const double v = transition_kl(g, env::TabularGameSpec{0.5}, 0);
  EXPECT_NEAR(v, 0.006401456997320, 1e-14);
  EXPECT_NEAR(v, testsupport::closed_form_transition_kl_a1(0.5), 1e-12);
  EXPECT_NEAR(v, testsupport::ref_transition_kl(0.5, 0), 1e-15);
}

TEST(TransitionKl, VanishesAsOpponentChangeVanishes) {
  env::TabularGame g;
  EXPECT_LT(transition_kl(g, env::TabularGameSpec{1e-6}, 0), 1e-12);
  EXPECT_THROW(transition_kl(g, env::TabularGameSpec{0.0}, 0), std::invalid_argument);
  EXPECT_THROW(transition_kl(g, env::TabularGameSpec{1.5}, 1), std::invalid_argument);
}

TEST(TransitionKl, GridOrderingAndClosedForms) {
  env::TabularGame g;
  double prev_t = -1.0, prev_p = -1.0;
  for (int k = 1; k <= 19; ++k) {
    const env::TabularGameSpec s{0.05 * k};
    const double t0 = transition_kl(g, s, 0), t1 = transition_kl(g, s, 1), pk = policy_kl(s);
    EXPECT_NEAR(t0, testsupport::ref_transition_kl(s.m, 0), 1e-12);
    EXPECT_NEAR(t1, testsupport::ref_transition_kl(s.m, 1), 1e-12);
    EXPECT_NEAR(t0, testsupport::closed_form_transition_kl_a1(s.m), 1e-10);
    EXPECT_NEAR(pk, testsupport::closed_form_policy_kl(s.m), 1e-10);
    EXPECT_LE(t0, pk);
    EXPECT_LE(t1, pk);
    EXPECT_GT(t0, prev_t);
    EXPECT_GT(pk, prev_p);
    prev_t = t0;
    prev_p = pk;
  }
}

TEST(TransitionKl, NonTabularEnvironmentRefused) {
  auto s = env::make_env("spread");
  EXPECT_THROW(induced_transition(*s, 0, 0, DiscreteDistribution::bernoulli(0.5)), UnsupportedOperation);
}

TEST(Stationarity, ConstantSequenceIsStationary) {
  env::TabularGame g;
  const TabularJointPolicy jp{DiscreteDistribution::bernoulli(0.3), DiscreteDistribution::bernoulli(0.6)};
  const std::vector<TabularJointPolicy> seq{jp, jp, jp};
  const auto r = stationarity_report(g, seq);
  EXPECT_EQ(r.system_max, 0.0);
  EXPECT_EQ(r.system_mean, 0.0);
}

TEST(Stationarity, PairedChangeTakesMaxOverOwnActions) {
  env::TabularGame g;
  const double m = 0.5;
  const TabularJointPolicy a{DiscreteDistribution::bernoulli(0.4), DiscreteDistribution::bernoulli(m)};
  const TabularJointPolicy b{DiscreteDistribution::bernoulli(0.4), DiscreteDistribution::bernoulli(m / 2)};
  const std::vector<TabularJointPolicy> seq{a, b};
  const auto r = stationarity_report(g, seq);
  const double want = std::max(testsupport::ref_transition_kl(m, 0), testsupport::ref_transition_kl(m, 1));
  EXPECT_NEAR(r.delta_max[0], want, 1e-14);
  EXPECT_EQ(r.delta_max[1], 0.0);
  EXPECT_NEAR(r.delta_mean[0], 0.4 * testsupport::ref_transition_kl(m, 0) + 0.6 * testsupport::ref_transition_kl(m, 1), 1e-14);
  EXPECT_NEAR(r.system_max, 0.5 * (r.delta_max[0] + r.delta_max[1]), 1e-12);
}

TEST(Stationarity, NeedsTwoPolicies) {
  env::TabularGame g;
  const std::vector<TabularJointPolicy> seq{{DiscreteDistribution::bernoulli(0.3), DiscreteDistribution::bernoulli(0.3)}};
  EXPECT_THROW(stationarity_report(g, seq), std::invalid_argument);
}

TEST(OracleSuite, AllChecksPass) {
  for (const auto& r : run_oracle_suite(200, 3)) EXPECT_TRUE(r.pass) << r.name << " worst " << r.worst;
  const auto rows = transition_sweep();
  ASSERT_EQ(rows.size(), 19u);
  EXPECT_NEAR(rows.front().m, 0.05, 1e-15);
  EXPECT_NEAR(rows.back().m, 0.95, 1e-15);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 20);
}
