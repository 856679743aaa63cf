#include <gtest/gtest.h>

#include <random>

#include "joint_chain.hpp"
#include "ssr/error.hpp"
#include "ssr/network.hpp"
#include "support.hpp"

namespace ssr {
namespace {

Subsystem trailer(double v_lo = 0.95, double v_hi = 1.05) {
  Subsystem s;
  s.id = "trailer";
  s.state_dim = 3;
  s.external_inputs = 1;
  s.internal_inputs = {{"leader", 1}};
  s.dynamics = test::parse_all({"x[0] + 0.9*x[1]", "0.9*x[1] + 0.5/theta[0]*u[0]", "x[2] - 0.5*x[1] + 0.5*u[1]"});
  s.output = OutputMap::identity(3);
  s.noise.weights = {1.0};
  s.noise.means = {{Expression::constant(0), Expression::constant(0), Expression::constant(0)}};
  s.noise.covariances = {Matrix(Vector3(0.075, 0.025, 0.05).asDiagonal())};
  s.theta_box = Box(Vector1(3.8), Vector1(4.0));
  s.theta_nominal = Vector1(3.9);
  s.state_box = Box(Vector3(0, 0.9, 0.2), Vector3(5, 1.1, 2.2));
  s.input_box = Box(Vector1(0.5), Vector1(1.5));
  s.output_box = s.state_box;
  s.internal_box = Box(Vector1(v_lo), Vector1(v_hi));
  return s;
}

SsrCertificate constant_cert(const std::string& id, double eps, double delta) {
  SsrCertificate c;
  c.id = id;
  c.abstract_model = id + "/grid";
  c.concrete_model = id + "/true";
  c.epsilon = eps;
  c.delta = DeltaProfile::uniform(delta);
  return c;
}

}  // namespace

TEST(Interconnection, PlatoonEdgePasses) {
  const std::vector<Subsystem> subs{test::platoon_leader(), trailer()};
  const Network n = Network::from_subsystems(subs);
  ASSERT_EQ(n.edges().size(), 1u);
  EXPECT_EQ(n.edges()[0].from, 0u);
  EXPECT_EQ(n.edges()[0].output, 1);
  EXPECT_EQ(n.topology(), Topology::Cascaded);
  EXPECT_EQ(n.order(), (std::vector<std::size_t>{0, 1}));
  const auto report = validate_interconnection(n, subs);
  EXPECT_TRUE(report.ok) << (report.violations.empty() ? "" : report.violations.front());
}

TEST(Interconnection, MismatchedRangeNamesTheEdge) {
  const std::vector<Subsystem> subs{test::platoon_leader(), trailer(0.97, 1.05)};
  const auto report = validate_interconnection(Network::from_subsystems(subs), subs);
  ASSERT_FALSE(report.ok);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_NE(report.violations[0].find("leader -> trailer"), std::string::npos);
}

TEST(Interconnection, SafeSetNarrowsTheSentRange) {
  const std::vector<Subsystem> subs{test::platoon_leader(), trailer(0.97, 1.03)};
  const auto narrow = Box(Vector2(0, 0.97), Vector2(5, 1.03));
  const Network n = Network::from_subsystems(subs, {{"leader", narrow}});
  EXPECT_TRUE(validate_interconnection(n, subs).ok);
}

TEST(Interconnection, UnknownSourceAndSelfLoop) {
  auto t = trailer();
  t.internal_inputs = {{"nobody", 0}};
  EXPECT_THROW(Network::from_subsystems({t}), ContractViolation);
  t.internal_inputs = {{"trailer", 1}};
  const Network loop = Network::from_subsystems({t});
  EXPECT_EQ(loop.topology(), Topology::Cyclic);
  EXPECT_THROW(loop.order(), ContractViolation);
}

TEST(Induced, SingleCertificateUnchanged) {
  const auto c = constant_cert("a", 0.2, 0.05);
  const auto i = induced_ssr({c});
  EXPECT_EQ(i.id, c.id);
  EXPECT_EQ(i.delta.constant, c.delta.constant);
  EXPECT_THROW(induced_ssr({}), ContractViolation);
}

TEST(Induced, ConstantArithmetic) {
  const auto i = induced_ssr({constant_cert("a", 0.006, 0.1), constant_cert("b", 0.03, 0.2)});
  EXPECT_EQ(i.delta.constant, 1.0 - 0.9 * 0.8);
  EXPECT_NEAR(i.delta.constant, 0.28, 1e-15);
  EXPECT_EQ(i.epsilon, 0.006 + 0.03);
  const auto three = induced_ssr({constant_cert("a", 0, 0.01), constant_cert("b", 0, 0.01), constant_cert("c", 0, 0.01)});
  EXPECT_NEAR(three.delta.constant, 0.029701, 1e-15);
}

TEST(Induced, PermutationInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 0.3);
  std::vector<SsrCertificate> certs;
  for (int i = 0; i < 5; ++i) certs.push_back(constant_cert(std::string(1, static_cast<char>('a' + i)), u(rng), u(rng)));
  const auto base = induced_ssr(certs);
  std::sort(certs.begin(), certs.end(), [](const auto& x, const auto& y) { return x.delta.constant > y.delta.constant; });
  do {
    const auto other = induced_ssr(certs);
    EXPECT_EQ(other.delta.constant, base.delta.constant);
    EXPECT_EQ(other.epsilon, base.epsilon);
    EXPECT_EQ(other.provenance, base.provenance);
  } while (std::next_permutation(certs.begin(), certs.end(),
                                 [](const auto& x, const auto& y) { return x.delta.constant > y.delta.constant; }));
}

TEST(Induced, TablesCombineOverTheProductIndex) {
  auto a = constant_cert("a", 0.0, 0.0);
  a.delta = DeltaProfile::table(2, 1, {0.1, 0.2}, "A");
  auto b = constant_cert("b", 0.0, 0.0);
  b.delta = DeltaProfile::table(1, 3, {0.0, 0.5, 1.0}, "B");
  const auto c = constant_cert("c", 0.0, 0.1);
  const auto i = induced_ssr({a, b, c});
  ASSERT_EQ(i.delta.rows, 2u);
  ASSERT_EQ(i.delta.cols, 3u);
  EXPECT_EQ(i.delta.index, "A*B");
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t col = 0; col < 3; ++col) {
      const double expected = 1.0 - (1.0 - a.delta.at(r, 0)) * (1.0 - b.delta.at(0, col)) * 0.9;
      EXPECT_NEAR(i.delta.at(r, col), expected, 1e-15);
    }
  }
  EXPECT_THROW(induced_ssr({a, b}, 5), UnsupportedConfiguration);
}

TEST(Induced, MatchesIndependentLosses) {
  const std::vector<double> deltas{0.05, 0.1, 0.02};
  std::vector<SsrCertificate> certs;
  for (std::size_t i = 0; i < deltas.size(); ++i) certs.push_back(constant_cert("c" + std::to_string(i), 0, deltas[i]));
  const double predicted = induced_ssr(certs).delta.constant;
  std::mt19937_64 rng(8);
  const int n = 200000;
  int any = 0;
  for (int k = 0; k < n; ++k) {
    bool lost = false;
    for (double d : deltas) lost = std::bernoulli_distribution(d)(rng) || lost;
    any += lost;
  }
  const double rate = static_cast<double>(any) / n;
  EXPECT_NEAR(rate, predicted, 3.0 * std::sqrt(predicted * (1 - predicted) / n));
}

TEST(GlobalBounds, Products) {
  const Network cascade({"a", "b"}, {{0, 1, 0, 0}});
  EXPECT_NEAR(cascaded_bound(cascade, {0.9, 0.8}).combined, 0.72, 1e-15);
  EXPECT_EQ(cascaded_bound(cascade, {0.9, 0.0}).combined, 0.0);
  const Box c(Vector1(0), Vector1(1));
  const Network cycle({"a", "b"}, {{0, 1, 0, 0}, {1, 0, 0, 0}}, {c, c});
  EXPECT_EQ(cycle.topology(), Topology::Cyclic);
  EXPECT_THROW(cascaded_bound(cycle, {0.85, 0.85}), ContractViolation);
  const auto g = global_bound(cycle, {0.85, 0.85});
  EXPECT_EQ(g.topology, Topology::Cyclic);
  EXPECT_NEAR(g.combined, 0.7225, 1e-15);
  const Network unguarded({"a", "b"}, {{0, 1, 0, 0}, {1, 0, 0, 0}}, {c, std::nullopt});
  EXPECT_THROW(cyclic_bound(unguarded, {0.85, 0.85}), ContractViolation);
  EXPECT_THROW(cascaded_bound(cascade, {0.9}), ContractViolation);
  EXPECT_THROW(cascaded_bound(cascade, {0.9, 1.2}), ContractViolation);
}

TEST(GlobalBounds, JointChainsAreSound) {
  std::mt19937_64 rng(2024);
  int informative = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool cyclic = trial % 2 == 1;
    const auto chain = test::random_chain(rng, cyclic);
    const auto r = test::evaluate(chain);
    ASSERT_LE(r.joint_states, 100u);
    EXPECT_EQ(r.global.topology, cyclic ? Topology::Cyclic : Topology::Cascaded);
    EXPECT_LE(r.global.combined, r.exact + 1e-12) << "trial " << trial;
    informative += r.global.combined > 0.05;
  }
  EXPECT_GT(informative, 20);
}

TEST(GlobalBounds, VacuousSafetyMatchesCascade) {
  std::mt19937_64 rng(6);
  auto chain = test::random_chain(rng, true);
  // C equals the whole output space: no state is excluded.
  for (auto& node : chain.nodes) node.safe.assign(node.states, 1);
  const auto r = test::evaluate(chain);
  EXPECT_LE(r.global.combined, r.exact + 1e-12);
}

}  // namespace ssr
