#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "finsler/bounds.hpp"
#include "finsler/error.hpp"
#include "test_metrics.hpp"
#include "test_support.hpp"

using namespace finsler;
using testmetrics::kPi;
using testsupport::kind_of;
using testsupport::rel;

namespace {

const double kFourPi = 4.0 * kPi;

SphereBundleMesh flat_mesh(int n, int level = 0) {
  return build_mesh(MetricSpec::euclidean(), {n, n, n}, DirectionRule::ico(level));
}

// Periodic 1D trapezoid rule with many points; spectrally accurate for the
// smooth integrands below.
template <class F>
double periodic_mean(F&& f, int n = 4096) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += f(static_cast<double>(i) / n);
  return s / n;
}

ProbeConfig small_probe() {
  ProbeConfig c;
  c.resolution = {8, 8, 8};
  return c;
}

}  // namespace

TEST(L2Bounds, ConstantFactorIsTheHolderEqualityCase) {
  const SphereBundleMesh mesh = flat_mesh(8);
  const L2Record r = l2_bounds(ConformalFactor::identity(), MetricSpec::euclidean(), mesh);
  EXPECT_NEAR(r.phi_sq, kFourPi, 1e-12);
  EXPECT_NEAR(r.holder_bound, kFourPi, 1e-12);
  EXPECT_NEAR(r.holder_slack, 0.0, 1e-12);
  EXPECT_EQ(r.grad_sq, 0.0);
  EXPECT_EQ(r.identity_lhs, 0.0);
  EXPECT_EQ(r.identity_rhs, 0.0);
  EXPECT_EQ(r.identity_residual, 0.0);
}

TEST(L2Bounds, WaveFactor) {
  const SphereBundleMesh mesh = flat_mesh(8);
  const double a = 0.1;
  const L2Record r = l2_bounds(ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)"), MetricSpec::euclidean(), mesh);
  EXPECT_LT(r.identity_residual, 1e-8);
  EXPECT_LT(rel(r.grad_sq, kFourPi * 2 * kPi * kPi * a * a), 1e-12);
  EXPECT_LT(rel(r.phi_sq, kFourPi * (1 + a * a / 2)), 1e-12);
  EXPECT_GT(r.holder_slack, 0.0);
}

TEST(L2Bounds, RiemannianBackgrounds) {
  const ConformalFactor phi = ConformalFactor::parse("1 + 0.05*cos(2*pi*x2)*sin(2*pi*x3)");
  for (const auto& c : {testmetrics::diagonal_constant(), testmetrics::conformally_flat(), testmetrics::product()}) {
    const SphereBundleMesh mesh = build_mesh(c.spec, {12, 12, 12}, DirectionRule::ico(0));
    const L2Record r = l2_bounds(phi, c.spec, mesh);
    // Integration by parts of the curvature form; quadrature error only.
    EXPECT_LT(r.identity_residual, 1e-6) << c.name;
    EXPECT_GT(r.holder_slack, 0.0) << c.name;
  }
}

TEST(L2Bounds, NonPositiveFactorRejected) {
  const SphereBundleMesh mesh = flat_mesh(6);
  EXPECT_EQ(kind_of([&] { l2_bounds(ConformalFactor::parse("0.5 + sin(2*pi*x1)"), MetricSpec::euclidean(), mesh); }),
            ErrorKind::NonPositiveFactor);
}

TEST(CurvatureSquare, ConstantFactor) {
  const SphereBundleMesh mesh = flat_mesh(6);
  const CurvatureSquareRecord r = curvature_square_identity(ConformalFactor::parse("1.2"), MetricSpec::euclidean(), mesh);
  EXPECT_EQ(r.S, 0.0);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.t3, 0.0);
  EXPECT_EQ(r.identity_residual, 0.0);
  EXPECT_EQ(r.parts_residual, 0.0);
}

TEST(CurvatureSquare, FlatTorusKeepsOnlyTheLaplacianTerm) {
  const SphereBundleMesh mesh = flat_mesh(12);
  const double a = 0.1;
  const CurvatureSquareRecord r =
      curvature_square_identity(ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)"), MetricSpec::euclidean(), mesh);
  EXPECT_LT(r.identity_residual, 1e-8);
  EXPECT_EQ(r.t1, 0.0);
  EXPECT_EQ(r.t2, 0.0);
  const double lap_sq = kFourPi * periodic_mean([&](double x) {
                          const double s = std::sin(2 * kPi * x);
                          const double l = a * 4 * kPi * kPi * s;
                          return l * l / std::pow(1 + a * s, 4);
                        });
  EXPECT_LT(rel(r.lap_sq, lap_sq), 1e-9);
  EXPECT_GE(r.lower_slack, 0.0);
  EXPECT_GE(r.upper_slack, 0.0);
  EXPECT_TRUE(r.sign_consistent);
}

TEST(CurvatureSquare, PartsIdentity) {
  const SphereBundleMesh mesh = flat_mesh(12);
  const CurvatureSquareRecord r =
      curvature_square_identity(ConformalFactor::parse("1 + 0.05*cos(2*pi*x2)"), MetricSpec::euclidean(), mesh);
  EXPECT_LT(r.parts_residual, 1e-7);
  EXPECT_LT(r.parts_direct, 0.0);
  const SphereBundleMesh m2 = build_mesh(testmetrics::diagonal_constant().spec, {12, 12, 12}, DirectionRule::ico(0));
  const CurvatureSquareRecord d = curvature_square_identity(ConformalFactor::parse("1 + 0.05*cos(2*pi*(x2 - x1))"),
                                                   testmetrics::diagonal_constant().spec, m2);
  EXPECT_LT(d.parts_residual, 1e-7);
  EXPECT_LT(d.identity_residual, 1e-8);
}

TEST(CurvatureSquare, VaryingBackgroundRejected) {
  const auto c = testmetrics::conformally_flat();
  const SphereBundleMesh mesh = build_mesh(c.spec, {6, 6, 6}, DirectionRule::ico(0));
  EXPECT_EQ(kind_of([&] { curvature_square_identity(ConformalFactor::identity(), c.spec, mesh); }),
            ErrorKind::NonConstantScalarCurvature);
}

TEST(LowerBound, ConstantFactorReproducesExactly) {
  const SphereBundleMesh mesh = flat_mesh(6);
  const GreenMatrix G = green_function(assemble(MetricSpec::euclidean(), mesh));
  const LowerBoundRecord r = inverse_lower_bound(ConformalFactor::parse("1.3"), MetricSpec::euclidean(), mesh, G);
  EXPECT_LT(r.green_residual, 1e-14);
  EXPECT_NEAR(r.c1, 1.3, 1e-15);
  EXPECT_EQ(r.chain_rule_residual, 0.0);
  ASSERT_TRUE(r.green_min.has_value());
}

TEST(LowerBound, WaveFactor) {
  const SphereBundleMesh mesh = build_mesh(MetricSpec::euclidean(), {8, 8, 8}, DirectionRule::single({0, 0, 1}));
  const MetricSpec flat = MetricSpec::euclidean();
  const DiscreteOperator op = assemble(flat, mesh);
  const GreenMatrix G = green_function(op);
  const ConformalFactor phi = ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)");
  const LowerBoundRecord r = inverse_lower_bound(phi, flat, mesh, G);
  EXPECT_LT(r.green_residual, 1e-7);
  EXPECT_LT(r.chain_rule_residual, 1e-8);
  // Closed forms of the mean of (1 + a sin)^-1 and (1 + a sin)^-2.
  const double a = 0.1;
  EXPECT_LT(rel(r.mean_inverse, 1 / std::sqrt(1 - a * a)), 1e-9);
  EXPECT_LT(rel(r.cs_bound, std::pow(1 - a * a, -0.75)), 1e-9);
  EXPECT_GT(r.cs_slack, 0.0);
  EXPECT_NEAR(r.c1, 0.9, 1e-14);
  EXPECT_EQ(r.s_term, 0.0);
  EXPECT_GT(r.s_tilde_term, 0.0);
  // The continuum Laplacian inverted discretely: a second-order discrepancy.
  EXPECT_LT(r.green_consistency, 0.1);
  EXPECT_GT(r.green_consistency, r.green_residual);
  const LowerBoundRecord s = inverse_lower_bound(phi, flat, mesh, op);
  EXPECT_LT(s.green_residual, 1e-7);
  EXPECT_LT(std::abs(s.green_consistency - r.green_consistency), 1e-9);
  EXPECT_FALSE(s.green_min.has_value());
}

TEST(LowerBound, MeshMismatch) {
  const SphereBundleMesh a = flat_mesh(6);
  const SphereBundleMesh b = flat_mesh(6);
  const DiscreteOperator op = assemble(MetricSpec::euclidean(), a);
  EXPECT_EQ(kind_of([&] { inverse_lower_bound(ConformalFactor::identity(), MetricSpec::euclidean(), b, op); }),
            ErrorKind::MeshMismatch);
}

TEST(SobolevChain, ConstantFactor) {
  const SphereBundleMesh mesh = flat_mesh(6);
  const SobolevChainRecord r = sobolev_chain(ConformalFactor::identity(), MetricSpec::euclidean(), mesh, 0.5);
  EXPECT_EQ(r.energy_lhs, 0.0);
  EXPECT_EQ(r.energy_rhs, 0.0);
  EXPECT_EQ(r.energy_residual, 0.0);
  EXPECT_LT(rel(r.lhs, std::cbrt(kFourPi)), 1e-14);
  EXPECT_LT(rel(r.c2_floor, std::pow(kFourPi, -2.0 / 3.0)), 1e-14);
  const SobolevChainRecord c = sobolev_chain(ConformalFactor::parse("1.2"), MetricSpec::euclidean(), mesh, 0.5);
  EXPECT_LT(rel(c.phi_six_eps, kFourPi * std::pow(1.2, 6.5)), 1e-13);
}

TEST(SobolevChain, EnergyIdentity) {
  const SphereBundleMesh mesh = flat_mesh(12);
  const SobolevChainRecord r =
      sobolev_chain(ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)"), MetricSpec::euclidean(), mesh, 0.5,
                            SobolevConstants{1.0, 1.0});
  EXPECT_LT(r.energy_residual, 1e-7);
  EXPECT_GT(r.energy_lhs, 0.0);
  EXPECT_NEAR(r.rhs, r.grad_sq + r.l2_sq, 1e-12);
  EXPECT_GT(r.slack, 0.0);
}

TEST(SobolevChain, EpsilonRange) {
  const SphereBundleMesh mesh = flat_mesh(4);
  for (double eps : {2.5, 2.0, 0.0, -0.1}) {
    EXPECT_EQ(kind_of([&] { sobolev_chain(ConformalFactor::identity(), MetricSpec::euclidean(), mesh, eps); }),
              ErrorKind::EpsilonOutOfRange);
  }
}

TEST(SobolevChain, Calibration) {
  const SphereBundleMesh mesh = flat_mesh(8);
  const std::vector<ConformalFactor> family = {ConformalFactor::identity(),
                                               ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)"),
                                               ConformalFactor::parse("1 + 0.2*cos(2*pi*(x2 + x3))")};
  const double floor = std::pow(kFourPi, -2.0 / 3.0);
  const SobolevCalibration c = calibrate_sobolev(family, MetricSpec::euclidean(), mesh, 0.5, floor);
  ASSERT_EQ(c.members.size(), 3u);
  double tightest = 1.0;
  for (const SobolevChainRecord& r : c.members) {
    EXPECT_GE(r.slack, -1e-12 * r.lhs);
    tightest = std::min(tightest, std::abs(r.slack) / r.lhs);
  }
  EXPECT_LT(tightest, 1e-12);
  EXPECT_GT(c.C1, 0.0);
  EXPECT_EQ(kind_of([&] { calibrate_sobolev(family, MetricSpec::euclidean(), mesh, 0.5, 0.9 * floor); }),
            ErrorKind::RequestRejected);
  EXPECT_EQ(kind_of([&] { calibrate_sobolev({}, MetricSpec::euclidean(), mesh, 0.5, floor); }), ErrorKind::EmptyFamily);
}

TEST(Bootstrap, Examples) {
  const std::vector<BootstrapStep> s = bootstrap_exponents(0.5);
  ASSERT_GE(s.size(), 2u);
  EXPECT_EQ(s[0].r, 6.5L);
  EXPECT_LT(std::abs(static_cast<double>(s[1].r - 39.0L / 5.5L)), 1e-15);
  EXPECT_LT(std::abs(static_cast<double>(s[0].p - 13.0L / 10.5L)), 1e-15);
  EXPECT_GE(s.back().r, 12.0L);
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_EQ(s[k].k, static_cast<int>(k));
    EXPECT_EQ(s[k].p, 2 * s[k].r / (4 + s[k].r));
    if (k > 0) EXPECT_GT(s[k].r, s[k - 1].r);
  }
  const std::vector<BootstrapStep> edge = bootstrap_exponents(6.0 - 1e-9);
  EXPECT_EQ(edge.size(), 2u);
  for (double eps : {0.1, 0.5, 1.0}) {
    const auto seq = bootstrap_exponents(eps);
    EXPECT_LE(seq.size(), 21u);
    EXPECT_GE(seq.back().r, 12.0L);
  }
}

TEST(Bootstrap, RecurrenceIdentity) {
  // r_{k+1} - r_k = r_k (r_k - 6) / (12 - r_k).
  for (double eps : {0.01, 0.3, 2.0, 5.5}) {
    const auto s = bootstrap_exponents(eps);
    for (std::size_t k = 0; k + 1 < s.size(); ++k) {
      const long double r = s[k].r;
      const long double inc = r * (r - 6) / (12 - r);
      EXPECT_LT(std::abs(static_cast<double>((s[k + 1].r - r - inc) / s[k + 1].r)), 1e-15);
    }
  }
  const auto stop = bootstrap_exponents(0.5, 8.0);
  EXPECT_GE(stop.back().r, 8.0L);
  EXPECT_LT(stop[stop.size() - 2].r, 8.0L);
}

TEST(Bootstrap, InvalidEpsilon) {
  for (double eps : {0.0, -1.0, 6.0, 7.0}) {
    EXPECT_EQ(kind_of([&] { bootstrap_exponents(eps); }), ErrorKind::InvalidEpsilon);
  }
}

TEST(TheoremCheck, UnitFactor) {
  const ProbeConfig cfg = small_probe();
  const BoundsReport r = theorem_check({ConformalFactor::identity()}, MetricSpec::euclidean(), cfg);
  ASSERT_EQ(r.members.size(), 1u);
  const MemberRecord& m = r.members[0];
  EXPECT_FALSE(m.m.error.has_value());
  EXPECT_NEAR(m.m.a0, kFourPi, 1e-12);
  EXPECT_EQ(m.m.a1, 0.0);
  EXPECT_EQ(m.m.a2, 0.0);
  EXPECT_LT(rel(m.m.lambda1, 64 * 4 * std::pow(std::sin(kPi / 8), 2)), 1e-10);
  EXPECT_TRUE(m.passed());
  EXPECT_EQ(r.passing, 1u);
  EXPECT_EQ(*r.inf_min_phi, 1.0);
  EXPECT_EQ(*r.sup_max_phi, 1.0);
  EXPECT_LT(rel(*r.sup_w22, std::sqrt(kFourPi)), 1e-12);
}

TEST(TheoremCheck, DuplicatedFamilyIsIdempotent) {
  ProbeConfig cfg = small_probe();
  cfg.alpha0 = kFourPi * std::pow(1.05, 6);
  const ConformalFactor c = ConformalFactor::parse("1.05");
  const BoundsReport one = theorem_check({c}, MetricSpec::euclidean(), cfg);
  const BoundsReport two = theorem_check({c, c}, MetricSpec::euclidean(), cfg);
  EXPECT_EQ(two.passing, 2u);
  EXPECT_EQ(*one.inf_min_phi, *two.inf_min_phi);
  EXPECT_EQ(*one.sup_max_phi, *two.sup_max_phi);
  EXPECT_EQ(*one.sup_w22, *two.sup_w22);
}

TEST(TheoremCheck, SelfCalibratedPair) {
  ProbeConfig cfg = small_probe();
  const std::vector<ConformalFactor> family = {ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)"),
                                               ConformalFactor::parse("1 + 0.1*cos(2*pi*x2)")};
  const auto meas = measure_family(family, MetricSpec::euclidean(), cfg);
  // Both factors have the same volume.
  cfg.alpha0 = meas[0].a0;
  EXPECT_LT(rel(meas[0].a0, meas[1].a0), 1e-12);
  const ProbeConfig cal = calibrate_caps(meas, cfg);
  EXPECT_LT(rel(cal.alpha1, 1.1 * std::max(meas[0].a1, meas[1].a1)), 1e-15);
  const BoundsReport r = evaluate_family(meas, cal);
  EXPECT_EQ(r.passing, 2u);
  for (const MemberRecord& m : r.members) {
    EXPECT_TRUE(m.passed());
    EXPECT_LT(m.m.l2.identity_residual, 1e-8);
    ASSERT_TRUE(m.m.curvature_square.has_value());
    EXPECT_LT(m.m.curvature_square->identity_residual, 1e-8);
  }
  EXPECT_TRUE(std::isfinite(*r.sup_w22));
  EXPECT_NEAR(*r.inf_min_phi, 0.9, 1e-14);
  EXPECT_NEAR(*r.sup_max_phi, 1.1, 1e-14);
}

TEST(TheoremCheck, MonotoneInCaps) {
  ProbeConfig cfg = small_probe();
  FamilyGenerator gen;
  gen.count = 4;
  const SphereBundleMesh mesh = build_mesh(MetricSpec::euclidean(), cfg.resolution, cfg.directions);
  const auto family = generate_family(gen, mesh, cfg.alpha0);
  const auto meas = measure_family(family, MetricSpec::euclidean(), cfg);
  const ProbeConfig base = calibrate_caps(meas, cfg, -0.05);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> grow(1.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    ProbeConfig a = base;
    a.alpha1 *= grow(rng);
    a.alpha2 *= grow(rng);
    ProbeConfig b = a;
    b.alpha1 *= grow(rng);
    b.alpha2 *= grow(rng);
    b.Lambda /= grow(rng);
    const BoundsReport ra = evaluate_family(meas, a);
    const BoundsReport rb = evaluate_family(meas, b);
    for (std::size_t i = 0; i < meas.size(); ++i) {
      if (ra.members[i].passed()) EXPECT_TRUE(rb.members[i].passed());
    }
    EXPECT_GE(rb.passing, ra.passing);
  }
}

TEST(TheoremCheck, ErrorsAndValidation) {
  const ProbeConfig cfg = small_probe();
  EXPECT_EQ(kind_of([&] { theorem_check({}, MetricSpec::euclidean(), cfg); }), ErrorKind::EmptyFamily);
  ProbeConfig bad = cfg;
  bad.Lambda = -1.0;
  EXPECT_EQ(kind_of([&] { theorem_check({ConformalFactor::identity()}, MetricSpec::euclidean(), bad); }),
            ErrorKind::ConfigError);
  const BoundsReport r = theorem_check({ConformalFactor::parse("0.5 + sin(2*pi*x1)"), ConformalFactor::identity()},
                                       MetricSpec::euclidean(), cfg);
  ASSERT_EQ(r.members.size(), 2u);
  ASSERT_TRUE(r.members[0].m.error.has_value());
  EXPECT_NE(r.members[0].m.error->find("NonPositiveFactor"), std::string::npos);
  EXPECT_FALSE(r.members[0].passed());
  EXPECT_TRUE(r.members[1].passed());
  EXPECT_EQ(r.passing, 1u);
}

TEST(TheoremCheck, VaryingBackgroundSkipsOnlyTheExpansion) {
  const auto c = testmetrics::conformally_flat();
  ProbeConfig cfg = small_probe();
  cfg.alpha0 = build_mesh(c.spec, cfg.resolution, cfg.directions).total_volume();
  const BoundsReport r = theorem_check({ConformalFactor::identity()}, c.spec, cfg);
  const MemberMeasurement& m = r.members[0].m;
  EXPECT_FALSE(m.error.has_value());
  EXPECT_FALSE(m.curvature_square.has_value());
  ASSERT_TRUE(m.curvature_square_skipped.has_value());
  EXPECT_TRUE(r.members[0].volume_ok);
}

TEST(FamilyGenerator, DeterministicAndNormalized) {
  const SphereBundleMesh mesh = flat_mesh(8);
  FamilyGenerator gen;
  gen.count = 6;
  const auto a = generate_family(gen, mesh, kFourPi);
  const auto b = generate_family(gen, mesh, kFourPi);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].describe(), b[i].describe());
    distinct.insert(a[i].describe());
    const SampledField s = sample(a[i].phi(), mesh);
    std::vector<double> six(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) six[k] = std::pow(s[k], 6);
    EXPECT_LT(rel(integrate(SampledField(mesh, six), mesh), kFourPi), 1e-13);
    const Extrema e = field_extrema(s, mesh);
    EXPECT_GT(e.min, 0.85);
    EXPECT_LT(e.max, 1.15);
  }
  EXPECT_EQ(distinct.size(), a.size());
  gen.seed = 77;
  EXPECT_NE(generate_family(gen, mesh, kFourPi)[0].describe(), a[0].describe());
  gen.count = 0;
  EXPECT_EQ(kind_of([&] { generate_family(gen, mesh, kFourPi); }), ErrorKind::EmptyFamily);
}

TEST(BoundsCsv, RowsAndSummary) {
  ProbeConfig cfg = small_probe();
  cfg.resolution = {12, 12, 12};
  cfg.spectrum.dense_limit = 500;
  const BoundsReport r = theorem_check({ConformalFactor::identity(), ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)")},
                                       MetricSpec::euclidean(), cfg);
  std::ostringstream os;
  write_bounds_csv(r, os);
  std::istringstream in(os.str());
  std::string line;
  int rows = 0, comments = 0;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("member,factor,a0", 0), 0u);
  while (std::getline(in, line)) (line[0] == '#' ? comments : rows)++;
  EXPECT_EQ(rows, 2);
  EXPECT_GE(comments, 4);
  EXPECT_NE(os.str().find("passing=1"), std::string::npos);
  EXPECT_LT(max_identity_residual(r), 1e-8);
}
