#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "finsler/conformal.hpp"
#include "finsler/error.hpp"
#include "finsler/geometry.hpp"
#include "finsler/mesh.hpp"
#include "test_metrics.hpp"
#include "test_support.hpp"

using namespace finsler;
using testmetrics::kPi;
using testsupport::kind_of;
using testsupport::random_direction;
using testsupport::random_point;
using testsupport::rel;

namespace {

const double kFourPi = 4.0 * kPi;

double max_rel(const Mat3& a, const Mat3& b, double scale) {
  double m = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]) / scale);
  return m;
}

double finsler_value(const MetricSpec& s, const Vec3& x, const Vec3& y) {
  return compute_geometry(s, x, y, GeometryLevel::Metric).F;
}

}  // namespace

TEST(ConformalDeform, TrivialFactors) {
  const MetricSpec base = testmetrics::randers_parallel();
  const Vec3 x{0.2, 0.3, 0.4};
  const Vec3 y{0.5, -1.0, 2.0};
  EXPECT_LT(rel(finsler_value(conformal_deform(base, ConformalFactor::identity()), x, y), finsler_value(base, x, y)),
            1e-15);
  const MetricSpec c = conformal_deform(base, ConformalFactor::parse("1.7"));
  EXPECT_LT(rel(finsler_value(c, x, y), 1.7 * 1.7 * finsler_value(base, x, y)), 1e-14);
  EXPECT_EQ(c.kind(), MetricKind::Randers);
  EXPECT_EQ(conformal_deform(testmetrics::quartic_minkowski(), ConformalFactor::parse("1.7")).kind(),
            MetricKind::ClosedForm);
}

TEST(ConformalDeform, ScalingChain) {
  const std::vector<MetricSpec> bases = {testmetrics::conformally_flat().spec, testmetrics::randers_parallel(),
                                         testmetrics::quartic_minkowski()};
  const char* factors[] = {"1 + 0.1*sin(2*pi*x1)", "exp(0.2*cos(2*pi*x2))*(1.2 + 0.1*sin(2*pi*(x1 + x3)))",
                           "2.5"};
  std::mt19937_64 rng(99);
  for (const MetricSpec& base : bases) {
    for (const char* f : factors) {
      const ConformalFactor phi = ConformalFactor::parse(f);
      const MetricSpec def = conformal_deform(base, phi);
      for (int s = 0; s < 20; ++s) {
        const Vec3 x = random_point(rng);
        const Vec3 y = random_direction(rng);
        const double p = phi(x, y);
        const GeometryAtPoint a = compute_geometry(base, x, y, GeometryLevel::Metric);
        const GeometryAtPoint b = compute_geometry(def, x, y, GeometryLevel::Metric);
        EXPECT_LT(rel(b.F, p * p * a.F), 1e-9) << f;
        Mat3 scaled = a.g;
        for (auto& row : scaled)
          for (double& v : row) v *= std::pow(p, 4);
        EXPECT_LT(max_rel(b.g, scaled, std::pow(p, 4)), 1e-9) << f;
        EXPECT_LT(rel(volume_density(def, x, y), std::pow(p, 6) * volume_density(base, x, y)), 1e-9) << f;
      }
    }
  }
}

TEST(ConformalDeform, PreconditionErrors) {
  EXPECT_EQ(kind_of([] { conformal_deform(MetricSpec::euclidean(), ConformalFactor::parse("sin(2*pi*x1)")); }),
            ErrorKind::NonPositiveFactor);
  EXPECT_EQ(kind_of([] { ConformalFactor::parse("1 + 0.1*y1"); }), ErrorKind::ConfigError);
  const ConformalFactor dep = ConformalFactor::parse("1 + 0.1*y1", true);
  const MetricSpec d = conformal_deform(MetricSpec::euclidean(), dep);
  EXPECT_EQ(d.kind(), MetricKind::ClosedForm);
  const Vec3 y{0.0, 3.0, 4.0};
  EXPECT_LT(rel(finsler_value(d, {0, 0, 0}, y), 5.0), 1e-15);
}

TEST(VolumeDensity, Examples) {
  EXPECT_EQ(volume_density(MetricSpec::euclidean(), {0.1, 0.2, 0.3}, {0, 0, 1}), 1.0);
  const MetricSpec c = conformal_deform(MetricSpec::euclidean(), ConformalFactor::parse("1.3"));
  EXPECT_LT(rel(volume_density(c, {0.4, 0.1, 0.9}, {1, 1, 0}), std::pow(1.3, 6)), 1e-14);
  const auto p = testmetrics::product();
  const Vec3 x{0.3, 0.7, 0.2};
  const double a11 = 1.2 + 0.3 * std::sin(2 * kPi * x[1]);
  const double a12 = 0.1 * std::cos(2 * kPi * x[0]);
  const double a22 = 1.0 + 0.2 * std::cos(2 * kPi * (x[0] + x[1]));
  const double det = a11 * a22 - a12 * a12;
  EXPECT_NEAR(volume_density(p.spec, x, {1, 0, 0}), std::sqrt(det), 1e-14);
  EXPECT_EQ(volume_density(p.spec, x, {1, 0, 0}), volume_density(p.spec, x, {0.2, -0.5, 0.3}));
}

TEST(ScalarTransform, Examples) {
  const auto sphere = testmetrics::sphere_patch();
  const Vec3 x{0.1, -0.2, 0.15};
  const Vec3 y{0.3, 0.4, 0.5};
  const double S = compute_geometry(sphere.spec, x, y, GeometryLevel::Curvature).scalar_S;
  EXPECT_LT(rel(scalar_transform(sphere.spec, ConformalFactor::identity(), x, y), S), 1e-12);
  // phi = e^(k/2) gives u = k.
  const double k = 0.4;
  const ConformalFactor c(ScalarField(Expr(std::exp(k / 2))));
  EXPECT_LT(rel(scalar_transform(sphere.spec, c, x, y), std::exp(-2 * k) * S), 1e-12);
}

TEST(ScalarTransform, MatchesDirectCurvature) {
  const ConformalFactor phi = ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)*cos(2*pi*x3)");
  std::mt19937_64 rng(4);
  for (const auto& c : {testmetrics::flat(), testmetrics::conformally_flat(), testmetrics::product()}) {
    const MetricSpec def = conformal_deform(c.spec, phi);
    for (int s = 0; s < 5; ++s) {
      const Vec3 x = random_point(rng);
      const Vec3 y = random_direction(rng);
      const double predicted = scalar_transform(c.spec, phi, x, y);
      const double direct = direct_scalar_curvature(def, x, y);
      EXPECT_LT(rel(predicted, direct), 1e-5) << c.name;
    }
  }
}

TEST(Yamabe, PointwiseForms) {
  EXPECT_EQ(yamabe_residual(0.0, -2.0, -2.0, 1.0), 0.0);
  const double c = 1.3;
  EXPECT_NEAR(yamabe_residual(0.0, 5.0, 5.0 / std::pow(c, 4), c), 0.0, 1e-13);
  YamabeOptions g;
  g.mode = YamabeMode::GeneralN;
  EXPECT_NEAR(yamabe_residual(0.7, 2.0, 1.5, 1.2, g), yamabe_residual(0.7, 2.0, 1.5, 1.2), 1e-14);
  YamabeOptions b;
  b.mode = YamabeMode::SphereBundle;
  // N = 5: 8 Lap phi - S phi + S~ phi^5.
  EXPECT_NEAR(yamabe_residual(0.7, 2.0, 1.5, 1.2, b), 8 * 0.7 - 2.0 * 1.2 + 1.5 * std::pow(1.2, 5), 1e-13);
  YamabeOptions bad;
  bad.n = 4;
  EXPECT_EQ(kind_of([&] { yamabe_residual(0, 0, 0, 1, bad); }), ErrorKind::ModeMismatch);
  bad.mode = YamabeMode::GeneralN;
  bad.n = 2;
  EXPECT_EQ(kind_of([&] { yamabe_residual(0, 0, 0, 1, bad); }), ErrorKind::ModeMismatch);
}

TEST(Yamabe, MeshResiduals) {
  const MetricSpec flat = MetricSpec::euclidean();
  const SphereBundleMesh m = build_mesh(flat, {8, 8, 8}, DirectionRule::ico(0));
  EXPECT_EQ(yamabe_residual(flat, ConformalFactor::identity(), m).sup_norm, 0.0);
  const ConformalFactor phi = ConformalFactor::parse("1 + 0.05*sin(2*pi*x1)");
  // Predicted curvature turns the residual into an identity.
  YamabeOptions pred;
  pred.curvature = CurvatureSource::Predicted;
  EXPECT_LT(yamabe_residual(flat, phi, m, pred).sup_norm, 1e-10);
  const YamabeReport direct = yamabe_residual(flat, phi, m);
  EXPECT_LT(direct.sup_norm, 1e-7);
  EXPECT_EQ(direct.curvature, CurvatureSource::Direct);
  YamabeOptions st;
  st.laplacian = LaplacianSource::Stencil;
  const YamabeReport coarse = yamabe_residual(flat, phi, m, st);
  const SphereBundleMesh fine_mesh = build_mesh(flat, {16, 16, 16}, DirectionRule::ico(0));
  const YamabeReport fine = yamabe_residual(flat, phi, fine_mesh, st);
  EXPECT_GT(coarse.sup_norm / fine.sup_norm, 4.0);
  // 4th-order truncation: 8 * 0.05 (2 pi)^2 (2 pi h)^4 / 90 at h = 1/16.
  const double h4 = std::pow(2 * kPi / 16, 4);
  EXPECT_LT(fine.sup_norm, 1.05 * 8 * 0.05 * 4 * kPi * kPi * h4 / 90);
  EXPECT_EQ(fine.residual.origin(), FieldOrigin::Stencil);
}

TEST(HeatInvariants, FlatTorus) {
  const MetricSpec flat = MetricSpec::euclidean();
  const SphereBundleMesh m = build_mesh(flat, {8, 8, 8}, DirectionRule::ico(1));
  const HeatInvariants h = heat_invariants(flat, ConformalFactor::identity(), m);
  EXPECT_NEAR(h.a0, kFourPi, 1e-10);
  EXPECT_EQ(h.a1, 0.0);
  EXPECT_EQ(h.a2, 0.0);
  const HeatInvariants c = heat_invariants(flat, ConformalFactor::parse("1.1"), m);
  EXPECT_LT(rel(c.a0, kFourPi * std::pow(1.1, 6)), 1e-12);
}

TEST(HeatInvariants, WaveFactorMatchesFourierValue) {
  const MetricSpec flat = MetricSpec::euclidean();
  const SphereBundleMesh m = build_mesh(flat, {8, 8, 8}, DirectionRule::ico(0));
  const HeatInvariants h = heat_invariants(flat, ConformalFactor::parse("1 + 0.1*sin(2*pi*x1)"), m);
  const double expect = 4.0 / 3.0 * kFourPi * 0.02 * kPi * kPi;
  EXPECT_LT(rel(h.a1, expect), 1e-10);
  // Both published forms coincide for constant background curvature.
  EXPECT_LT(std::abs(h.a1_form_gap), 1e-8);
  EXPECT_GT(h.a2, 0.0);
  EXPECT_LT(h.a1_error, 1e-10);
}

TEST(HeatInvariants, CoarseMeshRejectedUnderTightTolerance) {
  const MetricSpec flat = MetricSpec::euclidean();
  const SphereBundleMesh m = build_mesh(flat, {4, 4, 4}, DirectionRule::ico(0));
  HeatOptions o;
  o.tolerance = 1e-8;
  EXPECT_EQ(kind_of([&] { heat_invariants(flat, ConformalFactor::parse("1 + 0.3*sin(2*pi*x1)"), m, o); }),
            ErrorKind::MeshTooCoarse);
}
