#include "finsler/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/geometry.hpp"

namespace finsler {

namespace {

void require_positive_value(double v, const Vec3& x, const Vec3& y) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "conformal factor is " << v << " at x = (" << x[0] << ", " << x[1] << ", " << x[2] << "), y = (" << y[0]
       << ", " << y[1] << ", " << y[2] << ")";
    fail(ErrorKind::NonPositiveFactor, os.str());
  }
}

}  // namespace

ConformalFactor::ConformalFactor(ScalarField phi, bool allow_direction_dependent) : phi_(std::move(phi)) {
  if (!phi_.direction_independent() && !allow_direction_dependent) {
    fail(ErrorKind::ConfigError, "conformal factor depends on the direction; enable direction-dependent factors");
  }
}

ConformalFactor ConformalFactor::parse(std::string_view text, bool allow_direction_dependent) {
  return ConformalFactor(ScalarField::parse(text), allow_direction_dependent);
}

ScalarField ConformalFactor::u() const { return ScalarField(Expr(2.0) * log(phi_.source())); }

ScalarField ConformalFactor::power(double p) const { return ScalarField(pow(phi_.source(), Expr(p))); }

void ConformalFactor::require_positive(const SphereBundleMesh& mesh) const {
  map_nodes(mesh, !direction_independent(), [&](const Vec3& x, const Vec3& y) {
    const double v = phi_(x, y);
    require_positive_value(v, x, y);
    return v;
  });
}

void ConformalFactor::require_positive(const PeriodicChart3& chart) const {
  std::vector<Vec3> dirs = {{1, 0, 0}};
  if (!direction_independent()) {
    dirs = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}, {1, 1, 1},
            {1, 1, -1}, {1, -1, 1}, {1, -1, -1}, {-1, 1, 1}, {-1, 1, -1}, {-1, -1, 1}, {-1, -1, -1}};
  }
  constexpr int n = 8;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Vec3 x{chart.periods[0] * i / n, chart.periods[1] * j / n, chart.periods[2] * k / n};
        for (const Vec3& y : dirs) require_positive_value(phi_(x, y), x, y);
      }
}

MetricSpec conformal_deform(const MetricSpec& spec, const ConformalFactor& phi) {
  phi.require_positive(spec.chart());
  const int order = spec.x_derivative_order();
  if (phi.direction_independent() && spec.kind() != MetricKind::ClosedForm) {
    const Expr p2 = phi.phi().source() * phi.phi().source();
    const Expr p4 = p2 * p2;
    std::array<Expr, 6> a;
    for (std::size_t k = 0; k < 6; ++k) a[k] = p4 * spec.a_coefficients()[k];
    if (spec.kind() == MetricKind::RiemannianField) {
      return MetricSpec::riemannian(a, spec.chart()).with_x_derivative_order(order);
    }
    std::array<Expr, 3> b;
    for (std::size_t k = 0; k < 3; ++k) b[k] = p2 * spec.b_coefficients()[k];
    return MetricSpec::randers(a, b, spec.chart()).with_x_derivative_order(order);
  }
  const Expr p = phi.phi().expr();
  return MetricSpec::closed_form(p * p * spec.finsler_function(), spec.chart()).with_x_derivative_order(order);
}

double volume_density(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return std::sqrt(compute_geometry(spec, x, y, GeometryLevel::Metric, policy).det_g);
}

double scalar_transform(const MetricSpec& spec, const ConformalFactor& phi, const Vec3& x, const Vec3& y,
                        const NumericPolicy& policy) {
  const double v = phi(x, y);
  require_positive_value(v, x, y);
  const GeometryAtPoint p = compute_geometry(spec, x, y, GeometryLevel::Curvature, policy);
  const ScalarField u = phi.u();
  const double lap = horizontal_laplacian(u, spec, x, y, policy);
  const Vec3 grad = gradient(u, spec, x, y, policy);
  double sq = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) sq += p.g[i][j] * grad[i] * grad[j];
  return (p.scalar_S + 4.0 * lap - 2.0 * sq) / (v * v * v * v);
}

double direct_scalar_curvature(const MetricSpec& deformed, const Vec3& x, const Vec3& y,
                               const NumericPolicy& policy) {
  return compute_geometry(deformed, x, y, GeometryLevel::Curvature, policy).scalar_S;
}

std::string_view to_string(CurvatureSource s) { return s == CurvatureSource::Predicted ? "predicted" : "direct"; }

double yamabe_residual(double lap_phi, double S, double S_tilde, double phi, const YamabeOptions& o) {
  switch (o.mode) {
    case YamabeMode::Dimension3:
      if (o.n != 3) fail(ErrorKind::ModeMismatch, "the three-dimensional form needs n = 3");
      return 8.0 * lap_phi + S * phi - S_tilde * std::pow(phi, 5);
    case YamabeMode::GeneralN: {
      if (o.n < 3) fail(ErrorKind::ModeMismatch, "the general form needs n >= 3");
      const double n = o.n;
      return 4.0 * (n - 1.0) / (n - 2.0) * lap_phi + S * phi - S_tilde * std::pow(phi, (n + 2.0) / (n - 2.0));
    }
    case YamabeMode::SphereBundle: {
      if (o.n < 3) fail(ErrorKind::ModeMismatch, "the sphere-bundle form needs n >= 3");
      const double N = 2.0 * o.n - 1.0;
      return 4.0 * (N - 1.0) / (N - 3.0) * lap_phi - S * phi + S_tilde * std::pow(phi, (N + 5.0) / (N - 3.0));
    }
  }
  return 0.0;
}

YamabeReport yamabe_residual(const MetricSpec& spec, const ConformalFactor& phi, const SphereBundleMesh& mesh,
                             const YamabeOptions& options, const NumericPolicy& policy) {
  yamabe_residual(0.0, 0.0, 0.0, 1.0, options);
  phi.require_positive(mesh);
  const bool per_dir = spec.direction_dependent() || !phi.direction_independent();
  const MetricSpec deformed = conformal_deform(spec, phi);
  std::vector<double> lap;
  if (options.laplacian == LaplacianSource::Stencil) {
    lap = sampled_horizontal_laplacian(sample(phi.phi(), mesh), mesh, spec, policy).values();
  }
  std::vector<double> r(mesh.node_count());
  const std::size_t nd = mesh.direction_count();
  parallel_for(mesh.grid_count(), [&](std::size_t g) {
    const Vec3 x = mesh.position(g);
    for (std::size_t d = 0; d < nd; ++d) {
      const std::size_t k = mesh.node(g, d);
      if (!per_dir && d > 0 && options.laplacian == LaplacianSource::Jets) {
        r[k] = r[mesh.node(g, 0)];
        continue;
      }
      const Vec3& y = mesh.direction(d);
      const double v = phi(x, y);
      const double S = compute_geometry(spec, x, y, GeometryLevel::Curvature, policy).scalar_S;
      const double St = options.curvature == CurvatureSource::Direct ? direct_scalar_curvature(deformed, x, y, policy)
                                                                     : scalar_transform(spec, phi, x, y, policy);
      const double L = options.laplacian == LaplacianSource::Jets ? horizontal_laplacian(phi.phi(), spec, x, y, policy)
                                                                  : lap[k];
      r[k] = yamabe_residual(L, S, St, v, options);
    }
  });
  YamabeReport rep;
  rep.curvature = options.curvature;
  std::vector<double> sq(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    rep.sup_norm = std::max(rep.sup_norm, std::abs(r[k]));
    sq[k] = r[k] * r[k];
  }
  rep.l2_norm = std::sqrt(integrate(SampledField(mesh, std::move(sq)), mesh));
  rep.residual = SampledField(mesh, std::move(r),
                              options.laplacian == LaplacianSource::Jets ? FieldOrigin::ClosedForm : FieldOrigin::Stencil);
  return rep;
}

HeatInvariants heat_invariants(const MetricSpec& spec, const ConformalFactor& phi, const SphereBundleMesh& mesh,
                               const HeatOptions& options, const NumericPolicy& policy) {
  phi.require_positive(mesh);
  const bool per_dir = spec.direction_dependent() || !phi.direction_independent();
  const MetricSpec deformed = conformal_deform(spec, phi);
  const std::size_t count = mesh.node_count();
  std::vector<double> f0(count), f1(count), f2(count), f1c(count);
  const std::size_t nd = mesh.direction_count();
  parallel_for(mesh.grid_count(), [&](std::size_t g) {
    const Vec3 x = mesh.position(g);
    for (std::size_t d = 0; d < nd; ++d) {
      const std::size_t k = mesh.node(g, d);
      if (!per_dir && d > 0) {
        const std::size_t k0 = mesh.node(g, 0);
        f0[k] = f0[k0];
        f1[k] = f1[k0];
        f2[k] = f2[k0];
        f1c[k] = f1c[k0];
        continue;
      }
      const Vec3& y = mesh.direction(d);
      const double v = phi(x, y);
      const double v2 = v * v;
      const double v6 = v2 * v2 * v2;
      const double S = compute_geometry(spec, x, y, GeometryLevel::Curvature, policy).scalar_S;
      const double grad_sq = covariant_derivative(phi.phi(), spec, x, y, 1, policy).norm_sq;
      const GeometryAtPoint dp = compute_geometry(deformed, x, y, GeometryLevel::Curvature, policy);
      double rho_sq = 0.0;
      for (const auto& row : dp.ricci)
        for (double c : row) rho_sq += c * c;
      const double St = options.curvature == CurvatureSource::Direct ? dp.scalar_S
                                                                     : scalar_transform(spec, phi, x, y, policy);
      f0[k] = v6;
      f1[k] = (S * v2 + 8.0 * grad_sq) / 6.0;
      f2[k] = (3.0 * dp.scalar_S * dp.scalar_S + 6.0 * rho_sq) * v6 / 360.0;
      f1c[k] = St * v6 / 6.0;
    }
  });
  HeatInvariants h;
  const QuadratureEstimate q0 = integrate_with_estimate(SampledField(mesh, std::move(f0)), mesh);
  const QuadratureEstimate q1 = integrate_with_estimate(SampledField(mesh, std::move(f1)), mesh);
  const QuadratureEstimate q2 = integrate_with_estimate(SampledField(mesh, std::move(f2)), mesh);
  h.a0 = q0.value;
  h.a1 = q1.value;
  h.a2 = q2.value;
  h.a0_error = q0.error;
  h.a1_error = q1.error;
  h.a2_error = q2.error;
  h.a1_curvature_form = integrate(SampledField(mesh, std::move(f1c)), mesh);
  h.a1_form_gap = h.a1_curvature_form - h.a1;
  if (options.tolerance > 0.0) {
    const double worst = std::max({h.a0_error, h.a1_error, h.a2_error});
    if (worst > options.tolerance) {
      std::ostringstream os;
      os << "quadrature error estimate " << worst << " exceeds the tolerance " << options.tolerance;
      fail(ErrorKind::MeshTooCoarse, os.str());
    }
  }
  return h;
}

}  // namespace finsler
