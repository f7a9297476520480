#pragma once

#include <string>

#include "finsler/field.hpp"
#include "finsler/mesh.hpp"
#include "finsler/metric.hpp"
#include "finsler/numeric_policy.hpp"

namespace finsler {

/// Positive factor phi with F~ = phi^2 F in dimension three. The log
/// parameter u = ln phi^2 is always recomputed from phi.
class ConformalFactor {
 public:
  /// Direction-dependent phi requires allow_direction_dependent (ConfigError).
  explicit ConformalFactor(ScalarField phi, bool allow_direction_dependent = false);
  static ConformalFactor parse(std::string_view text, bool allow_direction_dependent = false);
  static ConformalFactor identity() { return ConformalFactor(ScalarField(Expr(1.0))); }

  const ScalarField& phi() const { return phi_; }
  /// u = 2 ln phi.
  ScalarField u() const;
  /// phi^p as a closed-form field.
  ScalarField power(double p) const;
  double operator()(const Vec3& x, const Vec3& y) const { return phi_(x, y); }
  bool direction_independent() const { return phi_.direction_independent(); }
  std::string describe() const { return phi_.source().to_string(); }

  /// NonPositiveFactor unless phi > 0 and finite at every node.
  void require_positive(const SphereBundleMesh& mesh) const;
  /// Same check on a fixed 8^3 lattice (times 14 directions if phi varies).
  void require_positive(const PeriodicChart3& chart) const;

 private:
  ScalarField phi_;
};

/// phi^2 F. Riemannian a -> phi^4 a and Randers (a, b) -> (phi^4 a, phi^2 b)
/// keep their kind; everything else becomes a closed form.
MetricSpec conformal_deform(const MetricSpec& spec, const ConformalFactor& phi);

/// sqrt(det g(x, y)) relative to dx times the round measure on the sphere.
double volume_density(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                      const NumericPolicy& policy = default_policy());

/// exp(-2u) [S + 4 Lap u - 2 |grad u|^2] with u = 2 ln phi.
double scalar_transform(const MetricSpec& spec, const ConformalFactor& phi, const Vec3& x, const Vec3& y,
                        const NumericPolicy& policy = default_policy());
/// Horizontal scalar curvature of the deformed spec, computed directly.
double direct_scalar_curvature(const MetricSpec& deformed, const Vec3& x, const Vec3& y,
                               const NumericPolicy& policy = default_policy());

enum class CurvatureSource { Predicted, Direct };
std::string_view to_string(CurvatureSource s);

enum class YamabeMode {
  Dimension3,    // 8 Lap phi + S phi - S~ phi^5
  GeneralN,      // 4(n-1)/(n-2) Lap phi + S phi - S~ phi^((n+2)/(n-2))
  SphereBundle,  // with N = 2n - 1: 4(N-1)/(N-3) Lap phi - S phi + S~ phi^((N+5)/(N-3))
};

enum class LaplacianSource { Jets, Stencil };

struct YamabeOptions {
  YamabeMode mode = YamabeMode::Dimension3;
  int n = 3;
  CurvatureSource curvature = CurvatureSource::Direct;
  LaplacianSource laplacian = LaplacianSource::Jets;
};

/// Residual from the pieces; ModeMismatch when mode and n conflict.
double yamabe_residual(double lap_phi, double S, double S_tilde, double phi, const YamabeOptions& options = {});

struct YamabeReport {
  SampledField residual;
  double sup_norm = 0.0;
  double l2_norm = 0.0;
  CurvatureSource curvature = CurvatureSource::Direct;
};

YamabeReport yamabe_residual(const MetricSpec& spec, const ConformalFactor& phi, const SphereBundleMesh& mesh,
                             const YamabeOptions& options = {}, const NumericPolicy& policy = default_policy());

struct HeatInvariants {
  double a0 = 0.0;
  double a1 = 0.0;  // phi form: (1/6) int (S phi^2 + 8 |grad phi|^2) eta
  double a2 = 0.0;
  double a0_error = 0.0;
  double a1_error = 0.0;
  double a2_error = 0.0;
  double a1_curvature_form = 0.0;  // (1/6) int S~ eta~
  double a1_form_gap = 0.0;        // a1_curvature_form - a1
};

struct HeatOptions {
  double tolerance = 0.0;  // MeshTooCoarse when a quadrature estimate exceeds it; 0 disables
  CurvatureSource curvature = CurvatureSource::Direct;
};

/// The mesh carries the undeformed measure; phi enters through phi^6.
HeatInvariants heat_invariants(const MetricSpec& spec, const ConformalFactor& phi, const SphereBundleMesh& mesh,
                               const HeatOptions& options = {}, const NumericPolicy& policy = default_policy());

}  // namespace finsler
