#pragma once

#include <array>
#include <vector>

#include "finsler/expr.hpp"
#include "finsler/geometry.hpp"
#include "finsler/metric.hpp"
#include "finsler/numeric_policy.hpp"

namespace finsler {

/// Smooth function on SM given in closed form. Direction dependence is read
/// through y/|y|, so raw direction vectors may be passed anywhere.
class ScalarField {
 public:
  ScalarField() : ScalarField(Expr(0.0)) {}
  explicit ScalarField(const Expr& u);
  static ScalarField parse(std::string_view text);

  /// Builds a field and checks on random samples that it does not depend on
  /// the direction (ConfigError otherwise).
  static ScalarField direction_independent_checked(const Expr& u, const PeriodicChart3& chart = {});

  const Expr& expr() const { return unit_; }
  const Expr& source() const { return source_; }
  bool direction_independent() const { return direction_independent_; }
  double operator()(const Vec3& x, const Vec3& y) const;

 private:
  Expr source_;
  Expr unit_;
  bool direction_independent_ = true;
};

/// Section of pi*TM in coordinate components, each a closed-form field.
struct VectorSection {
  std::array<Expr, 3> components{};
};

/// A tangent vector of SM split into horizontal and vertical parts.
/// Hessians accept purely horizontal or purely vertical lifts.
struct LiftedVector {
  Vec3 horizontal{};
  Vec3 vertical{};

  static LiftedVector h(const Vec3& v) { return {v, {0.0, 0.0, 0.0}}; }
  static LiftedVector v(const Vec3& w) { return {{0.0, 0.0, 0.0}, w}; }
};

/// grad u^j = g^ij d u / dx^i.
Vec3 gradient(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
              const NumericPolicy& policy = default_policy());

/// g^ij (delta_i u - d_i u): how far the coordinate gradient is from the
/// horizontal one. Zero for direction-independent u or N = 0.
Vec3 gradient_discrepancy(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                          const NumericPolicy& policy = default_policy());

/// Hu(xi, X) = g(xi, nabla_X grad u) for a horizontal lift X = h(eta), and
/// g(xi, nabla_X grad^v u) with the vertical gradient for X = v(eta).
double hessian(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y, const Vec3& xi,
               const LiftedVector& X, const NumericPolicy& policy = default_policy());

/// D xi = delta_i xi^i + Gamma^i_ij xi^j.
double horizontal_divergence(const VectorSection& xi, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                             const NumericPolicy& policy = default_policy());

struct LaplacianRoutes {
  double divergence_route = 0.0;  // -D(grad u)
  double frame_route = 0.0;       // -sum_a Hu(e_a, h(e_a))
};

LaplacianRoutes horizontal_laplacian_routes(const ScalarField& u, const MetricSpec& spec, const Vec3& x,
                                            const Vec3& y, const NumericPolicy& policy = default_policy());

/// Positive horizontal Laplacian; FormulaMismatch when the two routes disagree.
double horizontal_laplacian(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                            const NumericPolicy& policy = default_policy());

/// -sum_a Hu(e_a, v(e_a)) with v(e) = F e^i d/dy^i.
double vertical_laplacian(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                          const NumericPolicy& policy = default_policy());

/// k-th horizontal covariant derivative (k <= 2) with components in
/// coordinates: k = 0 one value, k = 1 three, k = 2 nine (row-major ij).
struct CovariantDerivative {
  int order = 0;
  std::vector<double> components;
  double norm_sq = 0.0;  // fully contracted with g^-1

  double norm() const;
};

CovariantDerivative covariant_derivative(const ScalarField& u, const MetricSpec& spec, const Vec3& x,
                                         const Vec3& y, int k, const NumericPolicy& policy = default_policy());

}  // namespace finsler
