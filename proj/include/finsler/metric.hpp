#pragma once

#include <array>
#include <string>

#include "finsler/expr.hpp"
#include "finsler/numeric_policy.hpp"

namespace finsler {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

/// Global periodic chart on T^3; coordinates x^i live in [0, period_i).
struct PeriodicChart3 {
  Vec3 periods{1.0, 1.0, 1.0};

  double volume() const { return periods[0] * periods[1] * periods[2]; }
};

enum class MetricKind { RiemannianField, Randers, ClosedForm };

std::string_view to_string(MetricKind kind);

/// Immutable description of a Finsler metric F(x, y) on the chart.
///
/// RiemannianField: F = sqrt(a_ij(x) y^i y^j).
/// Randers:         F = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i, |b|_a < 1.
/// ClosedForm:      F given directly as an expression in x and y.
class MetricSpec {
 public:
  /// a = identity.
  static MetricSpec euclidean(const PeriodicChart3& chart = {});
  /// Symmetric coefficients in the order a11, a12, a13, a22, a23, a33.
  static MetricSpec riemannian(const std::array<Expr, 6>& a, const PeriodicChart3& chart = {});
  static MetricSpec randers(const std::array<Expr, 6>& a, const std::array<Expr, 3>& b,
                            const PeriodicChart3& chart = {});
  static MetricSpec closed_form(const Expr& F, const PeriodicChart3& chart = {});

  MetricKind kind() const { return kind_; }
  const PeriodicChart3& chart() const { return chart_; }
  const Expr& a(int i, int j) const { return a_[sym_index(i, j)]; }
  const std::array<Expr, 6>& a_coefficients() const { return a_; }
  const Expr& b(int i) const { return b_[static_cast<std::size_t>(i)]; }
  const std::array<Expr, 3>& b_coefficients() const { return b_; }

  /// F as a single expression (for any kind).
  Expr finsler_function() const;

  /// True when g depends on the direction (every kind but RiemannianField,
  /// unless a ClosedForm happens to be quadratic; that case is not detected).
  bool direction_dependent() const { return kind_ != MetricKind::RiemannianField; }
  bool position_dependent() const { return position_dependent_; }

  /// Number of x-derivatives available through jets. Curvature needs two;
  /// with one it falls back to central differences of the connection, with
  /// zero the spray and everything above it are unavailable.
  int x_derivative_order() const { return x_order_; }
  MetricSpec with_x_derivative_order(int order) const;

  /// Canonical text, stable across runs.
  std::string describe() const;

  static constexpr std::size_t sym_index(int i, int j) {
    if (i > j) {
      const int t = i;
      i = j;
      j = t;
    }
    constexpr std::size_t table[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    return table[i][j];
  }

 private:
  MetricSpec() = default;
  void refresh_dependence();

  MetricKind kind_ = MetricKind::RiemannianField;
  PeriodicChart3 chart_{};
  std::array<Expr, 6> a_{Expr(1.0), Expr(0.0), Expr(0.0), Expr(1.0), Expr(0.0), Expr(1.0)};
  std::array<Expr, 3> b_{};
  Expr F_{};
  int x_order_ = 2;
  bool position_dependent_ = false;
};

/// Throws ZeroDirection when |y| is below the policy floor.
void require_direction(const Vec3& y, const NumericPolicy& policy);

/// Throws NonConvex when a Randers one-form reaches unit a-norm at x.
void require_convex(const MetricSpec& spec, const Vec3& x);

/// |b|_a at x (0 for non-Randers kinds).
double randers_b_norm(const MetricSpec& spec, const Vec3& x);

double eval_metric(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                   const NumericPolicy& policy = default_policy());

}  // namespace finsler
