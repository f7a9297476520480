#include "finsler/metric.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "finsler/error.hpp"

namespace finsler {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::RiemannianField: return "riemannian";
    case MetricKind::Randers: return "randers";
    case MetricKind::ClosedForm: return "closed_form";
  }
  return "unknown";
}

MetricSpec MetricSpec::euclidean(const PeriodicChart3& chart) {
  MetricSpec s;
  s.chart_ = chart;
  s.refresh_dependence();
  return s;
}

MetricSpec MetricSpec::riemannian(const std::array<Expr, 6>& a, const PeriodicChart3& chart) {
  MetricSpec s;
  s.kind_ = MetricKind::RiemannianField;
  s.a_ = a;
  s.chart_ = chart;
  for (const Expr& e : a) {
    if (e.uses_y()) fail(ErrorKind::ConfigError, "Riemannian coefficients must not depend on y");
  }
  s.refresh_dependence();
  return s;
}

MetricSpec MetricSpec::randers(const std::array<Expr, 6>& a, const std::array<Expr, 3>& b,
                               const PeriodicChart3& chart) {
  MetricSpec s;
  s.kind_ = MetricKind::Randers;
  s.a_ = a;
  s.b_ = b;
  s.chart_ = chart;
  for (const Expr& e : a) {
    if (e.uses_y()) fail(ErrorKind::ConfigError, "Randers coefficients must not depend on y");
  }
  for (const Expr& e : b) {
    if (e.uses_y()) fail(ErrorKind::ConfigError, "Randers one-form must not depend on y");
  }
  s.refresh_dependence();
  return s;
}

MetricSpec MetricSpec::closed_form(const Expr& F, const PeriodicChart3& chart) {
  MetricSpec s;
  s.kind_ = MetricKind::ClosedForm;
  s.F_ = F;
  s.chart_ = chart;
  s.refresh_dependence();
  return s;
}

void MetricSpec::refresh_dependence() {
  position_dependent_ = false;
  if (kind_ == MetricKind::ClosedForm) {
    position_dependent_ = F_.uses_x();
    return;
  }
  for (const Expr& e : a_) position_dependent_ = position_dependent_ || e.uses_x();
  if (kind_ == MetricKind::Randers) {
    for (const Expr& e : b_) position_dependent_ = position_dependent_ || e.uses_x();
  }
}

MetricSpec MetricSpec::with_x_derivative_order(int order) const {
  if (order < 0 || order > 2) fail(ErrorKind::ConfigError, "x-derivative order must be 0, 1 or 2");
  MetricSpec s = *this;
  s.x_order_ = order;
  return s;
}

Expr MetricSpec::finsler_function() const {
  if (kind_ == MetricKind::ClosedForm) return F_;
  Expr q(0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) q = q + a(i, j) * Expr::y(i) * Expr::y(j);
  }
  Expr F = sqrt(q);
  if (kind_ == MetricKind::Randers) {
    for (int i = 0; i < 3; ++i) F = F + b(i) * Expr::y(i);
  }
  return F;
}

std::string MetricSpec::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << ";periods=" << chart_.periods[0] << ',' << chart_.periods[1] << ','
     << chart_.periods[2] << ";xorder=" << x_order_;
  if (kind_ == MetricKind::ClosedForm) {
    os << ";F=" << F_.to_string();
  } else {
    for (std::size_t k = 0; k < 6; ++k) os << ";a" << k << '=' << a_[k].to_string();
    if (kind_ == MetricKind::Randers) {
      for (std::size_t k = 0; k < 3; ++k) os << ";b" << k << '=' << b_[k].to_string();
    }
  }
  return os.str();
}

void require_direction(const Vec3& y, const NumericPolicy& policy) {
  const double n = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
  if (!(n >= policy.direction_floor)) fail(ErrorKind::ZeroDirection, "direction vector below floor");
}

double randers_b_norm(const MetricSpec& spec, const Vec3& x) {
  if (spec.kind() != MetricKind::Randers) return 0.0;
  const Vec3 zero{0.0, 0.0, 0.0};
  Eigen::Matrix3d a;
  Eigen::Vector3d b;
  for (int i = 0; i < 3; ++i) {
    b(i) = evaluate(spec.b(i), x, zero);
    for (int j = 0; j < 3; ++j) a(i, j) = evaluate(spec.a(i, j), x, zero);
  }
  Eigen::LLT<Eigen::Matrix3d> llt(a);
  if (llt.info() != Eigen::Success) fail(ErrorKind::DegenerateMetric, "Randers a is not positive definite");
  return std::sqrt(b.dot(llt.solve(b)));
}

void require_convex(const MetricSpec& spec, const Vec3& x) {
  if (spec.kind() != MetricKind::Randers) return;
  const double n = randers_b_norm(spec, x);
  if (!(n < 1.0)) {
    std::ostringstream os;
    os << "Randers one-form has |b|_a = " << n << " >= 1 at x = (" << x[0] << ", " << x[1] << ", " << x[2]
       << ")";
    fail(ErrorKind::NonConvex, os.str());
  }
}

double eval_metric(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  require_direction(y, policy);
  require_convex(spec, x);
  const Vec3 zero{0.0, 0.0, 0.0};
  double F = 0.0;
  if (spec.kind() == MetricKind::ClosedForm) {
    F = evaluate(spec.finsler_function(), x, y);
  } else {
    double q = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) q += evaluate(spec.a(i, j), x, zero) * y[i] * y[j];
    }
    if (!(q > 0.0)) fail(ErrorKind::DegenerateMetric, "a(y, y) is not positive");
    F = std::sqrt(q);
    if (spec.kind() == MetricKind::Randers) {
      for (int i = 0; i < 3; ++i) F += evaluate(spec.b(i), x, zero) * y[i];
    }
  }
  if (!(F > 0.0)) fail(ErrorKind::NonConvex, "F is not positive at the requested point");
  return F;
}

}  // namespace finsler
