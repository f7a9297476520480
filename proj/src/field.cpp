#include "finsler/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "finsler/error.hpp"
#include "kernel_jets.hpp"

namespace finsler {

using kernel::JetMat;
using kernel::JetVec;

ScalarField::ScalarField(const Expr& u)
    : source_(u), unit_(u.on_unit_direction()), direction_independent_(!u.uses_y()) {}

ScalarField ScalarField::parse(std::string_view text) { return ScalarField(parse_expression(text)); }

ScalarField ScalarField::direction_independent_checked(const Expr& u, const PeriodicChart3& chart) {
  ScalarField f(u);
  if (f.direction_independent_) return f;
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> uy(0.0, 1.0);
  for (int s = 0; s < 5; ++s) {
    const Vec3 x{ux(rng) * chart.periods[0], ux(rng) * chart.periods[1], ux(rng) * chart.periods[2]};
    const double ref = f(x, {1.0, 0.0, 0.0});
    for (int d = 0; d < 10; ++d) {
      const Vec3 y{uy(rng), uy(rng), uy(rng)};
      const double v = f(x, y);
      if (std::abs(v - ref) > 1e-12) {
        fail(ErrorKind::ConfigError, "field declared direction-independent varies with the direction");
      }
    }
  }
  f.direction_independent_ = true;
  return f;
}

double ScalarField::operator()(const Vec3& x, const Vec3& y) const { return evaluate(unit_, x, y); }

double CovariantDerivative::norm() const { return std::sqrt(std::max(norm_sq, 0.0)); }

namespace {

template <int A, int B>
Jet<A, B> field_jet(const ScalarField& u, const Vec3& x, const Vec3& y) {
  return evaluate(u.expr(), kernel::position_jets<A, B>(x), kernel::direction_jets<A, B>(y));
}

template <int A, int B, int C, int D>
JetMat<A, B> truncate_all(const JetMat<C, D>& m) {
  JetMat<A, B> r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i][j] = m[i][j].template truncate<A, B>();
  }
  return r;
}

// Coordinate gradient X^i = g^ij d_j u carried as a Jet<1, 1>, plus the
// geometry it was built on.
struct GradientJets {
  GeometryAtPoint geo;
  JetVec<1, 1> X;
};

GradientJets gradient_jets(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                           const NumericPolicy& policy) {
  require_direction(y, policy);
  GradientJets r;
  JetMat<1, 2> g;
  r.geo = kernel::connection_with_jets(spec, x, y, policy, g);
  const JetMat<1, 1> ginv = kernel::inverse(truncate_all<1, 1>(g));
  const Jet<2, 2> U = field_jet<2, 2>(u, x, y);
  JetVec<1, 1> dU;
  for (int j = 0; j < 3; ++j) dU[j] = U.dx(j).template truncate<1, 1>();
  for (int i = 0; i < 3; ++i) {
    Jet<1, 1> s(0.0);
    for (int j = 0; j < 3; ++j) s += ginv[i][j] * dU[j];
    r.X[i] = s;
  }
  return r;
}

// M^i_k = delta_k X^i + Gamma^i_jk X^j (covariant derivative of X along h(d_k)).
Mat3 covariant_of_gradient(const GradientJets& r) {
  const GeometryAtPoint& p = r.geo;
  Mat3 M{};
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) {
      double v = r.X[i].d_x(k);
      for (int m = 0; m < 3; ++m) v -= p.N[m][k] * r.X[i].d_y(m);
      for (int j = 0; j < 3; ++j) v += p.gamma[i][j][k] * r.X[j].value();
      M[i][k] = v;
    }
  }
  return M;
}

// Vertical gradient V^i = F g^ij d u / dy^j as a Jet<0, 1>.
JetVec<0, 1> vertical_gradient(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                               const NumericPolicy& policy, GeometryAtPoint& geo) {
  JetMat<1, 2> g;
  geo = kernel::connection_with_jets(spec, x, y, policy, g);
  const JetMat<0, 1> g01 = truncate_all<0, 1>(g);
  const JetMat<0, 1> ginv = kernel::inverse(g01);
  Jet<0, 1> F(geo.F);
  for (int k = 0; k < 3; ++k) {
    double gy = 0.0;
    for (int j = 0; j < 3; ++j) gy += geo.g[k][j] * y[j];
    F.data()[static_cast<std::size_t>(1 + k)] = gy / geo.F;
  }
  const Jet<0, 2> U = field_jet<0, 2>(u, x, y);
  JetVec<0, 1> V;
  for (int i = 0; i < 3; ++i) {
    Jet<0, 1> s(0.0);
    for (int j = 0; j < 3; ++j) s += ginv[i][j] * U.dy(j);
    V[i] = F * s;
  }
  return V;
}

}  // namespace

Vec3 gradient(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
              const NumericPolicy& policy) {
  const GeometryAtPoint p = compute_geometry(spec, x, y, GeometryLevel::Metric, policy);
  const Jet<1, 0> U = field_jet<1, 0>(u, x, y);
  Vec3 r{};
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) r[j] += p.g_inv[i][j] * U.d_x(i);
  }
  return r;
}

Vec3 gradient_discrepancy(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                          const NumericPolicy& policy) {
  if (u.direction_independent()) return {0.0, 0.0, 0.0};
  const GeometryAtPoint p = compute_geometry(spec, x, y, GeometryLevel::Connection, policy);
  const Jet<0, 1> U = field_jet<0, 1>(u, x, y);
  Vec3 d{};
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int m = 0; m < 3; ++m) s -= p.N[m][i] * U.d_y(m);
    d[i] = s;
  }
  Vec3 r{};
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) r[j] += p.g_inv[j][i] * d[i];
  }
  return r;
}

double hessian(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y, const Vec3& xi,
               const LiftedVector& X, const NumericPolicy& policy) {
  auto nonzero = [](const Vec3& v) { return v[0] != 0.0 || v[1] != 0.0 || v[2] != 0.0; };
  const bool hz = nonzero(X.horizontal);
  const bool vt = nonzero(X.vertical);
  if (hz && vt) fail(ErrorKind::UnsupportedLift, "Hessian takes a purely horizontal or purely vertical lift");
  if (!hz && !vt) return 0.0;
  if (hz) {
    const GradientJets r = gradient_jets(u, spec, x, y, policy);
    const Mat3 M = covariant_of_gradient(r);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int l = 0; l < 3; ++l) {
        for (int k = 0; k < 3; ++k) s += r.geo.g[i][l] * xi[l] * X.horizontal[k] * M[i][k];
      }
    }
    return s;
  }
  GeometryAtPoint geo;
  const JetVec<0, 1> V = vertical_gradient(u, spec, x, y, policy, geo);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int l = 0; l < 3; ++l) {
      for (int k = 0; k < 3; ++k) s += geo.g[i][l] * xi[l] * geo.F * X.vertical[k] * V[i].d_y(k);
    }
  }
  return s;
}

double horizontal_divergence(const VectorSection& xi, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                             const NumericPolicy& policy) {
  const GeometryAtPoint p = compute_geometry(spec, x, y, GeometryLevel::Connection, policy);
  const JetVec<1, 1> X = kernel::position_jets<1, 1>(x);
  const JetVec<1, 1> Y = kernel::direction_jets<1, 1>(y);
  JetVec<1, 1> c;
  for (int i = 0; i < 3; ++i) c[i] = evaluate(xi.components[i].on_unit_direction(), X, Y);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    s += c[i].d_x(i);
    for (int m = 0; m < 3; ++m) s -= p.N[m][i] * c[i].d_y(m);
    for (int j = 0; j < 3; ++j) s += p.gamma[i][i][j] * c[j].value();
  }
  return s;
}

LaplacianRoutes horizontal_laplacian_routes(const ScalarField& u, const MetricSpec& spec, const Vec3& x,
                                            const Vec3& y, const NumericPolicy& policy) {
  const GradientJets r = gradient_jets(u, spec, x, y, policy);
  const GeometryAtPoint& p = r.geo;
  LaplacianRoutes out;
  double div = 0.0;
  for (int i = 0; i < 3; ++i) {
    div += r.X[i].d_x(i);
    for (int m = 0; m < 3; ++m) div -= p.N[m][i] * r.X[i].d_y(m);
    for (int j = 0; j < 3; ++j) div += p.gamma[i][i][j] * r.X[j].value();
  }
  out.divergence_route = -div;

  const Mat3 M = covariant_of_gradient(r);
  const Frame f = orthonormal_frame(p.g);
  double tr = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int i = 0; i < 3; ++i) {
      for (int l = 0; l < 3; ++l) {
        for (int k = 0; k < 3; ++k) tr += p.g[i][l] * f.e[a][l] * f.e[a][k] * M[i][k];
      }
    }
  }
  out.frame_route = -tr;
  return out;
}

double horizontal_laplacian(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                            const NumericPolicy& policy) {
  const LaplacianRoutes r = horizontal_laplacian_routes(u, spec, x, y, policy);
  const double scale = std::max({std::abs(r.divergence_route), std::abs(r.frame_route), 1.0});
  if (std::abs(r.divergence_route - r.frame_route) > policy.laplacian_route_rtol * scale) {
    std::ostringstream os;
    os << "horizontal Laplacian routes disagree: " << r.divergence_route << " vs " << r.frame_route;
    fail(ErrorKind::FormulaMismatch, os.str());
  }
  return r.divergence_route;
}

double vertical_laplacian(const ScalarField& u, const MetricSpec& spec, const Vec3& x, const Vec3& y,
                          const NumericPolicy& policy) {
  if (u.direction_independent()) {
    require_direction(y, policy);
    return 0.0;
  }
  GeometryAtPoint geo;
  const JetVec<0, 1> V = vertical_gradient(u, spec, x, y, policy, geo);
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += V[i].d_y(i);
  return -geo.F * s;
}

CovariantDerivative covariant_derivative(const ScalarField& u, const MetricSpec& spec, const Vec3& x,
                                         const Vec3& y, int k, const NumericPolicy& policy) {
  if (k < 0 || k > 2) fail(ErrorKind::UnsupportedOrder, "covariant derivatives are available for k <= 2");
  CovariantDerivative out;
  out.order = k;
  if (k == 0) {
    require_direction(y, policy);
    const double v = u(x, y);
    out.components = {v};
    out.norm_sq = v * v;
    return out;
  }
  if (k == 1) {
    const GeometryAtPoint p = compute_geometry(spec, x, y, GeometryLevel::Connection, policy);
    const Jet<1, 1> U = field_jet<1, 1>(u, x, y);
    out.components.assign(3, 0.0);
    for (int i = 0; i < 3; ++i) {
      double v = U.d_x(i);
      for (int m = 0; m < 3; ++m) v -= p.N[m][i] * U.d_y(m);
      out.components[static_cast<std::size_t>(i)] = v;
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out.norm_sq += p.g_inv[i][j] * out.components[i] * out.components[j];
    }
    return out;
  }
  JetMat<2, 2> g;
  JetVec<1, 2> G;
  const GeometryAtPoint p = kernel::connection_with_spray_jets(spec, x, y, policy, g, G);
  JetMat<1, 1> N;  // N[m][j] = N^m_j
  for (int m = 0; m < 3; ++m) {
    for (int j = 0; j < 3; ++j) N[m][j] = G[m].dy(j);
  }
  const Jet<2, 2> U = field_jet<2, 2>(u, x, y);
  JetVec<1, 1> D;  // delta_j u
  for (int j = 0; j < 3; ++j) {
    Jet<1, 1> v = U.dx(j).template truncate<1, 1>();
    for (int m = 0; m < 3; ++m) v -= N[m][j] * U.dy(m).template truncate<1, 1>();
    D[j] = v;
  }
  out.components.assign(9, 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double v = D[j].d_x(i);
      for (int m = 0; m < 3; ++m) v -= p.N[m][i] * D[j].d_y(m);
      for (int m = 0; m < 3; ++m) v -= p.gamma[m][i][j] * D[m].value();
      out.components[static_cast<std::size_t>(3 * i + j)] = v;
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          out.norm_sq += p.g_inv[i][a] * p.g_inv[j][b] * out.components[3 * i + j] * out.components[3 * a + b];
        }
      }
    }
  }
  return out;
}

}  // namespace finsler
