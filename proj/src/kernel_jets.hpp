#pragma once

// Jet-level building blocks shared by the geometry kernel and the field
// calculus. Everything here works on the fundamental tensor carried as a
// Jet<A, B> per component, so a single pipeline serves every level.

#include <array>
#include <cmath>

#include "finsler/error.hpp"
#include "finsler/expr.hpp"
#include "finsler/jet.hpp"
#include "finsler/metric.hpp"

namespace finsler::kernel {

template <int A, int B>
using JetVec = std::array<Jet<A, B>, 3>;
template <int A, int B>
using JetMat = std::array<JetVec<A, B>, 3>;

template <int A, int B>
JetVec<A, B> position_jets(const Vec3& x) {
  return {Jet<A, B>::position(0, x[0]), Jet<A, B>::position(1, x[1]), Jet<A, B>::position(2, x[2])};
}

template <int A, int B>
JetVec<A, B> direction_jets(const Vec3& y) {
  return {Jet<A, B>::direction(0, y[0]), Jet<A, B>::direction(1, y[1]), Jet<A, B>::direction(2, y[2])};
}

/// a_ij(x) and b_i(x) as position-only jets.
template <int A>
void coefficient_jets(const MetricSpec& spec, const Vec3& x, JetMat<A, 0>& a, JetVec<A, 0>& b) {
  const JetVec<A, 0> X = position_jets<A, 0>(x);
  const JetVec<A, 0> Y{Jet<A, 0>(0.0), Jet<A, 0>(0.0), Jet<A, 0>(0.0)};
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      a[i][j] = evaluate(spec.a(i, j), X, Y);
      a[j][i] = a[i][j];
    }
    b[i] = spec.kind() == MetricKind::Randers ? evaluate(spec.b(i), X, Y) : Jet<A, 0>(0.0);
  }
}

/// F as a jet with bounds (A, B).
template <int A, int B>
Jet<A, B> finsler_jet(const MetricSpec& spec, const Vec3& x, const Vec3& y) {
  if (spec.kind() == MetricKind::ClosedForm) {
    return evaluate(spec.finsler_function(), position_jets<A, B>(x), direction_jets<A, B>(y));
  }
  JetMat<A, 0> a;
  JetVec<A, 0> b;
  coefficient_jets<A>(spec, x, a, b);
  Jet<A, B> q(0.0);
  for (int i = 0; i < 3; ++i) {
    Jet<A, B> row(0.0);
    for (int j = 0; j < 3; ++j) row += a[i][j].template extend_y<B>().times_direction(j, y[j]);
    q += row.times_direction(i, y[i]);
  }
  if (!(q.value() > 0.0)) fail(ErrorKind::DegenerateMetric, "a(y, y) is not positive");
  Jet<A, B> F = sqrt(q);
  if (spec.kind() == MetricKind::Randers) {
    for (int i = 0; i < 3; ++i) F += b[i].template extend_y<B>().times_direction(i, y[i]);
  }
  return F;
}

/// g_ij with bounds (A, B). Riemannian coefficients are embedded directly;
/// otherwise g = (1/2) d^2 F^2 / dy dy from a jet of F^2 two orders deeper.
template <int A, int B>
JetMat<A, B> metric_jets(const MetricSpec& spec, const Vec3& x, const Vec3& y, double& F_value) {
  JetMat<A, B> g;
  if (spec.kind() == MetricKind::RiemannianField) {
    JetMat<A, 0> a;
    JetVec<A, 0> b;
    coefficient_jets<A>(spec, x, a, b);
    double q = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        g[i][j] = a[i][j].template extend_y<B>();
        q += a[i][j].value() * y[i] * y[j];
      }
    }
    if (!(q > 0.0)) fail(ErrorKind::DegenerateMetric, "a(y, y) is not positive");
    F_value = std::sqrt(q);
    return g;
  }
  const Jet<A, B + 2> F = finsler_jet<A, B + 2>(spec, x, y);
  F_value = F.value();
  if (!(F_value > 0.0)) fail(ErrorKind::NonConvex, "F is not positive at the requested point");
  const Jet<A, B + 2> F2 = F * F;
  for (int i = 0; i < 3; ++i) {
    const Jet<A, B + 1> di = F2.dy(i);
    for (int j = i; j < 3; ++j) {
      g[i][j] = di.dy(j) * 0.5;
      g[j][i] = g[i][j];
    }
  }
  return g;
}

template <int A, int B>
JetMat<A, B> truncate_mat(const JetMat<A + 1, B>& m) {
  JetMat<A, B> r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i][j] = m[i][j].template truncate<A, B>();
  }
  return r;
}

template <int A, int B>
JetMat<A, B> inverse(const JetMat<A, B>& g) {
  JetMat<A, B> c;
  c[0][0] = g[1][1] * g[2][2] - g[1][2] * g[2][1];
  c[0][1] = g[1][2] * g[2][0] - g[1][0] * g[2][2];
  c[0][2] = g[1][0] * g[2][1] - g[1][1] * g[2][0];
  c[1][0] = g[0][2] * g[2][1] - g[0][1] * g[2][2];
  c[1][1] = g[0][0] * g[2][2] - g[0][2] * g[2][0];
  c[1][2] = g[0][1] * g[2][0] - g[0][0] * g[2][1];
  c[2][0] = g[0][1] * g[1][2] - g[0][2] * g[1][1];
  c[2][1] = g[0][2] * g[1][0] - g[0][0] * g[1][2];
  c[2][2] = g[0][0] * g[1][1] - g[0][1] * g[1][0];
  const Jet<A, B> det = g[0][0] * c[0][0] + g[0][1] * c[0][1] + g[0][2] * c[0][2];
  const Jet<A, B> inv = reciprocal(det);
  JetMat<A, B> r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i][j] = c[j][i] * inv;
  }
  return r;
}

/// G^i = (1/4) g^il (2 d_k g_jl - d_l g_jk) y^j y^k.
template <int A, int B>
JetVec<A - 1, B> spray_jets(const JetMat<A, B>& g, const Vec3& y) requires(A >= 1) {
  using J = Jet<A - 1, B>;
  std::array<JetMat<A - 1, B>, 3> dg;  // dg[k][j][l] = d_k g_jl
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) {
      for (int l = j; l < 3; ++l) {
        dg[k][j][l] = g[j][l].dx(k);
        dg[k][l][j] = dg[k][j][l];
      }
    }
  }
  JetVec<A - 1, B> w;
  for (int l = 0; l < 3; ++l) {
    J acc(0.0);
    for (int k = 0; k < 3; ++k) {
      J inner(0.0);
      for (int j = 0; j < 3; ++j) {
        J t = dg[k][j][l] * 2.0 - dg[l][j][k];
        inner += t.times_direction(j, y[j]);
      }
      acc += inner.times_direction(k, y[k]);
    }
    w[l] = acc;
  }
  const JetMat<A - 1, B> ginv = inverse(truncate_mat<A - 1, B>(g));
  JetVec<A - 1, B> G;
  for (int i = 0; i < 3; ++i) {
    J s(0.0);
    for (int l = 0; l < 3; ++l) s += ginv[i][l] * w[l];
    G[i] = s * 0.25;
  }
  return G;
}

template <int A, int B>
Mat3 values(const JetMat<A, B>& m) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i][j] = m[i][j].value();
  }
  return r;
}

}  // namespace finsler::kernel

namespace finsler {
struct GeometryAtPoint;
struct NumericPolicy;
}  // namespace finsler

namespace finsler::kernel {

/// Connection-level geometry plus the metric jets it was built from.
GeometryAtPoint connection_with_jets(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                                     const NumericPolicy& policy, JetMat<1, 2>& g);

/// As above with one more x-order, exposing the spray jets (N as a jet).
GeometryAtPoint connection_with_spray_jets(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                                           const NumericPolicy& policy, JetMat<2, 2>& g, JetVec<1, 2>& G);

}  // namespace finsler::kernel
