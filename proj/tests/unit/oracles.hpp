#pragma once

// Reference implementations used only by the tests. They share no code with
// the library: derivatives come from a small nested dual number and plain
// finite differences, and the formulas are the classical Riemannian ones.

#include <array>
#include <cmath>
#include <functional>

namespace oracle {

using V3 = std::array<double, 3>;
using M3 = std::array<V3, 3>;

template <class T>
struct Dual {
  T v{};
  T d{};
  Dual() = default;
  Dual(double c) : v(c), d(0.0) {}  // NOLINT
  Dual(T value, T deriv) : v(value), d(deriv) {}
};

template <class T> Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
template <class T> Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}
template <class T> Dual<T> operator+(const Dual<T>& a, double c) { return {a.v + c, a.d}; }
template <class T> Dual<T> operator+(double c, const Dual<T>& a) { return {a.v + c, a.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, double c) { return {a.v - c, a.d}; }
template <class T> Dual<T> operator-(double c, const Dual<T>& a) { return {c - a.v, -a.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, double c) { return {a.v * c, a.d * c}; }
template <class T> Dual<T> operator*(double c, const Dual<T>& a) { return {a.v * c, a.d * c}; }
template <class T> Dual<T> operator/(const Dual<T>& a, double c) { return {a.v / c, a.d / c}; }
template <class T> Dual<T> operator/(double c, const Dual<T>& a) { return Dual<T>(c) / a; }

inline double sin_(double x) { return std::sin(x); }
inline double cos_(double x) { return std::cos(x); }
inline double exp_(double x) { return std::exp(x); }
inline double sqrt_(double x) { return std::sqrt(x); }
template <class T> Dual<T> sin_(const Dual<T>& a) { return {sin_(a.v), cos_(a.v) * a.d}; }
template <class T> Dual<T> cos_(const Dual<T>& a) { return {cos_(a.v), -sin_(a.v) * a.d}; }
template <class T> Dual<T> exp_(const Dual<T>& a) { return {exp_(a.v), exp_(a.v) * a.d}; }
template <class T> Dual<T> sqrt_(const Dual<T>& a) {
  const T r = sqrt_(a.v);
  return {r, a.d / (2.0 * r)};
}

using D1 = Dual<double>;
using D2 = Dual<D1>;

/// Riemannian metric a_ij(x) written generically over the scalar type.
struct RiemannianOracleMetric {
  std::function<std::array<std::array<D2, 3>, 3>(const std::array<D2, 3>&)> a;
};

struct ClassicalData {
  M3 g{};
  M3 g_inv{};
  std::array<M3, 3> christoffel{};                          // gamma^i_jk
  std::array<std::array<M3, 3>, 3> riemann{};               // R_ijkl, sphere: K(g_ik g_jl - g_il g_jk)
  double scalar = 0.0;
  double det = 0.0;
  std::array<double, 3> d_log_sqrt_det{};
};

inline M3 inv3(const M3& m, double& det) {
  det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
        m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  M3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int i1 = (j + 1) % 3, i2 = (j + 2) % 3, j1 = (i + 1) % 3, j2 = (i + 2) % 3;
      r[i][j] = (m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]) / det;
    }
  }
  return r;
}

/// Classical formulas with exact first and second derivatives of a.
inline ClassicalData classical(const RiemannianOracleMetric& metric, const V3& x) {
  ClassicalData out;
  M3 a{};
  std::array<M3, 3> da{};                  // da[k][i][j] = d_k a_ij
  std::array<std::array<M3, 3>, 3> dda{};  // dda[k][l][i][j]
  for (int k = 0; k < 3; ++k) {
    for (int l = 0; l < 3; ++l) {
      std::array<D2, 3> X;
      for (int i = 0; i < 3; ++i) {
        X[i] = D2(D1(x[i], i == l ? 1.0 : 0.0), D1(i == k ? 1.0 : 0.0, 0.0));
      }
      const auto A = metric.a(X);
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          a[i][j] = A[i][j].v.v;
          da[l][i][j] = A[i][j].v.d;
          dda[k][l][i][j] = A[i][j].d.d;
        }
      }
    }
  }
  out.g = a;
  out.g_inv = inv3(a, out.det);
  std::array<M3, 3> low{};  // Gamma_kij = 1/2(d_i a_jk + d_j a_ik - d_k a_ij)
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) low[k][i][j] = 0.5 * (da[i][j][k] + da[j][i][k] - da[k][i][j]);
  for (int m = 0; m < 3; ++m)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += out.g_inv[m][k] * low[k][i][j];
        out.christoffel[m][i][j] = s;
      }
  // R_iklm = 1/2(d_k d_l g_im + d_i d_m g_kl - d_k d_m g_il - d_i d_l g_km)
  //          + g_np (G^n_kl G^p_im - G^n_km G^p_il)
  const auto& G = out.christoffel;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 3; ++m) {
          double s = 0.5 * (dda[k][l][i][m] + dda[i][m][k][l] - dda[k][m][i][l] - dda[i][l][k][m]);
          for (int n = 0; n < 3; ++n)
            for (int p = 0; p < 3; ++p) s += a[n][p] * (G[n][k][l] * G[p][i][m] - G[n][k][m] * G[p][i][l]);
          out.riemann[i][k][l][m] = s;
        }
  double S = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 3; ++m) S += out.g_inv[i][l] * out.g_inv[k][m] * out.riemann[i][k][l][m];
  out.scalar = S;
  for (int k = 0; k < 3; ++k) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += 0.5 * out.g_inv[i][j] * da[k][i][j];
    out.d_log_sqrt_det[k] = s;
  }
  return out;
}

/// Classical Laplace-Beltrami (analyst's sign) of u with exact derivatives.
inline double laplace_beltrami(const RiemannianOracleMetric& metric,
                               const std::function<D2(const std::array<D2, 3>&)>& u, const V3& x) {
  const ClassicalData c = classical(metric, x);
  double du[3], ddu[3][3];
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      std::array<D2, 3> X;
      for (int i = 0; i < 3; ++i) X[i] = D2(D1(x[i], i == l ? 1.0 : 0.0), D1(i == k ? 1.0 : 0.0, 0.0));
      const D2 r = u(X);
      du[l] = r.v.d;
      ddu[k][l] = r.d.d;
    }
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double h = ddu[i][j];
      for (int m = 0; m < 3; ++m) h -= c.christoffel[m][i][j] * du[m];
      s += c.g_inv[i][j] * h;
    }
  return s;
}

/// g = (1/2) d^2 F^2 / dy dy with exact derivatives; F is generic over the scalar.
template <class Fn>
M3 dual_fundamental(Fn&& F, const V3& y) {
  M3 g{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      std::array<D2, 3> Y;
      for (int k = 0; k < 3; ++k) Y[k] = D2(D1(y[k], k == j ? 1.0 : 0.0), D1(k == i ? 1.0 : 0.0, 0.0));
      const D2 f = F(Y);
      g[i][j] = (f * f).d.d * 0.5;
    }
  return g;
}

/// Central second differences of F^2 / 2 in y.
inline M3 fd_fundamental(const std::function<double(const V3&)>& F, const V3& y, double h = 1e-4) {
  auto F2 = [&](V3 v) { const double f = F(v); return 0.5 * f * f; };
  M3 g{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      V3 pp = y, pm = y, mp = y, mm = y;
      pp[i] += h; pp[j] += h;
      pm[i] += h; pm[j] -= h;
      mp[i] -= h; mp[j] += h;
      mm[i] -= h; mm[j] -= h;
      g[i][j] = (F2(pp) - F2(pm) - F2(mp) + F2(mm)) / (4 * h * h);
    }
  return g;
}

}  // namespace oracle
