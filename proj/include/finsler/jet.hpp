#pragma once

// Truncated multivariate Taylor polynomials in six variables split into two
// groups: three position offsets dx and three direction offsets dy.
//
// Jet<DX, DY> stores the normalized Taylor coefficients f^(a,b)/(a! b!) of
// every monomial dx^a dy^b with |a| <= DX and |b| <= DY. Arithmetic and the
// elementary functions propagate all of them exactly (up to round-off), so a
// single evaluation of F^2 yields every partial derivative the connection
// and curvature formulas need. Differentiating lowers the bound of the
// corresponding group by one.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace finsler {

namespace jet_detail {

constexpr int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  int r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

constexpr double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Three-variable monomials of total degree <= D, ordered by degree and then
// lexicographically. The order for D-1 is a prefix of the order for D, so
// truncation is a prefix copy.
template <int D>
struct Monomials {
  static constexpr int count = binomial(D + 3, 3);
  std::array<std::array<int, 3>, count> exps{};
  std::array<int, count> degree{};

  constexpr Monomials() {
    int n = 0;
    for (int deg = 0; deg <= D; ++deg) {
      for (int a = deg; a >= 0; --a) {
        for (int b = deg - a; b >= 0; --b) {
          exps[n] = {a, b, deg - a - b};
          degree[n] = deg;
          ++n;
        }
      }
    }
  }

  constexpr int index_of(int a, int b, int c) const {
    for (int i = 0; i < count; ++i) {
      if (exps[i][0] == a && exps[i][1] == b && exps[i][2] == c) return i;
    }
    return -1;
  }
};

template <int D>
inline constexpr Monomials<D> monomials{};

struct Triple {
  std::int16_t a;
  std::int16_t b;
  std::int16_t c;
};

// All (i, j) with deg(i) + deg(j) <= D and the index of their product.
template <int D>
struct ProductTable {
  static constexpr int count = binomial(D + 6, 6);
  std::array<Triple, count> t{};

  constexpr ProductTable() {
    const auto& m = monomials<D>;
    int n = 0;
    for (int i = 0; i < m.count; ++i) {
      for (int j = 0; j < m.count; ++j) {
        const int a = m.exps[i][0] + m.exps[j][0];
        const int b = m.exps[i][1] + m.exps[j][1];
        const int c = m.exps[i][2] + m.exps[j][2];
        if (a + b + c <= D) {
          t[n++] = {static_cast<std::int16_t>(i), static_cast<std::int16_t>(j),
                    static_cast<std::int16_t>(m.index_of(a, b, c))};
        }
      }
    }
  }
};

template <int D>
inline constexpr ProductTable<D> products{};

// d/dv maps monomial set D onto set D-1: target i comes from source[i] with
// the exponent factor[i].
template <int D>
struct DerivativeTable {
  static constexpr int count = Monomials<D - 1>::count;
  std::array<std::array<int, count>, 3> source{};
  std::array<std::array<double, count>, 3> factor{};

  constexpr DerivativeTable() {
    const auto& lo = monomials<D - 1>;
    const auto& hi = monomials<D>;
    for (int v = 0; v < 3; ++v) {
      for (int i = 0; i < lo.count; ++i) {
        auto e = lo.exps[i];
        e[v] += 1;
        source[v][i] = hi.index_of(e[0], e[1], e[2]);
        factor[v][i] = static_cast<double>(e[v]);
      }
    }
  }
};

template <int D>
inline constexpr DerivativeTable<D> derivatives{};

// Multiplication by a single variable: monomial i moves to shift[v][i]
// (or drops out of the truncation, -1).
template <int D>
struct ShiftTable {
  std::array<std::array<int, Monomials<D>::count>, 3> shift{};

  constexpr ShiftTable() {
    const auto& m = monomials<D>;
    for (int v = 0; v < 3; ++v) {
      for (int i = 0; i < m.count; ++i) {
        auto e = m.exps[i];
        e[v] += 1;
        shift[v][i] = (m.degree[i] + 1 <= D) ? m.index_of(e[0], e[1], e[2]) : -1;
      }
    }
  }
};

template <int D>
inline constexpr ShiftTable<D> shifts{};

}  // namespace jet_detail

template <int DX, int DY>
class Jet {
  static_assert(DX >= 0 && DY >= 0);

 public:
  static constexpr int kDegreeX = DX;
  static constexpr int kDegreeY = DY;
  static constexpr int kNx = jet_detail::Monomials<DX>::count;
  static constexpr int kNy = jet_detail::Monomials<DY>::count;
  static constexpr int kSize = kNx * kNy;

  Jet() { c_.fill(0.0); }
  Jet(double v) {  // NOLINT(google-explicit-constructor): constants mix freely
    c_.fill(0.0);
    c_[0] = v;
  }

  /// x0 + dx_i
  static Jet position(int i, double x0) {
    Jet r(x0);
    if constexpr (DX >= 1) r.c_[static_cast<std::size_t>(1 + i) * kNy] = 1.0;
    return r;
  }

  /// y0 + dy_i
  static Jet direction(int i, double y0) {
    Jet r(y0);
    if constexpr (DY >= 1) r.c_[static_cast<std::size_t>(1 + i)] = 1.0;
    return r;
  }

  double value() const { return c_[0]; }

  /// Raw normalized coefficient of dx^ax dy^ay.
  double coefficient(const std::array<int, 3>& ax, const std::array<int, 3>& ay) const {
    const int ix = jet_detail::monomials<DX>.index_of(ax[0], ax[1], ax[2]);
    const int iy = jet_detail::monomials<DY>.index_of(ay[0], ay[1], ay[2]);
    if (ix < 0 || iy < 0) return 0.0;
    return c_[static_cast<std::size_t>(ix) * kNy + iy];
  }

  /// Mixed partial derivative d^ax/dx^ax d^ay/dy^ay at the expansion point.
  double partial(const std::array<int, 3>& ax, const std::array<int, 3>& ay) const {
    double scale = 1.0;
    for (int v = 0; v < 3; ++v) scale *= jet_detail::factorial(ax[v]) * jet_detail::factorial(ay[v]);
    return coefficient(ax, ay) * scale;
  }

  /// First derivative along dx_i at the expansion point.
  double d_x(int i) const {
    if constexpr (DX >= 1) return c_[static_cast<std::size_t>(1 + i) * kNy];
    return 0.0;
  }

  /// First derivative along dy_i at the expansion point.
  double d_y(int i) const {
    if constexpr (DY >= 1) return c_[static_cast<std::size_t>(1 + i)];
    return 0.0;
  }

  Jet<(DX > 0 ? DX - 1 : 0), DY> dx(int v) const requires(DX >= 1) {
    Jet<DX - 1, DY> r;
    const auto& tab = jet_detail::derivatives<DX>;
    for (int i = 0; i < Jet<DX - 1, DY>::kNx; ++i) {
      const double f = tab.factor[v][i];
      const double* src = &c_[static_cast<std::size_t>(tab.source[v][i]) * kNy];
      double* dst = &r.data()[static_cast<std::size_t>(i) * kNy];
      for (int j = 0; j < kNy; ++j) dst[j] = f * src[j];
    }
    return r;
  }

  Jet<DX, (DY > 0 ? DY - 1 : 0)> dy(int v) const requires(DY >= 1) {
    using R = Jet<DX, DY - 1>;
    R r;
    const auto& tab = jet_detail::derivatives<DY>;
    for (int i = 0; i < kNx; ++i) {
      const double* src = &c_[static_cast<std::size_t>(i) * kNy];
      double* dst = &r.data()[static_cast<std::size_t>(i) * R::kNy];
      for (int j = 0; j < R::kNy; ++j) dst[j] = tab.factor[v][j] * src[tab.source[v][j]];
    }
    return r;
  }

  template <int A, int B>
  Jet<A, B> truncate() const requires(A <= DX && B <= DY) {
    using R = Jet<A, B>;
    R r;
    for (int i = 0; i < R::kNx; ++i) {
      for (int j = 0; j < R::kNy; ++j) {
        r.data()[static_cast<std::size_t>(i) * R::kNy + j] = c_[static_cast<std::size_t>(i) * kNy + j];
      }
    }
    return r;
  }

  /// Embeds a position-only jet into a jet with direction bound B.
  template <int B>
  Jet<DX, B> extend_y() const requires(DY == 0) {
    using R = Jet<DX, B>;
    R r;
    for (int i = 0; i < kNx; ++i) r.data()[static_cast<std::size_t>(i) * R::kNy] = c_[static_cast<std::size_t>(i)];
    return r;
  }

  /// (y0 + dy_v) * this, without a full product.
  Jet times_direction(int v, double y0) const {
    Jet r;
    const auto& sh = jet_detail::shifts<DY>.shift[v];
    for (int i = 0; i < kNx; ++i) {
      const double* src = &c_[static_cast<std::size_t>(i) * kNy];
      double* dst = &r.c_[static_cast<std::size_t>(i) * kNy];
      for (int j = 0; j < kNy; ++j) {
        dst[j] += y0 * src[j];
        if (sh[j] >= 0) dst[sh[j]] += src[j];
      }
    }
    return r;
  }

  std::array<double, kSize>& data() { return c_; }
  const std::array<double, kSize>& data() const { return c_; }

  Jet& operator+=(const Jet& o) {
    for (int i = 0; i < kSize; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int i = 0; i < kSize; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    *this = *this * o;
    return *this;
  }
  Jet& operator/=(const Jet& o) {
    *this = *this / o;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a -= s; }
  friend Jet operator-(double s, const Jet& a) { return -a + s; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, double s) { return a *= (1.0 / s); }
  friend Jet operator-(Jet a) {
    for (double& v : a.c_) v = -v;
    return a;
  }

  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    std::array<bool, kNx> rows_a{};
    std::array<bool, kNx> rows_b{};
    for (int i = 0; i < kNx; ++i) {
      for (int j = 0; j < kNy; ++j) {
        rows_a[i] = rows_a[i] || a.c_[static_cast<std::size_t>(i) * kNy + j] != 0.0;
        rows_b[i] = rows_b[i] || b.c_[static_cast<std::size_t>(i) * kNy + j] != 0.0;
      }
    }
    const auto& tx = jet_detail::products<DX>.t;
    const auto& ty = jet_detail::products<DY>.t;
    for (const auto& px : tx) {
      if (!rows_a[px.a] || !rows_b[px.b]) continue;
      const double* pa = &a.c_[static_cast<std::size_t>(px.a) * kNy];
      const double* pb = &b.c_[static_cast<std::size_t>(px.b) * kNy];
      double* pc = &r.c_[static_cast<std::size_t>(px.c) * kNy];
      for (const auto& py : ty) pc[py.c] += pa[py.a] * pb[py.b];
    }
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
  friend Jet operator/(double s, const Jet& b) { return reciprocal(b) * s; }

  /// f(u) from the derivatives f^(k)(u0), k = 0..DX+DY.
  template <class Derivs>
  friend Jet compose(const Jet& u, const Derivs& d) {
    constexpr int K = DX + DY;
    Jet h = u;
    h.c_[0] = 0.0;
    Jet r(d[K] / jet_detail::factorial(K));
    for (int k = K - 1; k >= 0; --k) {
      r = r * h;
      r.c_[0] += d[k] / jet_detail::factorial(k);
    }
    return r;
  }

  friend Jet reciprocal(const Jet& u) {
    constexpr int K = DX + DY;
    std::array<double, K + 1> d{};
    const double inv = 1.0 / u.value();
    double p = inv;
    for (int k = 0; k <= K; ++k) {
      d[k] = ((k % 2 == 0) ? 1.0 : -1.0) * jet_detail::factorial(k) * p;
      p *= inv;
    }
    return compose(u, d);
  }

  friend Jet pow(const Jet& u, double e) {
    constexpr int K = DX + DY;
    std::array<double, K + 1> d{};
    const double u0 = u.value();
    double coef = 1.0;
    for (int k = 0; k <= K; ++k) {
      d[k] = coef * std::pow(u0, e - k);
      coef *= (e - k);
    }
    return compose(u, d);
  }

  friend Jet sqrt(const Jet& u) { return pow(u, 0.5); }

  friend Jet exp(const Jet& u) {
    constexpr int K = DX + DY;
    std::array<double, K + 1> d{};
    d.fill(std::exp(u.value()));
    return compose(u, d);
  }

  friend Jet log(const Jet& u) {
    constexpr int K = DX + DY;
    std::array<double, K + 1> d{};
    const double u0 = u.value();
    d[0] = std::log(u0);
    double p = 1.0 / u0;
    for (int k = 1; k <= K; ++k) {
      d[k] = ((k % 2 == 1) ? 1.0 : -1.0) * jet_detail::factorial(k - 1) * p;
      p /= u0;
    }
    return compose(u, d);
  }

  friend Jet sin(const Jet& u) {
    constexpr int K = DX + DY;
    std::array<double, K + 1> d{};
    const double s = std::sin(u.value());
    const double c = std::cos(u.value());
    const double cyc[4] = {s, c, -s, -c};
    for (int k = 0; k <= K; ++k) d[k] = cyc[k % 4];
    return compose(u, d);
  }

  friend Jet cos(const Jet& u) {
    constexpr int K = DX + DY;
    std::array<double, K + 1> d{};
    const double s = std::sin(u.value());
    const double c = std::cos(u.value());
    const double cyc[4] = {c, -s, -c, s};
    for (int k = 0; k <= K; ++k) d[k] = cyc[k % 4];
    return compose(u, d);
  }

 private:
  std::array<double, kSize> c_;
};

inline double value_of(double v) { return v; }
template <int DX, int DY>
double value_of(const Jet<DX, DY>& j) {
  return j.value();
}

}  // namespace finsler
