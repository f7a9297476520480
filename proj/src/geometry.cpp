#include "finsler/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "finsler/error.hpp"
#include "kernel_jets.hpp"

namespace finsler {

using kernel::JetMat;
using kernel::JetVec;

double det3(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

Mat3 inverse3(const Mat3& m) {
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a(i, j) = m[i][j];
  }
  const Eigen::Matrix3d inv = a.inverse();
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r[i][j] = inv(i, j);
  }
  return r;
}

double min_eigenvalue(const Mat3& m) {
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a(i, j) = 0.5 * (m[i][j] + m[j][i]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Frame orthonormal_frame(const Mat3& g, const Mat3& basis) {
  auto dot = [&](const Vec3& u, const Vec3& v) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) s += g[i][j] * u[i] * v[j];
    }
    return s;
  };
  Frame f;
  for (int a = 0; a < 3; ++a) {
    Vec3 v = basis[a];
    for (int b = 0; b < a; ++b) {
      const double p = dot(v, f.e[b]);
      for (int i = 0; i < 3; ++i) v[i] -= p * f.e[b][i];
    }
    const double n = std::sqrt(dot(v, v));
    if (!(n > 0.0)) fail(ErrorKind::DegenerateMetric, "frame construction met a null vector");
    for (int i = 0; i < 3; ++i) f.e[a][i] = v[i] / n;
  }
  return f;
}

Frame orthonormal_frame(const Mat3& g) {
  const Mat3 id{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};
  return orthonormal_frame(g, id);
}

// r(e_a, e_b) = sum_c R(e_a, e_c, e_b, e_c) with R_mjkl lowered on the first index.
Mat3 ricci_in_frame(const Tensor4& R, const Frame& frame) {
  const Mat3& e = frame.e;
  Mat3 r{};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        for (int m = 0; m < 3; ++m) {
          for (int j = 0; j < 3; ++j) {
            for (int k = 0; k < 3; ++k) {
              for (int l = 0; l < 3; ++l) s += R[m][j][k][l] * e[a][m] * e[c][j] * e[b][k] * e[c][l];
            }
          }
        }
      }
      r[a][b] = s;
    }
  }
  return r;
}

double scalar_in_frame(const Tensor4& R, const Frame& frame) {
  const Mat3 r = ricci_in_frame(R, frame);
  return r[0][0] + r[1][1] + r[2][2];
}

namespace {

void fill_metric_values(GeometryAtPoint& p, const Mat3& g, const NumericPolicy& policy) {
  p.g = g;
  const double lmin = min_eigenvalue(g);
  if (!(lmin > policy.eigenvalue_floor)) {
    std::ostringstream os;
    os << "fundamental tensor has smallest eigenvalue " << lmin << " at x = (" << p.x[0] << ", " << p.x[1]
       << ", " << p.x[2] << "), y = (" << p.y[0] << ", " << p.y[1] << ", " << p.y[2] << ")";
    fail(ErrorKind::DegenerateMetric, os.str());
  }
  p.g_inv = inverse3(g);
  p.det_g = det3(g);
}

template <int A, int B>
void fill_cartan(GeometryAtPoint& p, const JetMat<A, B>& g) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) p.cartan[i][j][k] = 0.5 * p.F * g[i][j].d_y(k);
    }
  }
}

// delta_k g_jl = d_k g_jl - N^m_k d_{y^m} g_jl, then the Christoffel-type formula.
template <int A, int B>
Tensor3 second_route(const GeometryAtPoint& p, const JetMat<A, B>& g) {
  std::array<Mat3, 3> dg{};  // dg[k][j][l]
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 3; ++j) {
      for (int l = 0; l < 3; ++l) {
        double v = g[j][l].d_x(k);
        for (int m = 0; m < 3; ++m) v -= p.N[m][k] * g[j][l].d_y(m);
        dg[k][j][l] = v;
      }
    }
  }
  Tensor3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        double s = 0.0;
        for (int l = 0; l < 3; ++l) s += p.g_inv[i][l] * (dg[k][j][l] + dg[j][l][k] - dg[l][j][k]);
        r[i][j][k] = 0.5 * s;
      }
    }
  }
  return r;
}

double max_abs(const Tensor3& t) {
  double m = 0.0;
  for (const auto& a : t) {
    for (const auto& b : a) {
      for (double v : b) m = std::max(m, std::abs(v));
    }
  }
  return m;
}

void check_routes(const Tensor3& a, const Tensor3& b, double& discrepancy, const NumericPolicy& policy) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) d = std::max(d, std::abs(a[i][j][k] - b[i][j][k]));
    }
  }
  discrepancy = d;
  if (!policy.check_chern_formulas) return;
  const double scale = std::max({max_abs(a), max_abs(b), 1e-7});
  if (d > policy.chern_formula_rtol * scale) {
    std::ostringstream os;
    os << "connection coefficient routes disagree by " << d << " (scale " << scale << ")";
    fail(ErrorKind::FormulaMismatch, os.str());
  }
}

// Fills spray, N, Gamma from g carried with at least one x- and two y-orders.
template <int A, int B>
JetVec<A - 1, B> fill_connection(GeometryAtPoint& p, const JetMat<A, B>& g, const NumericPolicy& policy,
                                 double& discrepancy, Tensor3* other = nullptr) {
  const JetVec<A - 1, B> G = kernel::spray_jets(g, p.y);
  for (int i = 0; i < 3; ++i) {
    p.spray[i] = G[i].value();
    for (int j = 0; j < 3; ++j) {
      p.N[i][j] = G[i].d_y(j);
      for (int k = 0; k < 3; ++k) {
        std::array<int, 3> ay{0, 0, 0};
        ay[j] += 1;
        ay[k] += 1;
        p.gamma[i][j][k] = G[i].partial({0, 0, 0}, ay);
      }
    }
  }
  const Tensor3 b = second_route(p, g);
  if (other) *other = b;
  check_routes(p.gamma, b, discrepancy, policy);
  return G;
}

void lower_curvature(GeometryAtPoint& p) {
  for (int m = 0; m < 3; ++m) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        for (int l = 0; l < 3; ++l) {
          double s = 0.0;
          for (int i = 0; i < 3; ++i) s += p.g[m][i] * p.curv_R[i][j][k][l];
          p.curv_low[m][j][k][l] = s;
        }
      }
    }
  }
  p.frame = orthonormal_frame(p.g);
  p.ricci = ricci_in_frame(p.curv_low, p.frame);
  p.scalar_S = p.ricci[0][0] + p.ricci[1][1] + p.ricci[2][2];
}

// R^i_jkl from horizontal derivatives dG[k][i][j][l] = delta_k Gamma^i_jl.
void assemble_curvature(GeometryAtPoint& p, const Tensor4& dG) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        for (int l = 0; l < 3; ++l) {
          double s = dG[k][i][j][l] - dG[l][i][j][k];
          for (int m = 0; m < 3; ++m) {
            s += p.gamma[i][m][k] * p.gamma[m][j][l] - p.gamma[i][m][l] * p.gamma[m][j][k];
          }
          p.curv_R[i][j][k][l] = s;
        }
      }
    }
  }
  lower_curvature(p);
}

Tensor3 connection_at(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  GeometryAtPoint q;
  q.x = x;
  q.y = y;
  const JetMat<1, 2> g = kernel::metric_jets<1, 2>(spec, x, y, q.F);
  fill_metric_values(q, kernel::values(g), policy);
  double d = 0.0;
  fill_connection(q, g, policy, d);
  return q.gamma;
}

// d_k Gamma by Richardson-extrapolated central differences.
Tensor4 gamma_x_derivatives(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  const double h = policy.fd_step;
  Tensor4 d{};
  for (int k = 0; k < 3; ++k) {
    auto central = [&](double step) {
      Vec3 xp = x;
      Vec3 xm = x;
      xp[k] += step;
      xm[k] -= step;
      const Tensor3 gp = connection_at(spec, xp, y, policy);
      const Tensor3 gm = connection_at(spec, xm, y, policy);
      Tensor3 r{};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          for (int l = 0; l < 3; ++l) r[i][j][l] = (gp[i][j][l] - gm[i][j][l]) / (2.0 * step);
        }
      }
      return r;
    };
    const Tensor3 coarse = central(h);
    const Tensor3 fine = central(0.5 * h);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int l = 0; l < 3; ++l) d[k][i][j][l] = (4.0 * fine[i][j][l] - coarse[i][j][l]) / 3.0;
      }
    }
  }
  return d;
}

void compute_curvature_fd(GeometryAtPoint& p, const MetricSpec& spec, const NumericPolicy& policy) {
  const JetMat<1, 3> g = kernel::metric_jets<1, 3>(spec, p.x, p.y, p.F);
  fill_metric_values(p, kernel::values(g), policy);
  fill_cartan(p, g);
  double d = 0.0;
  const JetVec<0, 3> G = fill_connection(p, g, policy, d);
  const Tensor4 dx = gamma_x_derivatives(spec, p.x, p.y, policy);
  Tensor4 dG{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int l = 0; l < 3; ++l) {
        const Jet<0, 1> gam = G[i].dy(j).dy(l);
        for (int k = 0; k < 3; ++k) {
          double v = dx[k][i][j][l];
          for (int m = 0; m < 3; ++m) v -= p.N[m][k] * gam.d_y(m);
          dG[k][i][j][l] = v;
        }
      }
    }
  }
  assemble_curvature(p, dG);
}

}  // namespace

GeometryAtPoint compute_geometry(const MetricSpec& spec, const Vec3& x, const Vec3& y, GeometryLevel level,
                                 const NumericPolicy& policy) {
  require_direction(y, policy);
  require_convex(spec, x);
  GeometryAtPoint p;
  p.x = x;
  p.y = y;
  p.level = level;
  const bool needs_x = level == GeometryLevel::Connection || level == GeometryLevel::Curvature;
  if (needs_x && spec.x_derivative_order() < 1) {
    fail(ErrorKind::DerivativeUnavailable, "the metric spec provides no x-derivatives");
  }
  double discrepancy = 0.0;
  switch (level) {
    case GeometryLevel::Metric: {
      const JetMat<0, 0> g = kernel::metric_jets<0, 0>(spec, x, y, p.F);
      fill_metric_values(p, kernel::values(g), policy);
      break;
    }
    case GeometryLevel::Cartan: {
      const JetMat<0, 1> g = kernel::metric_jets<0, 1>(spec, x, y, p.F);
      fill_metric_values(p, kernel::values(g), policy);
      fill_cartan(p, g);
      break;
    }
    case GeometryLevel::Connection: {
      const JetMat<1, 2> g = kernel::metric_jets<1, 2>(spec, x, y, p.F);
      fill_metric_values(p, kernel::values(g), policy);
      fill_cartan(p, g);
      fill_connection(p, g, policy, discrepancy);
      break;
    }
    case GeometryLevel::Curvature: {
      if (spec.x_derivative_order() < 2) {
        compute_curvature_fd(p, spec, policy);
        break;
      }
      const JetMat<2, 3> g = kernel::metric_jets<2, 3>(spec, x, y, p.F);
      fill_metric_values(p, kernel::values(g), policy);
      fill_cartan(p, g);
      const JetVec<1, 3> G = fill_connection(p, g, policy, discrepancy);
      Tensor4 dG{};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const Jet<1, 2> Gj = G[i].dy(j);
          for (int l = j; l < 3; ++l) {
            const Jet<1, 1> gam = Gj.dy(l);
            for (int k = 0; k < 3; ++k) {
              double v = gam.d_x(k);
              for (int m = 0; m < 3; ++m) v -= p.N[m][k] * gam.d_y(m);
              dG[k][i][j][l] = v;
              dG[k][i][l][j] = v;
            }
          }
        }
      }
      assemble_curvature(p, dG);
      break;
    }
  }
  return p;
}

namespace kernel {

GeometryAtPoint connection_with_jets(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                                     const NumericPolicy& policy, JetMat<1, 2>& g) {
  require_direction(y, policy);
  require_convex(spec, x);
  if (spec.x_derivative_order() < 1) {
    fail(ErrorKind::DerivativeUnavailable, "the metric spec provides no x-derivatives");
  }
  GeometryAtPoint p;
  p.x = x;
  p.y = y;
  p.level = GeometryLevel::Connection;
  g = metric_jets<1, 2>(spec, x, y, p.F);
  fill_metric_values(p, values(g), policy);
  fill_cartan(p, g);
  double d = 0.0;
  fill_connection(p, g, policy, d);
  return p;
}

GeometryAtPoint connection_with_spray_jets(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                                           const NumericPolicy& policy, JetMat<2, 2>& g, JetVec<1, 2>& G) {
  require_direction(y, policy);
  require_convex(spec, x);
  if (spec.x_derivative_order() < 2) {
    fail(ErrorKind::DerivativeUnavailable, "the metric spec provides fewer than two x-derivatives");
  }
  GeometryAtPoint p;
  p.x = x;
  p.y = y;
  p.level = GeometryLevel::Connection;
  g = metric_jets<2, 2>(spec, x, y, p.F);
  fill_metric_values(p, values(g), policy);
  fill_cartan(p, g);
  double d = 0.0;
  G = fill_connection(p, g, policy, d);
  return p;
}

}  // namespace kernel

Mat3 fundamental_tensor(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return compute_geometry(spec, x, y, GeometryLevel::Metric, policy).g;
}

Tensor3 cartan_tensor(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return compute_geometry(spec, x, y, GeometryLevel::Cartan, policy).cartan;
}

Vec3 spray_coefficients(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return compute_geometry(spec, x, y, GeometryLevel::Connection, policy).spray;
}

Mat3 nonlinear_connection(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return compute_geometry(spec, x, y, GeometryLevel::Connection, policy).N;
}

ChernCoefficients chern_coefficients(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                                     const NumericPolicy& policy) {
  require_direction(y, policy);
  require_convex(spec, x);
  if (spec.x_derivative_order() < 1) {
    fail(ErrorKind::DerivativeUnavailable, "the metric spec provides no x-derivatives");
  }
  GeometryAtPoint p;
  p.x = x;
  p.y = y;
  const JetMat<1, 2> g = kernel::metric_jets<1, 2>(spec, x, y, p.F);
  fill_metric_values(p, kernel::values(g), policy);
  ChernCoefficients c;
  fill_connection(p, g, policy, c.max_discrepancy, &c.second_route);
  c.gamma = p.gamma;
  return c;
}

Tensor4 hh_curvature(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return compute_geometry(spec, x, y, GeometryLevel::Curvature, policy).curv_R;
}

Mat3 ricci(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return compute_geometry(spec, x, y, GeometryLevel::Curvature, policy).ricci;
}

double scalar_curvature(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy) {
  return compute_geometry(spec, x, y, GeometryLevel::Curvature, policy).scalar_S;
}

}  // namespace finsler
