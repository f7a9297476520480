#pragma once

#include <array>

#include "finsler/metric.hpp"
#include "finsler/numeric_policy.hpp"

namespace finsler {

using Tensor3 = std::array<Mat3, 3>;     // t[i][j][k]
using Tensor4 = std::array<Tensor3, 3>;  // t[i][j][k][l]

/// Rows e[a] are g-orthonormal vectors in coordinate components.
struct Frame {
  Mat3 e{};
};

enum class GeometryLevel { Metric, Cartan, Connection, Curvature };

/// Everything the kernel knows at one (x, y). Fields above the requested
/// level are left zero.
struct GeometryAtPoint {
  Vec3 x{};
  Vec3 y{};
  GeometryLevel level = GeometryLevel::Metric;
  double F = 0.0;
  Mat3 g{};
  Mat3 g_inv{};
  double det_g = 0.0;
  Tensor3 cartan{};   // A_ijk
  Vec3 spray{};       // G^i
  Mat3 N{};           // N^i_j
  Tensor3 gamma{};    // Gamma^i_jk
  Tensor4 curv_R{};   // R^i_jkl
  Tensor4 curv_low{}; // R_ijkl = g_im R^m_jkl
  Frame frame{};
  Mat3 ricci{};       // frame components
  double scalar_S = 0.0;
};

GeometryAtPoint compute_geometry(const MetricSpec& spec, const Vec3& x, const Vec3& y, GeometryLevel level,
                                 const NumericPolicy& policy = default_policy());

Mat3 fundamental_tensor(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                        const NumericPolicy& policy = default_policy());
Tensor3 cartan_tensor(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                      const NumericPolicy& policy = default_policy());
Vec3 spray_coefficients(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                        const NumericPolicy& policy = default_policy());
Mat3 nonlinear_connection(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                          const NumericPolicy& policy = default_policy());

/// Both coefficient routes; `second_route` is the delta-derivative formula.
struct ChernCoefficients {
  Tensor3 gamma{};
  Tensor3 second_route{};
  double max_discrepancy = 0.0;
};

ChernCoefficients chern_coefficients(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                                     const NumericPolicy& policy = default_policy());
Tensor4 hh_curvature(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                     const NumericPolicy& policy = default_policy());
Mat3 ricci(const MetricSpec& spec, const Vec3& x, const Vec3& y, const NumericPolicy& policy = default_policy());
double scalar_curvature(const MetricSpec& spec, const Vec3& x, const Vec3& y,
                        const NumericPolicy& policy = default_policy());

/// Gram-Schmidt in g applied to the rows of `basis`, in row order.
Frame orthonormal_frame(const Mat3& g, const Mat3& basis);
Frame orthonormal_frame(const Mat3& g);

/// Ricci components r(e_a, e_b) of a lowered curvature tensor in a frame.
Mat3 ricci_in_frame(const Tensor4& curv_low, const Frame& frame);
double scalar_in_frame(const Tensor4& curv_low, const Frame& frame);

/// Smallest eigenvalue of a symmetric 3x3 matrix.
double min_eigenvalue(const Mat3& m);
Mat3 inverse3(const Mat3& m);
double det3(const Mat3& m);

}  // namespace finsler
