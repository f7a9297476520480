#include "finsler/mesh.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "finsler/conformal.hpp"
#include "finsler/error.hpp"
#include "finsler/geometry.hpp"

namespace finsler {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

std::atomic<std::uint64_t> next_mesh_id{1};

Vec3 normalized(const Vec3& v) {
  const double r = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / r, v[1] / r, v[2] / r};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 bc{b[1] * c[2] - b[2] * c[1], b[2] * c[0] - b[0] * c[2], b[0] * c[1] - b[1] * c[0]};
  const double num = std::abs(dot(a, bc));
  const double den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
  return 2.0 * std::atan2(num, den);
}

void normalize_weights(std::vector<double>& w) {
  const double s = compensated_sum(w);
  for (double& v : w) v *= kFourPi / s;
}

}  // namespace

DirectionSet icosphere(int level) {
  if (level < 0 || level > 6) fail(ErrorKind::RequestRejected, "icosphere level must be in 0..6");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p = normalized(p);
  std::vector<std::array<int, 3>> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                           {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                           {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                           {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < level; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const Vec3& p = v[static_cast<std::size_t>(a)];
      const Vec3& q = v[static_cast<std::size_t>(b)];
      v.push_back(normalized({p[0] + q[0], p[1] + q[1], p[2] + q[2]}));
      const int idx = static_cast<int>(v.size()) - 1;
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int a = midpoint(f[0], f[1]);
      const int b = midpoint(f[1], f[2]);
      const int c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    faces = std::move(next);
  }
  DirectionSet out;
  out.directions = v;
  out.weights.assign(v.size(), 0.0);
  for (const auto& f : faces) {
    const double area = spherical_triangle_area(v[static_cast<std::size_t>(f[0])], v[static_cast<std::size_t>(f[1])],
                                                v[static_cast<std::size_t>(f[2])]);
    for (int k : f) out.weights[static_cast<std::size_t>(k)] += area / 3.0;
  }
  normalize_weights(out.weights);
  out.rule = "icosphere(" + std::to_string(level) + ")";
  return out;
}

DirectionSet product_grid(int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) fail(ErrorKind::RequestRejected, "product grid needs positive counts");
  std::vector<double> nodes(static_cast<std::size_t>(n_theta)), w(static_cast<std::size_t>(n_theta));
  for (int i = 0; i < n_theta; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n_theta + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n_theta; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n_theta == 1) {
        p1 = z;
        p0 = 1.0;
      }
      dp = n_theta * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[static_cast<std::size_t>(i)] = z;
    w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  DirectionSet out;
  for (int i = 0; i < n_theta; ++i) {
    const double z = nodes[static_cast<std::size_t>(i)];
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n_phi; ++j) {
      const double ph = 2.0 * std::numbers::pi * (j + 0.5) / n_phi;
      out.directions.push_back({s * std::cos(ph), s * std::sin(ph), z});
      out.weights.push_back(w[static_cast<std::size_t>(i)] * 2.0 * std::numbers::pi / n_phi);
    }
  }
  normalize_weights(out.weights);
  out.rule = "product(" + std::to_string(n_theta) + "x" + std::to_string(n_phi) + ")";
  return out;
}

DirectionSet single_direction(const Vec3& y) {
  const double r = std::sqrt(dot(y, y));
  if (!(r > 0.0)) fail(ErrorKind::ZeroDirection, "frozen direction must be nonzero");
  DirectionSet out;
  out.directions = {normalized(y)};
  out.weights = {kFourPi};
  std::ostringstream os;
  os.precision(6);
  os << "single(" << out.directions[0][0] << "," << out.directions[0][1] << "," << out.directions[0][2] << ")";
  out.rule = os.str();
  return out;
}

DirectionSet DirectionRule::build() const {
  switch (kind) {
    case Kind::Icosphere:
      return icosphere(level);
    case Kind::ProductGrid:
      return product_grid(n_theta, n_phi);
    case Kind::Single:
      return single_direction(direction);
  }
  return icosphere(level);
}

std::size_t SphereBundleMesh::grid_index(int i0, int i1, int i2) const {
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  return (static_cast<std::size_t>(wrap(i0, n_[0])) * n_[1] + wrap(i1, n_[1])) * n_[2] + wrap(i2, n_[2]);
}

std::array<int, 3> SphereBundleMesh::grid_coords(std::size_t g) const {
  const int i2 = static_cast<int>(g % n_[2]);
  const std::size_t r = g / n_[2];
  return {static_cast<int>(r / n_[1]), static_cast<int>(r % n_[1]), i2};
}

Vec3 SphereBundleMesh::position(std::size_t g) const {
  const std::array<int, 3> c = grid_coords(g);
  Vec3 x{};
  for (int k = 0; k < 3; ++k) x[k] = chart_.periods[k] * c[k] / n_[k];
  return x;
}

void SphereBundleMesh::finalize() {
  const std::size_t nd = direction_count();
  const double cv = cell_volume();
  weight_.resize(density_.size());
  direction_uniform_ = true;
  for (std::size_t n = 0; n < density_.size(); ++n) {
    if (!(density_[n] > 0.0) || !std::isfinite(density_[n])) {
      fail(ErrorKind::DegenerateMetric, "mesh density must be positive at node " + std::to_string(n));
    }
    weight_[n] = density_[n] * cv * dirs_.weights[n % nd];
    if (n % nd != 0 && density_[n] != density_[n - n % nd]) direction_uniform_ = false;
  }
  total_volume_ = compensated_sum(weight_);
  id_ = next_mesh_id.fetch_add(1);
}

SphereBundleMesh SphereBundleMesh::from_parts(const PeriodicChart3& chart, const std::array<int, 3>& n,
                                              DirectionSet dirs, std::vector<double> density) {
  SphereBundleMesh m;
  m.chart_ = chart;
  m.n_ = n;
  m.dirs_ = std::move(dirs);
  m.density_ = std::move(density);
  if (m.density_.size() != m.node_count()) fail(ErrorKind::MeshMismatch, "density count does not match the mesh");
  m.finalize();
  return m;
}

SphereBundleMesh build_mesh(const MetricSpec& spec, const std::array<int, 3>& resolution, const DirectionRule& rule,
                            const NumericPolicy& policy) {
  return build_mesh(spec, resolution, rule.build(), policy);
}

SphereBundleMesh build_mesh(const MetricSpec& spec, const std::array<int, 3>& resolution, DirectionSet dirs,
                            const NumericPolicy& policy) {
  for (int n : resolution) {
    if (n < 4) fail(ErrorKind::RequestRejected, "mesh resolution must be at least 4 per axis");
  }
  SphereBundleMesh m;
  m.chart_ = spec.chart();
  m.n_ = resolution;
  m.dirs_ = std::move(dirs);
  m.density_ = map_nodes(m, spec.direction_dependent(),
                         [&](const Vec3& x, const Vec3& y) { return volume_density(spec, x, y, policy); });
  m.finalize();
  return m;
}

SphereBundleMesh rebuild_mesh(const MetricSpec& spec, const SphereBundleMesh& like, const NumericPolicy& policy) {
  const Vec3& a = spec.chart().periods;
  const Vec3& b = like.chart().periods;
  if (a != b) fail(ErrorKind::MeshMismatch, "chart periods differ from the template mesh");
  return build_mesh(spec, like.resolution(), like.directions(), policy);
}

SampledField::SampledField(const SphereBundleMesh& mesh, std::vector<double> values, FieldOrigin origin)
    : values_(std::move(values)), mesh_id_(mesh.id()), origin_(origin) {
  if (values_.size() != mesh.node_count()) fail(ErrorKind::MeshMismatch, "value count does not match the mesh");
}

SampledField SampledField::constant(const SphereBundleMesh& mesh, double c) {
  return SampledField(mesh, std::vector<double>(mesh.node_count(), c));
}

bool SampledField::constant_columns(const SphereBundleMesh& mesh) const {
  const std::size_t nd = mesh.direction_count();
  for (std::size_t n = 0; n < values_.size(); ++n) {
    if (n % nd != 0 && values_[n] != values_[n - n % nd]) return false;
  }
  return true;
}

void require_same_mesh(const SampledField& f, const SphereBundleMesh& mesh) {
  if (f.mesh_id() != mesh.id() || f.size() != mesh.node_count()) {
    fail(ErrorKind::MeshMismatch, "field was sampled on a different mesh");
  }
}

SampledField sample(const ScalarField& u, const SphereBundleMesh& mesh) {
  return SampledField(mesh, map_nodes(mesh, !u.direction_independent(), [&](const Vec3& x, const Vec3& y) { return u(x, y); }),
                      FieldOrigin::ClosedForm);
}

double compensated_sum(const std::vector<double>& terms) {
  double s = 0.0, c = 0.0;
  for (double t : terms) {
    const double u = s + t;
    if (std::abs(s) >= std::abs(t)) {
      c += (s - u) + t;
    } else {
      c += (t - u) + s;
    }
    s = u;
  }
  return s + c;
}

double integrate(const SampledField& f, const SphereBundleMesh& mesh) {
  require_same_mesh(f, mesh);
  const std::vector<double>& w = mesh.quadrature_weights();
  std::vector<double> t(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) t[n] = f[n] * w[n];
  return compensated_sum(t);
}

QuadratureEstimate integrate_with_estimate(const SampledField& f, const SphereBundleMesh& mesh) {
  QuadratureEstimate q;
  q.value = integrate(f, mesh);
  const auto& n = mesh.resolution();
  if (n[0] % 2 || n[1] % 2 || n[2] % 2) return q;
  const std::vector<double>& w = mesh.quadrature_weights();
  const std::size_t nd = mesh.direction_count();
  std::vector<double> t;
  t.reserve(w.size() / 8);
  for (std::size_t g = 0; g < mesh.grid_count(); ++g) {
    const auto c = mesh.grid_coords(g);
    if (c[0] % 2 || c[1] % 2 || c[2] % 2) continue;
    for (std::size_t d = 0; d < nd; ++d) {
      const std::size_t k = mesh.node(g, d);
      t.push_back(8.0 * f[k] * w[k]);
    }
  }
  q.error = std::abs(q.value - compensated_sum(t));
  return q;
}

std::string_view to_string(SobolevForm form) {
  return form == SobolevForm::SumOfNorms ? "sum-of-norms" : "energy";
}

namespace {

void check_sobolev_request(int k, double p) {
  if (k < 0 || k > 2) fail(ErrorKind::UnsupportedOrder, "Sobolev norms are available for k <= 2");
  if (!(p >= 1.0)) fail(ErrorKind::RequestRejected, "Sobolev exponent must satisfy p >= 1");
}

double combine_sobolev(const std::array<double, 3>& integrals, int k, double p, SobolevForm form) {
  if (form == SobolevForm::SumOfNorms) {
    double s = 0.0;
    for (int i = 0; i <= k; ++i) s += std::pow(integrals[static_cast<std::size_t>(i)], 1.0 / p);
    return s;
  }
  double s = 0.0;
  for (int i = 0; i <= k; ++i) s += integrals[static_cast<std::size_t>(i)];
  return std::pow(s, 1.0 / p);
}

// |t|^p from a squared norm.
double power_of_norm(double norm_sq, double p) { return std::pow(std::max(norm_sq, 0.0), p / 2.0); }

}  // namespace

double sobolev_norm(const ScalarField& f, const SphereBundleMesh& mesh, const MetricSpec& spec, int k, double p,
                    SobolevForm form, const NumericPolicy& policy) {
  check_sobolev_request(k, p);
  const bool per_dir = spec.direction_dependent() || !f.direction_independent();
  std::array<double, 3> integrals{};
  for (int i = 0; i <= k; ++i) {
    std::vector<double> v = map_nodes(mesh, per_dir, [&](const Vec3& x, const Vec3& y) {
      if (i == 0) return std::pow(std::abs(f(x, y)), p);
      return power_of_norm(covariant_derivative(f, spec, x, y, i, policy).norm_sq, p);
    });
    integrals[static_cast<std::size_t>(i)] = integrate(SampledField(mesh, std::move(v)), mesh);
  }
  return combine_sobolev(integrals, k, p, form);
}

double sobolev_norm(const SampledField& f, const SphereBundleMesh& mesh, const MetricSpec& spec, int k, double p,
                    SobolevForm form, const NumericPolicy& policy) {
  check_sobolev_request(k, p);
  require_same_mesh(f, mesh);
  std::array<double, 3> integrals{};
  std::vector<double> v(f.size());
  for (std::size_t n = 0; n < f.size(); ++n) v[n] = std::pow(std::abs(f[n]), p);
  integrals[0] = integrate(SampledField(mesh, std::move(v)), mesh);
  if (k >= 1) {
    const SampledCovariantNorms c = sampled_covariant_norms(f, mesh, spec, policy);
    std::vector<double> a(f.size()), b(f.size());
    for (std::size_t n = 0; n < f.size(); ++n) {
      a[n] = power_of_norm(c.first[n], p);
      b[n] = power_of_norm(c.second[n], p);
    }
    integrals[1] = integrate(SampledField(mesh, std::move(a)), mesh);
    integrals[2] = integrate(SampledField(mesh, std::move(b)), mesh);
  }
  return combine_sobolev(integrals, k, p, form);
}

Extrema field_extrema(const SampledField& f, const SphereBundleMesh& mesh) {
  require_same_mesh(f, mesh);
  Extrema e;
  if (f.size() == 0) return e;
  e.min = e.max = f[0];
  for (std::size_t n = 1; n < f.size(); ++n) {
    if (f[n] < e.min) {
      e.min = f[n];
      e.argmin = n;
    }
    if (f[n] > e.max) {
      e.max = f[n];
      e.argmax = n;
    }
  }
  return e;
}

namespace {

constexpr double kD1[5] = {1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
constexpr double kD2[5] = {-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};

std::array<int, 3> shifted(std::array<int, 3> c, int axis, int s) {
  c[static_cast<std::size_t>(axis)] += s;
  return c;
}

double at(const SampledField& f, const SphereBundleMesh& mesh, const std::array<int, 3>& c, std::size_t d) {
  return f[mesh.node(mesh.grid_index(c[0], c[1], c[2]), d)];
}

}  // namespace

std::vector<Vec3> stencil_gradient(const SampledField& f, const SphereBundleMesh& mesh) {
  require_same_mesh(f, mesh);
  std::vector<Vec3> out(f.size());
  const std::size_t nd = mesh.direction_count();
  parallel_for(mesh.grid_count(), [&](std::size_t g) {
    const auto c = mesh.grid_coords(g);
    for (std::size_t d = 0; d < nd; ++d) {
      Vec3 r{};
      for (int a = 0; a < 3; ++a) {
        double s = 0.0;
        for (int k = -2; k <= 2; ++k) s += kD1[k + 2] * at(f, mesh, shifted(c, a, k), d);
        r[a] = s / mesh.spacing(a);
      }
      out[mesh.node(g, d)] = r;
    }
  });
  return out;
}

std::vector<Mat3> stencil_hessian(const SampledField& f, const SphereBundleMesh& mesh) {
  require_same_mesh(f, mesh);
  std::vector<Mat3> out(f.size());
  const std::size_t nd = mesh.direction_count();
  parallel_for(mesh.grid_count(), [&](std::size_t g) {
    const auto c = mesh.grid_coords(g);
    for (std::size_t d = 0; d < nd; ++d) {
      Mat3 h{};
      for (int a = 0; a < 3; ++a) {
        double s = 0.0;
        for (int k = -2; k <= 2; ++k) s += kD2[k + 2] * at(f, mesh, shifted(c, a, k), d);
        h[a][a] = s / (mesh.spacing(a) * mesh.spacing(a));
        for (int b = a + 1; b < 3; ++b) {
          double m = 0.0;
          for (int k = -2; k <= 2; ++k) {
            if (k == 0) continue;
            for (int l = -2; l <= 2; ++l) {
              if (l == 0) continue;
              m += kD1[k + 2] * kD1[l + 2] * at(f, mesh, shifted(shifted(c, a, k), b, l), d);
            }
          }
          h[a][b] = h[b][a] = m / (mesh.spacing(a) * mesh.spacing(b));
        }
      }
      out[mesh.node(g, d)] = h;
    }
  });
  return out;
}

namespace {

struct NodeConnection {
  Mat3 g_inv{};
  Tensor3 gamma{};
  double n_max = 0.0;
};

// Connection data per node, computed once per lattice point when the spec is
// Riemannian.
std::vector<NodeConnection> node_connections(const SphereBundleMesh& mesh, const MetricSpec& spec,
                                             const NumericPolicy& policy) {
  const bool per_dir = spec.direction_dependent();
  const std::size_t nd = mesh.direction_count();
  std::vector<NodeConnection> out(mesh.node_count());
  parallel_for(mesh.grid_count(), [&](std::size_t g) {
    const Vec3 x = mesh.position(g);
    for (std::size_t d = 0; d < nd; ++d) {
      if (!per_dir && d > 0) {
        out[mesh.node(g, d)] = out[mesh.node(g, 0)];
        continue;
      }
      const GeometryAtPoint p = compute_geometry(spec, x, mesh.direction(d), GeometryLevel::Connection, policy);
      NodeConnection& c = out[mesh.node(g, d)];
      c.g_inv = p.g_inv;
      c.gamma = p.gamma;
      for (const auto& row : p.N)
        for (double v : row) c.n_max = std::max(c.n_max, std::abs(v));
    }
  });
  return out;
}

Mat3 covariant_hessian(const Mat3& h, const Vec3& du, const NodeConnection& c) {
  Mat3 r = h;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int m = 0; m < 3; ++m) r[i][j] -= c.gamma[m][i][j] * du[m];
  return r;
}

void require_horizontal_stencils(const SampledField& f, const SphereBundleMesh& mesh,
                                 const std::vector<NodeConnection>& conn) {
  if (f.constant_columns(mesh)) return;
  for (const NodeConnection& c : conn) {
    if (c.n_max > 1e-12) {
      fail(ErrorKind::DirectionJetsUnavailable,
           "direction-dependent sampled field on a spec with nonzero N needs direction stencils");
    }
  }
}

}  // namespace

SampledCovariantNorms sampled_covariant_norms(const SampledField& f, const SphereBundleMesh& mesh,
                                              const MetricSpec& spec, const NumericPolicy& policy) {
  const std::vector<Vec3> du = stencil_gradient(f, mesh);
  const std::vector<Mat3> ddu = stencil_hessian(f, mesh);
  const std::vector<NodeConnection> conn = node_connections(mesh, spec, policy);
  require_horizontal_stencils(f, mesh, conn);
  SampledCovariantNorms out;
  out.first.resize(f.size());
  out.second.resize(f.size());
  for (std::size_t n = 0; n < f.size(); ++n) {
    const Mat3& g = conn[n].g_inv;
    const Mat3 H = covariant_hessian(ddu[n], du[n], conn[n]);
    double a = 0.0, b = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        a += g[i][j] * du[n][i] * du[n][j];
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) b += g[i][k] * g[j][l] * H[i][j] * H[k][l];
      }
    }
    out.first[n] = a;
    out.second[n] = b;
  }
  return out;
}

SampledField sampled_horizontal_laplacian(const SampledField& f, const SphereBundleMesh& mesh,
                                          const MetricSpec& spec, const NumericPolicy& policy) {
  const std::vector<Vec3> du = stencil_gradient(f, mesh);
  const std::vector<Mat3> ddu = stencil_hessian(f, mesh);
  const std::vector<NodeConnection> conn = node_connections(mesh, spec, policy);
  require_horizontal_stencils(f, mesh, conn);
  std::vector<double> out(f.size());
  for (std::size_t n = 0; n < f.size(); ++n) {
    const Mat3 H = covariant_hessian(ddu[n], du[n], conn[n]);
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += conn[n].g_inv[i][j] * H[i][j];
    out[n] = -s;
  }
  return SampledField(mesh, std::move(out), FieldOrigin::Stencil);
}

namespace {

constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) fail(ErrorKind::IoError, "unexpected end of binary stream");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

void put_header(std::ostream& out, const char* magic, const SphereBundleMesh& mesh) {
  out.write(magic, 4);
  put<std::uint32_t>(out, kFormatVersion);
  for (int n : mesh.resolution()) put<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(mesh.direction_count()));
}

std::array<std::uint32_t, 4> get_header(std::istream& in, const char* magic) {
  char m[4];
  if (!in.read(m, 4) || std::memcmp(m, magic, 4) != 0) {
    fail(ErrorKind::IoError, std::string("missing ") + std::string(magic, 4) + " header");
  }
  if (get<std::uint32_t>(in) != kFormatVersion) fail(ErrorKind::IoError, "unsupported binary format version");
  std::array<std::uint32_t, 4> h{};
  for (auto& v : h) v = get<std::uint32_t>(in);
  return h;
}

}  // namespace

void write_mesh_binary(const SphereBundleMesh& mesh, std::ostream& out) {
  put_header(out, "FSBM", mesh);
  for (double p : mesh.chart().periods) put<double>(out, p);
  for (const Vec3& y : mesh.directions().directions)
    for (double c : y) put<double>(out, c);
  for (double w : mesh.directions().weights) put<double>(out, w);
  for (double d : mesh.densities()) put<double>(out, d);
  if (!out) fail(ErrorKind::IoError, "failed to write mesh");
}

SphereBundleMesh read_mesh_binary(std::istream& in) {
  const auto h = get_header(in, "FSBM");
  PeriodicChart3 chart;
  for (double& p : chart.periods) p = get<double>(in);
  DirectionSet dirs;
  dirs.directions.resize(h[3]);
  for (Vec3& y : dirs.directions)
    for (double& c : y) c = get<double>(in);
  dirs.weights.resize(h[3]);
  for (double& w : dirs.weights) w = get<double>(in);
  dirs.rule = "stored";
  const std::size_t count = static_cast<std::size_t>(h[0]) * h[1] * h[2] * h[3];
  std::vector<double> density(count);
  for (double& d : density) d = get<double>(in);
  return SphereBundleMesh::from_parts(
      chart, {static_cast<int>(h[0]), static_cast<int>(h[1]), static_cast<int>(h[2])}, std::move(dirs),
      std::move(density));
}

void write_field_binary(const SampledField& f, const SphereBundleMesh& mesh, std::ostream& out) {
  require_same_mesh(f, mesh);
  put_header(out, "FSSF", mesh);
  for (double v : f.values()) put<double>(out, v);
  if (!out) fail(ErrorKind::IoError, "failed to write field");
}

SampledField read_field_binary(std::istream& in, const SphereBundleMesh& mesh) {
  const auto h = get_header(in, "FSSF");
  const auto& n = mesh.resolution();
  if (static_cast<int>(h[0]) != n[0] || static_cast<int>(h[1]) != n[1] || static_cast<int>(h[2]) != n[2] ||
      h[3] != mesh.direction_count()) {
    fail(ErrorKind::MeshMismatch, "stored field dimensions differ from the mesh");
  }
  std::vector<double> v(mesh.node_count());
  for (double& x : v) x = get<double>(in);
  return SampledField(mesh, std::move(v));
}

void write_mesh_csv(const SphereBundleMesh& mesh, std::ostream& out, const SampledField* f) {
  if (f) require_same_mesh(*f, mesh);
  out << "i1,i2,i3,d,x1,x2,x3,y1,y2,y3,weight,density" << (f ? ",value" : "") << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t g = 0; g < mesh.grid_count(); ++g) {
    const auto c = mesh.grid_coords(g);
    const Vec3 x = mesh.position(g);
    for (std::size_t d = 0; d < mesh.direction_count(); ++d) {
      const std::size_t k = mesh.node(g, d);
      const Vec3& y = mesh.direction(d);
      out << c[0] << ',' << c[1] << ',' << c[2] << ',' << d << ',' << num(x[0]) << ',' << num(x[1]) << ','
          << num(x[2]) << ',' << num(y[0]) << ',' << num(y[1]) << ',' << num(y[2]) << ','
          << num(mesh.quadrature_weights()[k]) << ',' << num(mesh.densities()[k]);
      if (f) out << ',' << num((*f)[k]);
      out << '\n';
    }
  }
}

}  // namespace finsler
