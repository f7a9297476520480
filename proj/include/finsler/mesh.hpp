#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "finsler/field.hpp"
#include "finsler/metric.hpp"
#include "finsler/numeric_policy.hpp"
#include "finsler/parallel.hpp"

namespace finsler {

/// Unit directions with quadrature weights summing to 4 pi.
struct DirectionSet {
  std::vector<Vec3> directions;
  std::vector<double> weights;
  std::string rule;

  std::size_t size() const { return directions.size(); }
};

/// Subdivided icosahedron: 10 * 4^level + 2 vertices, weighted by one third of
/// the spherical area of each adjacent triangle.
DirectionSet icosphere(int level);
/// Gauss-Legendre in cos(theta) times uniform azimuth.
DirectionSet product_grid(int n_theta, int n_phi);
/// One frozen direction carrying the full sphere weight.
DirectionSet single_direction(const Vec3& y);

struct DirectionRule {
  enum class Kind { Icosphere, ProductGrid, Single };
  Kind kind = Kind::Icosphere;
  int level = 1;
  int n_theta = 6;
  int n_phi = 12;
  Vec3 direction{1.0, 0.0, 0.0};

  static DirectionRule ico(int level) { return {Kind::Icosphere, level, 0, 0, {1.0, 0.0, 0.0}}; }
  static DirectionRule product(int n_theta, int n_phi) { return {Kind::ProductGrid, 0, n_theta, n_phi, {1.0, 0.0, 0.0}}; }
  static DirectionRule single(const Vec3& y) { return {Kind::Single, 0, 0, 0, y}; }

  DirectionSet build() const;
};

/// T^3 x S^2 discretized as a periodic lattice times a direction set. Nodes
/// are ordered lexicographically over the lattice, then by direction.
class SphereBundleMesh {
 public:
  /// Assembles a mesh from stored parts (used by the binary reader).
  static SphereBundleMesh from_parts(const PeriodicChart3& chart, const std::array<int, 3>& n, DirectionSet dirs,
                                     std::vector<double> density);

  const PeriodicChart3& chart() const { return chart_; }
  const std::array<int, 3>& resolution() const { return n_; }
  const DirectionSet& directions() const { return dirs_; }
  std::size_t grid_count() const { return static_cast<std::size_t>(n_[0]) * n_[1] * n_[2]; }
  std::size_t direction_count() const { return dirs_.size(); }
  std::size_t node_count() const { return grid_count() * direction_count(); }

  std::size_t node(std::size_t grid, std::size_t d) const { return grid * direction_count() + d; }
  std::size_t grid_of(std::size_t node) const { return node / direction_count(); }
  std::size_t direction_of(std::size_t node) const { return node % direction_count(); }
  std::size_t grid_index(int i0, int i1, int i2) const;
  std::array<int, 3> grid_coords(std::size_t grid) const;
  Vec3 position(std::size_t grid) const;
  const Vec3& direction(std::size_t d) const { return dirs_.directions[d]; }
  double spacing(int axis) const { return chart_.periods[static_cast<std::size_t>(axis)] / n_[static_cast<std::size_t>(axis)]; }
  double cell_volume() const { return chart_.volume() / static_cast<double>(grid_count()); }

  const std::vector<double>& densities() const { return density_; }
  /// density * cell volume * direction weight.
  const std::vector<double>& quadrature_weights() const { return weight_; }
  double total_volume() const { return total_volume_; }
  /// Densities coincide across directions at every lattice point.
  bool direction_uniform() const { return direction_uniform_; }
  std::uint64_t id() const { return id_; }

 private:
  SphereBundleMesh() = default;
  friend SphereBundleMesh build_mesh(const MetricSpec&, const std::array<int, 3>&, DirectionSet,
                                     const NumericPolicy&);
  void finalize();

  PeriodicChart3 chart_{};
  std::array<int, 3> n_{};
  DirectionSet dirs_;
  std::vector<double> density_;
  std::vector<double> weight_;
  double total_volume_ = 0.0;
  bool direction_uniform_ = false;
  std::uint64_t id_ = 0;
};

/// Densities sqrt(det g) at every node. RequestRejected below 4 points per
/// axis; DegenerateMetric names the failing node.
SphereBundleMesh build_mesh(const MetricSpec& spec, const std::array<int, 3>& resolution, const DirectionRule& rule,
                            const NumericPolicy& policy = default_policy());
SphereBundleMesh build_mesh(const MetricSpec& spec, const std::array<int, 3>& resolution, DirectionSet dirs,
                            const NumericPolicy& policy = default_policy());
/// Same lattice and directions as `like`, densities from `spec`. MeshMismatch
/// when the chart periods differ.
SphereBundleMesh rebuild_mesh(const MetricSpec& spec, const SphereBundleMesh& like,
                              const NumericPolicy& policy = default_policy());

enum class FieldOrigin { Samples, ClosedForm, Stencil };

/// Values per mesh node, tied to the mesh they were sampled on.
class SampledField {
 public:
  SampledField() = default;
  SampledField(const SphereBundleMesh& mesh, std::vector<double> values, FieldOrigin origin = FieldOrigin::Samples);
  static SampledField constant(const SphereBundleMesh& mesh, double c);

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  double operator[](std::size_t node) const { return values_[node]; }
  std::size_t size() const { return values_.size(); }
  std::uint64_t mesh_id() const { return mesh_id_; }
  FieldOrigin origin() const { return origin_; }
  /// Every lattice point carries one value across all directions.
  bool constant_columns(const SphereBundleMesh& mesh) const;

 private:
  std::vector<double> values_;
  std::uint64_t mesh_id_ = 0;
  FieldOrigin origin_ = FieldOrigin::Samples;
};

void require_same_mesh(const SampledField& f, const SphereBundleMesh& mesh);

SampledField sample(const ScalarField& u, const SphereBundleMesh& mesh);

/// Evaluates fn(x, y) at every node; when per_direction is false the value at
/// the first direction is reused across each column.
template <class Fn>
std::vector<double> map_nodes(const SphereBundleMesh& mesh, bool per_direction, Fn&& fn) {
  const std::size_t ng = mesh.grid_count();
  const std::size_t nd = mesh.direction_count();
  std::vector<double> out(mesh.node_count());
  parallel_for(ng, [&](std::size_t g) {
    const Vec3 x = mesh.position(g);
    if (per_direction) {
      for (std::size_t d = 0; d < nd; ++d) out[mesh.node(g, d)] = fn(x, mesh.direction(d));
    } else {
      const double v = fn(x, mesh.direction(0));
      for (std::size_t d = 0; d < nd; ++d) out[mesh.node(g, d)] = v;
    }
  });
  return out;
}

/// Neumaier-compensated sum.
double compensated_sum(const std::vector<double>& terms);

double integrate(const SampledField& f, const SphereBundleMesh& mesh);

struct QuadratureEstimate {
  double value = 0.0;
  double error = 0.0;  // |full - every-other-lattice-point| when the lattice is even, else 0
};

QuadratureEstimate integrate_with_estimate(const SampledField& f, const SphereBundleMesh& mesh);

enum class SobolevForm {
  SumOfNorms,     // sum_i (int |nabla^i f|^p)^(1/p)
  QuadraticForm,  // (sum_i int |nabla^i f|^p)^(1/p); for k = p = 2 the W^{2,2} energy norm
};

std::string_view to_string(SobolevForm form);

/// Closed-form fields use jets; sampled ones 4th-order central differences.
double sobolev_norm(const ScalarField& f, const SphereBundleMesh& mesh, const MetricSpec& spec, int k, double p,
                    SobolevForm form, const NumericPolicy& policy = default_policy());
double sobolev_norm(const SampledField& f, const SphereBundleMesh& mesh, const MetricSpec& spec, int k, double p,
                    SobolevForm form, const NumericPolicy& policy = default_policy());

struct Extrema {
  double min = 0.0;
  std::size_t argmin = 0;
  double max = 0.0;
  std::size_t argmax = 0;
};

Extrema field_extrema(const SampledField& f, const SphereBundleMesh& mesh);

/// 4th-order periodic central differences in x of a sampled field, per node.
std::vector<Vec3> stencil_gradient(const SampledField& f, const SphereBundleMesh& mesh);
std::vector<Mat3> stencil_hessian(const SampledField& f, const SphereBundleMesh& mesh);

/// Squared norms |nabla^1 f|^2 and |nabla^2 f|^2 per node from stencils.
/// DirectionJetsUnavailable when f varies with the direction and N != 0.
struct SampledCovariantNorms {
  std::vector<double> first;
  std::vector<double> second;
};

SampledCovariantNorms sampled_covariant_norms(const SampledField& f, const SphereBundleMesh& mesh,
                                              const MetricSpec& spec, const NumericPolicy& policy = default_policy());

/// Positive horizontal Laplacian of a sampled field from stencils.
SampledField sampled_horizontal_laplacian(const SampledField& f, const SphereBundleMesh& mesh,
                                          const MetricSpec& spec, const NumericPolicy& policy = default_policy());

// Flat binary layout, little-endian:
//   mesh:  "FSBM" u32 version, u32 n1 n2 n3 nd, f64 periods[3],
//          f64 directions[nd][3], f64 weights[nd], f64 density[node_count]
//   field: "FSSF" u32 version, u32 n1 n2 n3 nd, f64 values[node_count]
void write_mesh_binary(const SphereBundleMesh& mesh, std::ostream& out);
SphereBundleMesh read_mesh_binary(std::istream& in);
void write_field_binary(const SampledField& f, const SphereBundleMesh& mesh, std::ostream& out);
SampledField read_field_binary(std::istream& in, const SphereBundleMesh& mesh);

/// One row per node: i1,i2,i3,d,x1,x2,x3,y1,y2,y3,weight,density[,value].
void write_mesh_csv(const SphereBundleMesh& mesh, std::ostream& out, const SampledField* f = nullptr);

}  // namespace finsler
