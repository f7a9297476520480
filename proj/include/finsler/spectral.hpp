#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "finsler/mesh.hpp"
#include "finsler/metric.hpp"
#include "finsler/numeric_policy.hpp"

namespace finsler {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class CouplingMode {
  Frozen,   // one decoupled lattice block per direction
  Coupled,  // experimental; identical to Frozen when N vanishes on the mesh
};

struct AssemblyOptions {
  CouplingMode mode = CouplingMode::Frozen;
  bool strict = false;  // StencilOverflow instead of the frozen fallback
};

/// One lattice block: stiffness and mass per unit direction weight, plus the
/// coefficient field g^{ij} the stiffness was built from.
struct OperatorBlock {
  SparseMatrix stiffness;
  Eigen::VectorXd mass;
  std::vector<Mat3> g_inv;
};

/// Weak-form horizontal Laplacian on a sphere-bundle mesh. The stiffness
/// averages b^T A b over the 8 one-sided difference gradients at each lattice
/// point, so it is symmetric, annihilates constants and is positive
/// semi-definite. Nodes of direction d see the block block_of(d) scaled by the
/// direction weight. Immutable and cheap to copy.
class DiscreteOperator {
 public:
  std::size_t dimension() const;
  const SphereBundleMesh& mesh() const;
  CouplingMode mode() const;
  const std::vector<std::string>& warnings() const;

  std::size_t block_count() const;
  const OperatorBlock& block(std::size_t b) const;
  std::size_t block_of(std::size_t direction) const;
  /// Directions sharing block b.
  std::vector<std::size_t> directions_of(std::size_t b) const;

  /// Per-node quadrature weights.
  Eigen::VectorXd measure() const;
  /// Full node-ordered stiffness.
  SparseMatrix stiffness() const;

  /// Positive Laplacian M^-1 K f.
  SampledField apply(const SampledField& f) const;
  /// K f (the weak form tested against node indicators).
  std::vector<double> stiffness_apply(const std::vector<double>& f) const;
  /// Sum over nodes and difference gradients of the weighted g^{ij} pairing.
  double dirichlet_form(const SampledField& u, const SampledField& v) const;

 private:
  friend DiscreteOperator assemble(const MetricSpec&, const SphereBundleMesh&, const AssemblyOptions&,
                                   const NumericPolicy&);
  struct Data;
  std::shared_ptr<const Data> data_;
};

/// DegenerateMetric on non-positive densities. In coupled mode with N != 0
/// the frozen operator is returned with a warning, or StencilOverflow when
/// strict.
DiscreteOperator assemble(const MetricSpec& spec, const SphereBundleMesh& mesh, const AssemblyOptions& options = {},
                          const NumericPolicy& policy = default_policy());

enum class SpectrumMethod { Dense, Iterative };
std::string_view to_string(SpectrumMethod m);

struct SpectrumOptions {
  std::size_t dense_limit = 3000;  // block dimension below which the dense solver runs
  double tolerance = 1e-8;         // relative residual per pair
  std::uint64_t seed = 0x51ec7a1;
  int block_size = 16;
  int max_iterations = 200;
  bool want_vectors = true;
};

/// Residuals are ||K v - lambda M v||_{M^-1} / (||v||_M max(1, |lambda|)).
struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> residuals;
  SpectrumMethod method = SpectrumMethod::Dense;
  Eigen::MatrixXd vectors;  // M-orthonormal columns, empty unless requested
  int iterations = 0;
};

/// Smallest m eigenpairs of K v = lambda diag(M) v for a symmetric positive
/// semi-definite K. RequestRejected when m exceeds the dimension or 200 on the
/// iterative path; ConvergenceFailure with diagnostics.
Spectrum generalized_spectrum(const SparseMatrix& K, const Eigen::VectorXd& M, std::size_t m,
                              const SpectrumOptions& options = {});

/// First m eigenvalues of the full operator; the union of the block spectra.
Spectrum spectrum(const DiscreteOperator& op, std::size_t m, const SpectrumOptions& options = {});

/// int |grad psi|^2 / (int psi^2 - vol^-1 (int psi)^2). ConstantField when
/// the denominator is at most 1e-14 int psi^2.
double rayleigh_lambda1(const DiscreteOperator& op, const SampledField& psi);
/// First eigenvalue above the constant kernel of every block.
double lambda1(const DiscreteOperator& op, const SpectrumOptions& options = {});

struct IsospectralReport {
  std::vector<double> eigenvalues_a;
  std::vector<double> eigenvalues_b;
  double max_relative_gap = 0.0;  // |a - b| / max(|a|, |b|, 1)
  double tolerance = 0.0;
  bool verdict = false;
  std::string label = "discrete isospectrality up to tol";
};

/// Assembles both specs on the lattice and directions of `mesh`.
IsospectralReport isospectral_compare(const MetricSpec& a, const MetricSpec& b, const SphereBundleMesh& mesh,
                                      std::size_t m, double tol, const SpectrumOptions& options = {},
                                      const NumericPolicy& policy = default_policy());

/// Dense Green matrix: symmetric, measure-mean-zero within each direction, with
/// G K = I - P where P is the measure projection onto the constants of each
/// direction.
class GreenMatrix {
 public:
  static constexpr std::size_t dense_limit = 4000;

  const Eigen::MatrixXd& matrix() const { return G_; }
  double operator()(std::size_t i, std::size_t j) const { return G_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  const DiscreteOperator& op() const { return op_; }
  /// int G(., y) f(y) eta(y).
  SampledField apply(const SampledField& f) const;

 private:
  friend GreenMatrix green_function(const DiscreteOperator&);
  GreenMatrix(DiscreteOperator op, Eigen::MatrixXd G) : op_(std::move(op)), G_(std::move(G)) {}
  DiscreteOperator op_;
  Eigen::MatrixXd G_;
};

/// GreenUnavailable above the dense limit; RankDeficiency when a block has
/// kernel beyond the constants.
GreenMatrix green_function(const DiscreteOperator& op);
/// Block mean of phi plus int G(., y) (Lap phi)(y) eta(y).
SampledField green_reproduce(const GreenMatrix& G, const SampledField& phi);
/// G M f by a sparse solve per block, for meshes past the dense limit.
SampledField green_apply(const DiscreteOperator& op, const SampledField& f);

/// Block-wise measure mean of f broadcast to every node of the block.
SampledField block_mean(const DiscreteOperator& op, const SampledField& f);

/// "index,eigenvalue,residual" rows.
void write_spectrum_csv(const Spectrum& s, std::ostream& out);
/// Coordinate list: header line, "n nnz", one "i j value" line per stored
/// entry of the full stiffness (0-based), then n "i mass" lines.
void write_operator_coo(const DiscreteOperator& op, std::ostream& out);

}  // namespace finsler
