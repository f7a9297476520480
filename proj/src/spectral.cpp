#include "finsler/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/geometry.hpp"
#include "finsler/parallel.hpp"

#include <complex>
#include <functional>
#include <unsupported/Eigen/FFT>

namespace finsler {

namespace {

using SparseCholesky = Eigen::SimplicialLLT<SparseMatrix>;
using Preconditioner = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t i) { return static_cast<Index>(i); }

double neumaier(const VectorXd& v) {
  double s = 0.0, c = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double t = s + v[i];
    c += std::abs(s) >= std::abs(v[i]) ? (s - t) + v[i] : (v[i] - t) + s;
    s = t;
  }
  return s + c;
}

// The seven lattice points a gradient stencil at p can touch: p, then
// p + e_i and p - e_i for each axis.
std::array<std::size_t, 7> star(const SphereBundleMesh& mesh, std::size_t g) {
  const auto c = mesh.grid_coords(g);
  std::array<std::size_t, 7> s{};
  s[0] = g;
  for (int i = 0; i < 3; ++i) {
    auto up = c, down = c;
    up[static_cast<std::size_t>(i)] += 1;
    down[static_cast<std::size_t>(i)] -= 1;
    s[1 + 2 * static_cast<std::size_t>(i)] = mesh.grid_index(up[0], up[1], up[2]);
    s[2 + 2 * static_cast<std::size_t>(i)] = mesh.grid_index(down[0], down[1], down[2]);
  }
  return s;
}

// One-sided difference along axis i: sign + uses (p + e_i, p), sign - uses (p, p - e_i).
struct Diff {
  int a, b;  // local star indices with coefficients +1/h and -1/h
};

Diff one_sided(int axis, bool plus) { return plus ? Diff{1 + 2 * axis, 0} : Diff{0, 2 + 2 * axis}; }

Mat3 symmetrized(const Mat3& m) {
  Mat3 s = m;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) s[i][j] = s[j][i] = 0.5 * (m[i][j] + m[j][i]);
  return s;
}

VectorXd column(const std::vector<double>& v, const SphereBundleMesh& mesh, std::size_t d) {
  VectorXd c(idx(mesh.grid_count()));
  for (std::size_t g = 0; g < mesh.grid_count(); ++g) c[idx(g)] = v[mesh.node(g, d)];
  return c;
}

double relative_residual(const SparseMatrix& K, const VectorXd& M, const VectorXd& x, double theta) {
  const VectorXd r = K * x - theta * M.cwiseProduct(x);
  const double rn = std::sqrt(r.cwiseAbs2().cwiseQuotient(M).sum());
  const double xn = std::sqrt(x.cwiseAbs2().cwiseProduct(M).sum());
  return rn / (xn * std::max(1.0, std::abs(theta)));
}

Spectrum dense_spectrum(const SparseMatrix& K, const VectorXd& M, std::size_t m, bool vectors) {
  const VectorXd s = M.cwiseSqrt().cwiseInverse();
  MatrixXd S = MatrixXd(K);
  S = s.asDiagonal() * S * s.asDiagonal();
  S = 0.5 * (S + S.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  if (es.info() != Eigen::Success) fail(ErrorKind::ConvergenceFailure, "dense symmetric eigensolver failed");
  Spectrum out;
  out.method = SpectrumMethod::Dense;
  const MatrixXd X = s.asDiagonal() * es.eigenvectors().leftCols(idx(m));
  for (std::size_t k = 0; k < m; ++k) {
    const double lam = es.eigenvalues()[idx(k)];
    out.eigenvalues.push_back(lam);
    out.residuals.push_back(relative_residual(K, M, X.col(idx(k)), lam));
  }
  if (vectors) out.vectors = X;
  return out;
}

// Orthonormalizes W in the M inner product against V and internally. Columns
// that collapse are dropped.
MatrixXd m_orthonormalize(const MatrixXd& V, MatrixXd W, const VectorXd& M) {
  for (int pass = 0; pass < 2; ++pass) {
    if (V.cols() > 0) W -= V * (V.transpose() * M.asDiagonal() * W);
    const MatrixXd G = W.transpose() * M.asDiagonal() * W;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (G + G.transpose()));
    const double top = es.eigenvalues().size() ? es.eigenvalues().maxCoeff() : 0.0;
    std::vector<Index> keep;
    for (Index k = 0; k < es.eigenvalues().size(); ++k)
      if (es.eigenvalues()[k] > 1e-20 * std::max(top, 1e-300) && es.eigenvalues()[k] > 0.0) keep.push_back(k);
    MatrixXd U(W.cols(), idx(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k)
      U.col(idx(k)) = es.eigenvectors().col(keep[k]) / std::sqrt(es.eigenvalues()[keep[k]]);
    W = W * U;
  }
  return W;
}

// Block Davidson on K x = theta M x: the basis stays M-orthonormal, Ritz pairs
// come from Rayleigh-Ritz on K, and each step adds the preconditioned
// residuals of the first unconverged pairs. With P = (K + sigma M)^-1 this is
// block shift-invert Krylov. Thick restarts keep the leading Ritz vectors.
Spectrum iterative_spectrum(const SparseMatrix& K, const VectorXd& M, std::size_t m, const SpectrumOptions& o,
                            const Preconditioner& P) {
  const Index n = K.rows();
  const Index b = std::min<Index>(std::max(o.block_size, 1), n);
  const Index wanted = idx(m);
  const Index max_basis = std::min<Index>(n, std::max<Index>(wanted + 3 * b, 2 * wanted + 2 * b));
  const Index keep = std::min<Index>(max_basis - b, wanted + b);

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal;
  MatrixXd W(n, b);
  for (Index j = 0; j < b; ++j)
    for (Index i = 0; i < n; ++i) W(i, j) = normal(rng);

  MatrixXd V(n, 0), KV(n, 0), X, KX;
  VectorXd theta;
  std::vector<double> res;
  double worst = 0.0;
  for (int it = 1; it <= o.max_iterations; ++it) {
    W = m_orthonormalize(V, W, M);
    if (W.cols() > 0) {
      const Index c = V.cols();
      V.conservativeResize(n, c + W.cols());
      V.rightCols(W.cols()) = W;
      KV.conservativeResize(n, c + W.cols());
      KV.rightCols(W.cols()) = K * W;
    }
    if (V.cols() < wanted) {
      if (W.cols() == 0) fail(ErrorKind::ConvergenceFailure, "Krylov basis collapsed before reaching the requested size");
      W = P(M.asDiagonal() * W);
      continue;
    }
    MatrixXd H = V.transpose() * KV;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
    theta = es.eigenvalues();
    X = V * es.eigenvectors();
    KX = KV * es.eigenvectors();
    res.assign(static_cast<std::size_t>(V.cols()), 0.0);
    Index first_open = -1;
    worst = 0.0;
    for (Index k = 0; k < V.cols(); ++k) {
      const VectorXd r = KX.col(k) - theta[k] * M.cwiseProduct(X.col(k));
      res[static_cast<std::size_t>(k)] =
          std::sqrt(r.cwiseAbs2().cwiseQuotient(M).sum()) / std::max(1.0, std::abs(theta[k]));
      if (k < wanted) {
        worst = std::max(worst, res[static_cast<std::size_t>(k)]);
        if (first_open < 0 && res[static_cast<std::size_t>(k)] > o.tolerance) first_open = k;
      }
    }
    if (first_open < 0 || V.cols() == n) {
      if (first_open >= 0 && worst > o.tolerance) break;
      Spectrum out;
      out.method = SpectrumMethod::Iterative;
      out.iterations = it;
      for (Index k = 0; k < wanted; ++k) {
        out.eigenvalues.push_back(theta[k]);
        out.residuals.push_back(relative_residual(K, M, X.col(k), theta[k]));
      }
      if (o.want_vectors) out.vectors = X.leftCols(wanted);
      return out;
    }
    if (V.cols() + b > max_basis) {
      V = X.leftCols(keep);
      KV = KX.leftCols(keep);
    }
    const Index start = std::min(first_open, std::max<Index>(0, std::min(V.cols(), X.cols()) - b));
    const Index cols = std::min(b, X.cols() - start);
    const MatrixXd R = KX.middleCols(start, cols) -
                       M.asDiagonal() * X.middleCols(start, cols) * theta.segment(start, cols).asDiagonal();
    W = P(R);
  }
  std::ostringstream os;
  os << "no convergence after " << o.max_iterations << " expansions; worst relative residual " << worst
     << " against tolerance " << o.tolerance;
  fail(ErrorKind::ConvergenceFailure, os.str());
}


Preconditioner shift_invert(const SparseMatrix& K, const VectorXd& M) {
  const Index n = K.rows();
  double diag_ratio = 0.0;
  for (Index i = 0; i < n; ++i) diag_ratio = std::max(diag_ratio, K.coeff(i, i) / M[i]);
  const double sigma = 1e-6 * std::max(diag_ratio, 1.0);
  SparseMatrix A = K;
  for (Index i = 0; i < n; ++i) A.coeffRef(i, i) += sigma * M[i];
  auto chol = std::make_shared<SparseCholesky>(A);
  if (chol->info() != Eigen::Success) fail(ErrorKind::ConvergenceFailure, "factorization of the shifted operator failed");
  return [chol](const MatrixXd& R) -> MatrixXd { return chol->solve(R); };
}

// Inverse of the constant-coefficient lattice operator whose coefficients are
// the lattice means of mass * g^{ij}, diagonalized by the 3D DFT.
class LatticePreconditioner {
 public:
  LatticePreconditioner(const OperatorBlock& B, const std::array<int, 3>& n, const Vec3& h) : n_(n) {
    const std::size_t ng = static_cast<std::size_t>(n[0]) * n[1] * n[2];
    Mat3 c{};
    for (std::size_t g = 0; g < ng; ++g) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c[i][j] += B.mass[idx(g)] * B.g_inv[g][i][j];
    }
    for (auto& row : c)
      for (double& v : row) v /= static_cast<double>(ng);
    std::vector<double> symbol(ng);
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < ng; ++g) {
      const std::size_t k2 = g % static_cast<std::size_t>(n[2]);
      const std::size_t r = g / static_cast<std::size_t>(n[2]);
      const std::size_t kk[3] = {r / static_cast<std::size_t>(n[1]), r % static_cast<std::size_t>(n[1]), k2};
      double t[3];
      for (int i = 0; i < 3; ++i) t[i] = 2.0 * M_PI * static_cast<double>(kk[i]) / n[i];
      double s = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          s += i == j ? c[i][i] * 4.0 * std::pow(std::sin(t[i] / 2), 2) / (h[i] * h[i])
                      : c[i][j] * std::sin(t[i]) * std::sin(t[j]) / (h[i] * h[j]);
      symbol[g] = s;
      if (g > 0) smallest = std::min(smallest, s);
    }
    const double shift = 1e-2 * smallest;
    inv_.resize(ng);
    for (std::size_t g = 0; g < ng; ++g) inv_[g] = 1.0 / (symbol[g] + shift);
  }

  MatrixXd operator()(const MatrixXd& R) const {
    MatrixXd out(R.rows(), R.cols());
    std::vector<std::complex<double>> data(static_cast<std::size_t>(R.rows()));
    for (Index c = 0; c < R.cols(); ++c) {
      for (Index i = 0; i < R.rows(); ++i) data[static_cast<std::size_t>(i)] = R(i, c);
      transform(data, false);
      for (std::size_t g = 0; g < data.size(); ++g) data[g] *= inv_[g];
      transform(data, true);
      for (Index i = 0; i < R.rows(); ++i) out(i, c) = data[static_cast<std::size_t>(i)].real();
    }
    return out;
  }

 private:
  void transform(std::vector<std::complex<double>>& data, bool inverse) const {
    const std::size_t n[3] = {static_cast<std::size_t>(n_[0]), static_cast<std::size_t>(n_[1]),
                              static_cast<std::size_t>(n_[2])};
    const std::size_t stride[3] = {n[1] * n[2], n[2], 1};
    for (int axis = 0; axis < 3; ++axis) {
      const std::size_t len = n[axis], st = stride[axis];
      std::vector<std::complex<double>> line(len), res(len);
      for (std::size_t base = 0; base < data.size(); ++base) {
        if ((base / st) % len != 0) continue;
        for (std::size_t k = 0; k < len; ++k) line[k] = data[base + k * st];
        if (inverse) {
          fft_.inv(res, line);
        } else {
          fft_.fwd(res, line);
        }
        for (std::size_t k = 0; k < len; ++k) data[base + k * st] = res[k];
      }
    }
  }

  std::array<int, 3> n_;
  std::vector<double> inv_;
  mutable Eigen::FFT<double> fft_;
};

}  // namespace

struct DiscreteOperator::Data {
  explicit Data(SphereBundleMesh m) : mesh(std::move(m)) {}
  SphereBundleMesh mesh;
  CouplingMode mode = CouplingMode::Frozen;
  std::vector<std::string> warnings;
  std::vector<OperatorBlock> blocks;
  std::vector<std::size_t> block_of;
};

std::size_t DiscreteOperator::dimension() const { return data_->mesh.node_count(); }
const SphereBundleMesh& DiscreteOperator::mesh() const { return data_->mesh; }
CouplingMode DiscreteOperator::mode() const { return data_->mode; }
const std::vector<std::string>& DiscreteOperator::warnings() const { return data_->warnings; }
std::size_t DiscreteOperator::block_count() const { return data_->blocks.size(); }
const OperatorBlock& DiscreteOperator::block(std::size_t b) const { return data_->blocks[b]; }
std::size_t DiscreteOperator::block_of(std::size_t d) const { return data_->block_of[d]; }

std::vector<std::size_t> DiscreteOperator::directions_of(std::size_t b) const {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < data_->block_of.size(); ++d)
    if (data_->block_of[d] == b) out.push_back(d);
  return out;
}

Eigen::VectorXd DiscreteOperator::measure() const {
  const auto& w = data_->mesh.quadrature_weights();
  return Eigen::Map<const VectorXd>(w.data(), idx(w.size()));
}

SparseMatrix DiscreteOperator::stiffness() const {
  const SphereBundleMesh& mesh = data_->mesh;
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t d = 0; d < mesh.direction_count(); ++d) {
    const SparseMatrix& K = data_->blocks[data_->block_of[d]].stiffness;
    const double w = mesh.directions().weights[d];
    for (Index c = 0; c < K.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(K, c); it; ++it)
        t.emplace_back(idx(mesh.node(static_cast<std::size_t>(it.row()), d)),
                       idx(mesh.node(static_cast<std::size_t>(it.col()), d)), w * it.value());
  }
  SparseMatrix out(idx(dimension()), idx(dimension()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

std::vector<double> DiscreteOperator::stiffness_apply(const std::vector<double>& f) const {
  const SphereBundleMesh& mesh = data_->mesh;
  if (f.size() != mesh.node_count()) fail(ErrorKind::MeshMismatch, "value count does not match the operator");
  std::vector<double> out(f.size());
  for (std::size_t d = 0; d < mesh.direction_count(); ++d) {
    const VectorXd kf = data_->blocks[data_->block_of[d]].stiffness * column(f, mesh, d);
    const double w = mesh.directions().weights[d];
    for (std::size_t g = 0; g < mesh.grid_count(); ++g) out[mesh.node(g, d)] = w * kf[idx(g)];
  }
  return out;
}

SampledField DiscreteOperator::apply(const SampledField& f) const {
  const SphereBundleMesh& mesh = data_->mesh;
  require_same_mesh(f, mesh);
  std::vector<double> out(f.size());
  for (std::size_t d = 0; d < mesh.direction_count(); ++d) {
    const OperatorBlock& B = data_->blocks[data_->block_of[d]];
    const VectorXd kf = B.stiffness * column(f.values(), mesh, d);
    for (std::size_t g = 0; g < mesh.grid_count(); ++g) out[mesh.node(g, d)] = kf[idx(g)] / B.mass[idx(g)];
  }
  return SampledField(mesh, std::move(out), FieldOrigin::Stencil);
}

double DiscreteOperator::dirichlet_form(const SampledField& u, const SampledField& v) const {
  const SphereBundleMesh& mesh = data_->mesh;
  require_same_mesh(u, mesh);
  require_same_mesh(v, mesh);
  const std::size_t nd = mesh.direction_count();
  const Vec3 h{mesh.spacing(0), mesh.spacing(1), mesh.spacing(2)};
  std::vector<double> terms(mesh.node_count());
  parallel_for(mesh.grid_count(), [&](std::size_t g) {
    const auto s = star(mesh, g);
    for (std::size_t d = 0; d < nd; ++d) {
      const OperatorBlock& B = data_->blocks[data_->block_of[d]];
      const Mat3& C = B.g_inv[g];
      double acc = 0.0;
      for (int combo = 0; combo < 8; ++combo) {
        Vec3 gu{}, gv{};
        for (int i = 0; i < 3; ++i) {
          const Diff df = one_sided(i, (combo >> i) & 1);
          const std::size_t na = mesh.node(s[static_cast<std::size_t>(df.a)], d);
          const std::size_t nb = mesh.node(s[static_cast<std::size_t>(df.b)], d);
          gu[i] = (u[na] - u[nb]) / h[i];
          gv[i] = (v[na] - v[nb]) / h[i];
        }
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) acc += C[i][j] * gu[i] * gv[j];
      }
      terms[mesh.node(g, d)] = mesh.directions().weights[d] * B.mass[idx(g)] * acc / 8.0;
    }
  });
  return compensated_sum(terms);
}

DiscreteOperator assemble(const MetricSpec& spec, const SphereBundleMesh& mesh, const AssemblyOptions& options,
                          const NumericPolicy& policy) {
  for (std::size_t k = 0; k < mesh.node_count(); ++k) {
    if (!(mesh.densities()[k] > 0.0)) {
      std::ostringstream os;
      os << "non-positive density at node " << k;
      fail(ErrorKind::DegenerateMetric, os.str());
    }
  }
  auto data = std::make_shared<DiscreteOperator::Data>(mesh);
  const std::size_t ng = mesh.grid_count();
  const std::size_t nd = mesh.direction_count();

  if (options.mode == CouplingMode::Coupled) {
    std::vector<double> nmax(ng, 0.0);
    parallel_for(ng, [&](std::size_t g) {
      for (std::size_t d = 0; d < nd; ++d) {
        const GeometryAtPoint p = compute_geometry(spec, mesh.position(g), mesh.direction(d), GeometryLevel::Connection, policy);
        for (const auto& row : p.N)
          for (double v : row) nmax[g] = std::max(nmax[g], std::abs(v));
      }
    });
    if (*std::max_element(nmax.begin(), nmax.end()) > 1e-12) {
      const std::string msg =
          "N-coupling needs direction-derivative stencils the direction set does not provide; "
          "built in frozen-direction mode";
      if (options.strict) fail(ErrorKind::StencilOverflow, msg);
      data->warnings.push_back(std::string(to_string(ErrorKind::StencilOverflow)) + ": " + msg);
    } else {
      data->mode = CouplingMode::Coupled;
    }
  }

  const bool shared = !spec.direction_dependent();
  const std::size_t nb = shared ? 1 : nd;
  data->block_of.resize(nd);
  for (std::size_t d = 0; d < nd; ++d) data->block_of[d] = shared ? 0 : d;
  data->blocks.resize(nb);
  const Vec3 h{mesh.spacing(0), mesh.spacing(1), mesh.spacing(2)};
  const double cv = mesh.cell_volume();

  for (std::size_t b = 0; b < nb; ++b) {
    OperatorBlock& B = data->blocks[b];
    B.g_inv.resize(ng);
    B.mass.resize(idx(ng));
    std::vector<Eigen::Triplet<double>> t(49 * ng);
    parallel_for(ng, [&](std::size_t g) {
      const Vec3& y = mesh.direction(b);
      B.g_inv[g] = symmetrized(compute_geometry(spec, mesh.position(g), y, GeometryLevel::Metric, policy).g_inv);
      const double w = mesh.densities()[mesh.node(g, b)] * cv;
      B.mass[idx(g)] = w;
      const Mat3& C = B.g_inv[g];
      double L[7][7] = {};
      for (int combo = 0; combo < 8; ++combo) {
        for (int i = 0; i < 3; ++i) {
          const Diff di = one_sided(i, (combo >> i) & 1);
          for (int j = 0; j < 3; ++j) {
            const Diff dj = one_sided(j, (combo >> j) & 1);
            const double c = w * C[i][j] / (8.0 * h[i] * h[j]);
            L[di.a][dj.a] += c;
            L[di.a][dj.b] -= c;
            L[di.b][dj.a] -= c;
            L[di.b][dj.b] += c;
          }
        }
      }
      const auto s = star(mesh, g);
      std::size_t k = 49 * g;
      for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) {
          const double v = r <= c ? L[r][c] : L[c][r];
          t[k++] = Eigen::Triplet<double>(idx(s[static_cast<std::size_t>(r)]), idx(s[static_cast<std::size_t>(c)]), v);
        }
    });
    B.stiffness.resize(idx(ng), idx(ng));
    B.stiffness.setFromTriplets(t.begin(), t.end());
    B.stiffness.prune(0.0);
  }
  DiscreteOperator op;
  op.data_ = std::move(data);
  return op;
}

std::string_view to_string(SpectrumMethod m) { return m == SpectrumMethod::Dense ? "dense" : "iterative"; }

Spectrum generalized_spectrum(const SparseMatrix& K, const VectorXd& M, std::size_t m, const SpectrumOptions& o) {
  const std::size_t n = static_cast<std::size_t>(K.rows());
  if (m > n) fail(ErrorKind::RequestRejected, "more eigenvalues requested than the operator dimension");
  if (m == 0) return {};
  if (n < o.dense_limit) return dense_spectrum(K, M, m, o.want_vectors);
  if (m > 200) fail(ErrorKind::RequestRejected, "the iterative solver returns at most 200 eigenvalues");
  return iterative_spectrum(K, M, m, o, shift_invert(K, M));
}

namespace {

Spectrum block_spectrum(const OperatorBlock& B, const SphereBundleMesh& mesh, std::size_t m, const SpectrumOptions& o) {
  const std::size_t n = static_cast<std::size_t>(B.stiffness.rows());
  if (n < o.dense_limit || m == 0) return generalized_spectrum(B.stiffness, B.mass, m, o);
  if (m > n) fail(ErrorKind::RequestRejected, "more eigenvalues requested than the operator dimension");
  if (m > 200) fail(ErrorKind::RequestRejected, "the iterative solver returns at most 200 eigenvalues");
  const LatticePreconditioner P(B, mesh.resolution(), {mesh.spacing(0), mesh.spacing(1), mesh.spacing(2)});
  return iterative_spectrum(B.stiffness, B.mass, m, o, P);
}

}  // namespace

Spectrum spectrum(const DiscreteOperator& op, std::size_t m, const SpectrumOptions& o) {
  if (m > op.dimension()) fail(ErrorKind::RequestRejected, "more eigenvalues requested than the operator dimension");
  const SphereBundleMesh& mesh = op.mesh();
  struct Entry {
    double value, residual;
    std::size_t block, k, direction;
  };
  std::vector<Spectrum> parts(op.block_count());
  std::vector<Entry> all;
  for (std::size_t b = 0; b < op.block_count(); ++b) {
    const OperatorBlock& B = op.block(b);
    const auto dirs = op.directions_of(b);
    // A block shared by several directions contributes each eigenvalue once per direction.
    const std::size_t need = std::min<std::size_t>((m + dirs.size() - 1) / dirs.size(), mesh.grid_count());
    parts[b] = block_spectrum(B, mesh, need, o);
    for (std::size_t k = 0; k < parts[b].eigenvalues.size(); ++k)
      for (std::size_t d : dirs) all.push_back({parts[b].eigenvalues[k], parts[b].residuals[k], b, k, d});
  }
  std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
  all.resize(m);
  Spectrum out;
  out.method = SpectrumMethod::Dense;
  for (const Spectrum& p : parts) {
    if (p.method == SpectrumMethod::Iterative) out.method = SpectrumMethod::Iterative;
    out.iterations = std::max(out.iterations, p.iterations);
  }
  if (o.want_vectors) out.vectors = MatrixXd::Zero(idx(op.dimension()), idx(m));
  for (std::size_t c = 0; c < all.size(); ++c) {
    out.eigenvalues.push_back(all[c].value);
    out.residuals.push_back(all[c].residual);
    if (o.want_vectors) {
      const double s = 1.0 / std::sqrt(mesh.directions().weights[all[c].direction]);
      const MatrixXd& X = parts[all[c].block].vectors;
      for (std::size_t g = 0; g < mesh.grid_count(); ++g)
        out.vectors(idx(mesh.node(g, all[c].direction)), idx(c)) = s * X(idx(g), idx(all[c].k));
    }
  }
  return out;
}

double rayleigh_lambda1(const DiscreteOperator& op, const SampledField& psi) {
  require_same_mesh(psi, op.mesh());
  const VectorXd M = op.measure();
  const Eigen::Map<const VectorXd> p(psi.values().data(), idx(psi.size()));
  const std::vector<double> kp = op.stiffness_apply(psi.values());
  const VectorXd num_terms = Eigen::Map<const VectorXd>(kp.data(), idx(kp.size())).cwiseProduct(p);
  const double num = neumaier(num_terms);
  const double sq = neumaier(M.cwiseProduct(p.cwiseAbs2()));
  const double mean = neumaier(M.cwiseProduct(p));
  const double den = sq - mean * mean / neumaier(M);
  if (den <= 1e-14 * sq) fail(ErrorKind::ConstantField, "Rayleigh quotient of a constant field");
  return num / den;
}

double lambda1(const DiscreteOperator& op, const SpectrumOptions& options) {
  SpectrumOptions o = options;
  o.want_vectors = false;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < op.block_count(); ++b) {
    const Spectrum s = block_spectrum(op.block(b), op.mesh(), 2, o);
    best = std::min(best, s.eigenvalues[1]);
  }
  return best;
}

IsospectralReport isospectral_compare(const MetricSpec& a, const MetricSpec& b, const SphereBundleMesh& mesh,
                                      std::size_t m, double tol, const SpectrumOptions& options,
                                      const NumericPolicy& policy) {
  SpectrumOptions o = options;
  o.want_vectors = false;
  IsospectralReport r;
  r.tolerance = tol;
  r.eigenvalues_a = spectrum(assemble(a, rebuild_mesh(a, mesh, policy), {}, policy), m, o).eigenvalues;
  r.eigenvalues_b = spectrum(assemble(b, rebuild_mesh(b, mesh, policy), {}, policy), m, o).eigenvalues;
  for (std::size_t k = 0; k < m; ++k) {
    const double x = r.eigenvalues_a[k], y = r.eigenvalues_b[k];
    r.max_relative_gap = std::max(r.max_relative_gap, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1.0}));
  }
  r.verdict = r.max_relative_gap <= tol;
  return r;
}

SampledField block_mean(const DiscreteOperator& op, const SampledField& f) {
  const SphereBundleMesh& mesh = op.mesh();
  require_same_mesh(f, mesh);
  std::vector<double> out(f.size());
  for (std::size_t d = 0; d < mesh.direction_count(); ++d) {
    const VectorXd& w = op.block(op.block_of(d)).mass;
    const double mean = neumaier(w.cwiseProduct(column(f.values(), mesh, d))) / neumaier(w);
    for (std::size_t g = 0; g < mesh.grid_count(); ++g) out[mesh.node(g, d)] = mean;
  }
  return SampledField(mesh, std::move(out));
}

namespace {

// Pinned inverse: K with lattice point 0 removed is definite exactly when the
// kernel is the constants.
MatrixXd block_green(const OperatorBlock& B) {
  const Index n = B.stiffness.rows();
  const MatrixXd K = MatrixXd(B.stiffness);
  Eigen::LLT<MatrixXd> llt(K.bottomRightCorner(n - 1, n - 1));
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-13) {
    fail(ErrorKind::RankDeficiency, "operator block is singular beyond the constants");
  }
  MatrixXd Z = MatrixXd::Zero(n, n);
  Z.bottomRightCorner(n - 1, n - 1) = llt.solve(MatrixXd::Identity(n - 1, n - 1));
  Z = 0.5 * (Z + Z.transpose()).eval();
  const VectorXd p = B.mass / neumaier(B.mass);
  // (I - 1 p^T) Z (I - p 1^T)
  const Eigen::RowVectorXd r = p.transpose() * Z;
  MatrixXd A = Z.rowwise() - r;
  const VectorXd c = A * p;
  A = A.colwise() - c;
  return 0.5 * (A + A.transpose());
}

}  // namespace

GreenMatrix green_function(const DiscreteOperator& op) {
  if (op.dimension() > GreenMatrix::dense_limit) {
    std::ostringstream os;
    os << "dense Green matrix limited to " << GreenMatrix::dense_limit << " nodes, mesh has " << op.dimension()
       << "; use per-source solves";
    fail(ErrorKind::GreenUnavailable, os.str());
  }
  const SphereBundleMesh& mesh = op.mesh();
  MatrixXd G = MatrixXd::Zero(idx(op.dimension()), idx(op.dimension()));
  for (std::size_t b = 0; b < op.block_count(); ++b) {
    const MatrixXd Gb = block_green(op.block(b));
    for (std::size_t d : op.directions_of(b)) {
      const double w = mesh.directions().weights[d];
      for (std::size_t i = 0; i < mesh.grid_count(); ++i)
        for (std::size_t j = 0; j < mesh.grid_count(); ++j)
          G(idx(mesh.node(i, d)), idx(mesh.node(j, d))) = Gb(idx(i), idx(j)) / w;
    }
  }
  return GreenMatrix(op, std::move(G));
}

SampledField GreenMatrix::apply(const SampledField& f) const {
  require_same_mesh(f, op_.mesh());
  const Eigen::Map<const VectorXd> v(f.values().data(), idx(f.size()));
  const VectorXd out = G_ * op_.measure().cwiseProduct(v);
  return SampledField(op_.mesh(), std::vector<double>(out.data(), out.data() + out.size()), FieldOrigin::Stencil);
}

SampledField green_reproduce(const GreenMatrix& G, const SampledField& phi) {
  const SampledField mean = block_mean(G.op(), phi);
  const SampledField part = G.apply(G.op().apply(phi));
  std::vector<double> out(phi.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = mean[k] + part[k];
  return SampledField(G.op().mesh(), std::move(out), FieldOrigin::Stencil);
}

namespace {

// Preconditioned conjugate gradients on the consistent singular system K w = r,
// one independent recurrence per column.
MatrixXd lattice_pcg(const OperatorBlock& B, const LatticePreconditioner& P, const MatrixXd& R) {
  const Index cols = R.cols();
  MatrixXd W = MatrixXd::Zero(R.rows(), cols);
  MatrixXd Res = R;
  MatrixXd Z = P(Res);
  MatrixXd Dir = Z;
  VectorXd rz(cols), target(cols);
  for (Index c = 0; c < cols; ++c) {
    rz[c] = Res.col(c).dot(Z.col(c));
    target[c] = 1e-13 * R.col(c).norm();
  }
  const int max_iterations = 4 * static_cast<int>(R.rows()) + 100;
  for (int it = 0; it < max_iterations; ++it) {
    bool done = true;
    for (Index c = 0; c < cols; ++c) done = done && Res.col(c).norm() <= target[c];
    if (done) return W;
    const MatrixXd KD = B.stiffness * Dir;
    for (Index c = 0; c < cols; ++c) {
      const double den = Dir.col(c).dot(KD.col(c));
      if (Res.col(c).norm() <= target[c] || den <= 0.0) continue;
      const double alpha = rz[c] / den;
      W.col(c) += alpha * Dir.col(c);
      Res.col(c) -= alpha * KD.col(c);
    }
    Z = P(Res);
    for (Index c = 0; c < cols; ++c) {
      const double next = Res.col(c).dot(Z.col(c));
      Dir.col(c) = Z.col(c) + (rz[c] != 0.0 ? next / rz[c] : 0.0) * Dir.col(c);
      rz[c] = next;
    }
  }
  fail(ErrorKind::ConvergenceFailure, "conjugate gradients for the Green solve did not converge");
}

}  // namespace

SampledField green_apply(const DiscreteOperator& op, const SampledField& f) {
  const SphereBundleMesh& mesh = op.mesh();
  require_same_mesh(f, mesh);
  std::vector<double> out(f.size());
  const Vec3 h{mesh.spacing(0), mesh.spacing(1), mesh.spacing(2)};
  for (std::size_t b = 0; b < op.block_count(); ++b) {
    const OperatorBlock& B = op.block(b);
    const Index n = B.stiffness.rows();
    const double vol = neumaier(B.mass);
    // Identical columns are solved once.
    const std::vector<std::size_t> dirs = op.directions_of(b);
    std::vector<VectorXd> unique;
    std::vector<std::size_t> slot(dirs.size());
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      const VectorXd c = column(f.values(), mesh, dirs[k]);
      std::size_t s = 0;
      while (s < unique.size() && unique[s] != c) ++s;
      if (s == unique.size()) unique.push_back(c);
      slot[k] = s;
    }
    MatrixXd R(n, idx(unique.size()));
    for (std::size_t s = 0; s < unique.size(); ++s) {
      VectorXd c = unique[s];
      c.array() -= neumaier(B.mass.cwiseProduct(c)) / vol;
      R.col(idx(s)) = B.mass.cwiseProduct(c);
    }
    MatrixXd W;
    if (n <= 3000) {
      const SparseMatrix Kr = B.stiffness.block(1, 1, n - 1, n - 1);
      SparseCholesky chol(Kr);
      if (chol.info() != Eigen::Success) fail(ErrorKind::RankDeficiency, "operator block is singular beyond the constants");
      W = MatrixXd::Zero(n, R.cols());
      W.bottomRows(n - 1) = chol.solve(MatrixXd(R.bottomRows(n - 1)));
    } else {
      W = lattice_pcg(B, LatticePreconditioner(B, mesh.resolution(), h), R);
    }
    for (Index c = 0; c < W.cols(); ++c) W.col(c).array() -= neumaier(B.mass.cwiseProduct(W.col(c))) / vol;
    for (std::size_t k = 0; k < dirs.size(); ++k)
      for (std::size_t g = 0; g < mesh.grid_count(); ++g) out[mesh.node(g, dirs[k])] = W(idx(g), idx(slot[k]));
  }
  return SampledField(mesh, std::move(out), FieldOrigin::Stencil);
}

void write_spectrum_csv(const Spectrum& s, std::ostream& out) {
  out << "index,eigenvalue,residual\n";
  out.precision(17);
  for (std::size_t k = 0; k < s.eigenvalues.size(); ++k) out << k << ',' << s.eigenvalues[k] << ',' << s.residuals[k] << '\n';
}

void write_operator_coo(const DiscreteOperator& op, std::ostream& out) {
  const SparseMatrix K = op.stiffness();
  out << "# finsler-operator coo 1\n" << K.rows() << ' ' << K.nonZeros() << '\n';
  out.precision(17);
  for (Index c = 0; c < K.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(K, c); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  const VectorXd M = op.measure();
  for (Index i = 0; i < M.size(); ++i) out << i << ' ' << M[i] << '\n';
}

}  // namespace finsler
