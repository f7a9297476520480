#include "finsler/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/field.hpp"
#include "finsler/geometry.hpp"

namespace finsler {

namespace {

bool varies_with_direction(const MetricSpec& spec, const ConformalFactor& phi) {
  return spec.direction_dependent() || !phi.direction_independent();
}

double integral(const SphereBundleMesh& mesh, std::vector<double> v) {
  return integrate(SampledField(mesh, std::move(v)), mesh);
}

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Pointwise values reused by several of the checks.
struct Pointwise {
  std::vector<double> phi, grad_sq, lap, S, S_tilde;
};

Pointwise pointwise(const ConformalFactor& phi, const MetricSpec& spec, const SphereBundleMesh& mesh,
                    bool with_curvature, const NumericPolicy& policy) {
  const bool per_dir = varies_with_direction(spec, phi);
  Pointwise p;
  p.phi = map_nodes(mesh, per_dir, [&](const Vec3& x, const Vec3& y) { return phi(x, y); });
  p.grad_sq = map_nodes(mesh, per_dir, [&](const Vec3& x, const Vec3& y) {
    return covariant_derivative(phi.phi(), spec, x, y, 1, policy).norm_sq;
  });
  p.lap = map_nodes(mesh, per_dir,
                    [&](const Vec3& x, const Vec3& y) { return horizontal_laplacian(phi.phi(), spec, x, y, policy); });
  if (with_curvature) {
    const MetricSpec deformed = conformal_deform(spec, phi);
    p.S = map_nodes(mesh, spec.direction_dependent(), [&](const Vec3& x, const Vec3& y) {
      return compute_geometry(spec, x, y, GeometryLevel::Curvature, policy).scalar_S;
    });
    p.S_tilde = map_nodes(mesh, per_dir,
                          [&](const Vec3& x, const Vec3& y) { return direct_scalar_curvature(deformed, x, y, policy); });
  }
  return p;
}

template <class Fn>
std::vector<double> combine(std::size_t n, Fn&& fn) {
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = fn(k);
  return out;
}

void require_eps(double eps) {
  if (!(eps > 0.0 && eps < 2.0)) {
    std::ostringstream os;
    os << "epsilon " << eps << " outside (0, 2)";
    fail(ErrorKind::EpsilonOutOfRange, os.str());
  }
}

LowerBoundRecord lower_bound_common(const ConformalFactor& phi, const MetricSpec& spec, const SphereBundleMesh& mesh,
                                    const DiscreteOperator& op, const GreenMatrix* G, const NumericPolicy& policy) {
  phi.require_positive(mesh);
  const bool per_dir = varies_with_direction(spec, phi);
  const Pointwise p = pointwise(phi, spec, mesh, true, policy);
  const std::size_t n = mesh.node_count();
  const ScalarField inv_field = phi.power(-1.0);
  const std::vector<double> inv = combine(n, [&](std::size_t k) { return 1.0 / p.phi[k]; });
  const std::vector<double> lap_inv = map_nodes(
      mesh, per_dir, [&](const Vec3& x, const Vec3& y) { return horizontal_laplacian(inv_field, spec, x, y, policy); });
  const std::vector<double> chain = combine(n, [&](std::size_t k) {
    const double f = p.phi[k];
    return -p.lap[k] / (f * f) - 2.0 * p.grad_sq[k] / (f * f * f);
  });

  LowerBoundRecord r;
  {
    const double scale = std::max(sup_abs(lap_inv), sup_abs(chain));
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(lap_inv[k] - chain[k]));
    r.chain_rule_residual = scale > 0.0 ? worst / scale : 0.0;
  }

  const SampledField inv_s(mesh, inv);
  const SampledField mean = block_mean(op, inv_s);
  auto solve = [&](const SampledField& f) { return G ? G->apply(f) : green_apply(op, f); };
  const SampledField rep = solve(op.apply(inv_s));
  const SampledField rep_jet = solve(SampledField(mesh, lap_inv));
  const double inv_sup = sup_abs(inv);
  double worst = 0.0, worst_jet = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    worst = std::max(worst, std::abs(mean[k] + rep[k] - inv[k]));
    worst_jet = std::max(worst_jet, std::abs(mean[k] + rep_jet[k] - inv[k]));
  }
  r.green_residual = worst / inv_sup;
  r.green_consistency = worst_jet / inv_sup;

  const double vol = mesh.total_volume();
  r.mean_inverse = integral(mesh, inv) / vol;
  r.cs_bound = std::sqrt(integral(mesh, combine(n, [&](std::size_t k) { return inv[k] * inv[k]; })) / vol);
  r.cs_slack = r.cs_bound - r.mean_inverse;
  r.c1 = 1.0 / inv_sup;
  r.s_term = std::sqrt(integral(mesh, combine(n, [&](std::size_t k) { return p.S[k] * p.S[k] * inv[k] * inv[k]; })));
  r.s_tilde_term = std::sqrt(integral(
      mesh, combine(n, [&](std::size_t k) { return p.S_tilde[k] * p.S_tilde[k] * std::pow(p.phi[k], 6); })));
  if (G) {
    r.green_min = G->matrix().minCoeff();
    r.green_max_abs = G->matrix().cwiseAbs().maxCoeff();
  }
  return r;
}

}  // namespace

double relative_gap(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

L2Record l2_bounds(const ConformalFactor& phi, const MetricSpec& spec, const SphereBundleMesh& mesh,
                        const NumericPolicy& policy) {
  phi.require_positive(mesh);
  const Pointwise p = pointwise(phi, spec, mesh, true, policy);
  const std::size_t n = mesh.node_count();
  L2Record r;
  r.volume = mesh.total_volume();
  r.phi_sq = integral(mesh, combine(n, [&](std::size_t k) { return p.phi[k] * p.phi[k]; }));
  r.phi_six = integral(mesh, combine(n, [&](std::size_t k) { return std::pow(p.phi[k], 6); }));
  r.holder_bound = std::cbrt(r.phi_six) * std::pow(r.volume, 2.0 / 3.0);
  r.holder_slack = r.holder_bound - r.phi_sq;
  r.grad_sq = integral(mesh, p.grad_sq);
  r.s_phi_sq = integral(mesh, combine(n, [&](std::size_t k) { return p.S[k] * p.phi[k] * p.phi[k]; }));
  r.a1 = integral(mesh, combine(n, [&](std::size_t k) { return p.S_tilde[k] * std::pow(p.phi[k], 6); })) / 6.0;
  r.identity_lhs = 4.0 / 3.0 * r.grad_sq;
  r.identity_rhs = r.a1 - r.s_phi_sq / 6.0;
  r.identity_residual = relative_gap(r.identity_lhs, r.identity_rhs);
  return r;
}

CurvatureSquareRecord curvature_square_identity(const ConformalFactor& phi, const MetricSpec& spec,
                                       const SphereBundleMesh& mesh, const NumericPolicy& policy) {
  phi.require_positive(mesh);
  const std::vector<double> S = map_nodes(mesh, spec.direction_dependent(), [&](const Vec3& x, const Vec3& y) {
    return compute_geometry(spec, x, y, GeometryLevel::Curvature, policy).scalar_S;
  });
  const auto [lo, hi] = std::minmax_element(S.begin(), S.end());
  CurvatureSquareRecord r;
  r.S_spread = *hi - *lo;
  if (r.S_spread > 1e-6) {
    std::ostringstream os;
    os << "background scalar curvature varies by " << r.S_spread << " over the mesh";
    fail(ErrorKind::NonConstantScalarCurvature, os.str());
  }
  r.S = compensated_sum(S) / static_cast<double>(S.size());

  const Pointwise p = pointwise(phi, spec, mesh, true, policy);
  const std::size_t n = mesh.node_count();
  const MetricSpec deformed = conformal_deform(spec, phi);
  const bool per_dir = varies_with_direction(spec, phi);
  std::vector<double> rho_sq = map_nodes(mesh, per_dir, [&](const Vec3& x, const Vec3& y) {
    const GeometryAtPoint g = compute_geometry(deformed, x, y, GeometryLevel::Curvature, policy);
    double s = 0.0;
    for (const auto& row : g.ricci)
      for (double c : row) s += c * c;
    return s;
  });
  r.lhs = integral(mesh, combine(n, [&](std::size_t k) { return p.S_tilde[k] * p.S_tilde[k] * std::pow(p.phi[k], 6); }));
  r.a2 = integral(mesh, combine(n, [&](std::size_t k) {
           return (3.0 * p.S_tilde[k] * p.S_tilde[k] + 6.0 * rho_sq[k]) * std::pow(p.phi[k], 6);
         })) / 360.0;
  r.t1 = r.S * r.S * integral(mesh, combine(n, [&](std::size_t k) { return 1.0 / (p.phi[k] * p.phi[k]); }));
  r.parts_direct = integral(mesh, combine(n, [&](std::size_t k) { return p.lap[k] / std::pow(p.phi[k], 3); }));
  r.t2 = 16.0 * r.S * r.parts_direct;
  r.lap_sq = integral(mesh, combine(n, [&](std::size_t k) { return p.lap[k] * p.lap[k] / std::pow(p.phi[k], 4); }));
  r.t3 = 64.0 * r.lap_sq;
  r.identity_residual = relative_gap(r.lhs, r.t1 + r.t2 + r.t3);
  r.parts_rewritten =
      -3.0 * integral(mesh, combine(n, [&](std::size_t k) { return p.grad_sq[k] / std::pow(p.phi[k], 4); }));
  r.parts_residual = relative_gap(r.parts_direct, r.parts_rewritten);
  r.middle_rewritten = 16.0 * r.S * r.parts_rewritten;
  r.sign_consistent = r.S > 0.0 || r.middle_rewritten >= 0.0;
  r.lower_slack = r.middle_rewritten;
  r.upper_slack = 120.0 * r.a2 - r.lhs;
  return r;
}

LowerBoundRecord inverse_lower_bound(const ConformalFactor& phi, const MetricSpec& spec,
                                     const SphereBundleMesh& mesh, const GreenMatrix& G,
                                     const NumericPolicy& policy) {
  if (G.op().mesh().id() != mesh.id()) fail(ErrorKind::MeshMismatch, "Green matrix belongs to another mesh");
  return lower_bound_common(phi, spec, mesh, G.op(), &G, policy);
}

LowerBoundRecord inverse_lower_bound(const ConformalFactor& phi, const MetricSpec& spec,
                                     const SphereBundleMesh& mesh, const DiscreteOperator& op,
                                     const NumericPolicy& policy) {
  if (op.mesh().id() != mesh.id()) fail(ErrorKind::MeshMismatch, "operator belongs to another mesh");
  return lower_bound_common(phi, spec, mesh, op, nullptr, policy);
}

SobolevChainRecord sobolev_chain(const ConformalFactor& phi, const MetricSpec& spec,
                                         const SphereBundleMesh& mesh, double eps,
                                         std::optional<SobolevConstants> constants, const NumericPolicy& policy) {
  require_eps(eps);
  phi.require_positive(mesh);
  const bool per_dir = varies_with_direction(spec, phi);
  const ScalarField hat = phi.power(1.0 + eps);
  const std::size_t n = mesh.node_count();
  const std::vector<double> v = map_nodes(mesh, per_dir, [&](const Vec3& x, const Vec3& y) { return phi(x, y); });
  const std::vector<double> lap = map_nodes(
      mesh, per_dir, [&](const Vec3& x, const Vec3& y) { return horizontal_laplacian(phi.phi(), spec, x, y, policy); });
  const std::vector<double> grad_hat = map_nodes(mesh, per_dir, [&](const Vec3& x, const Vec3& y) {
    return covariant_derivative(hat, spec, x, y, 1, policy).norm_sq;
  });

  SobolevChainRecord r;
  r.eps = eps;
  r.lhs = std::cbrt(integral(mesh, combine(n, [&](std::size_t k) { return std::pow(v[k], 6.0 * (1.0 + eps)); })));
  r.grad_sq = integral(mesh, grad_hat);
  r.l2_sq = integral(mesh, combine(n, [&](std::size_t k) { return std::pow(v[k], 2.0 * (1.0 + eps)); }));
  r.c2_floor = r.lhs / r.l2_sq;
  r.constants = constants;
  if (constants) {
    r.rhs = constants->C1 * r.grad_sq + constants->C2 * r.l2_sq;
    r.slack = r.rhs - r.lhs;
  }
  r.energy_lhs = 8.0 * integral(mesh, combine(n, [&](std::size_t k) { return std::pow(v[k], 1.0 + 2.0 * eps) * lap[k]; }));
  r.energy_rhs = 8.0 * (1.0 + 2.0 * eps) / ((1.0 + eps) * (1.0 + eps)) * r.grad_sq;
  r.energy_residual = relative_gap(r.energy_lhs, r.energy_rhs);
  r.phi_six_eps = integral(mesh, combine(n, [&](std::size_t k) { return std::pow(v[k], 6.0 + eps); }));
  return r;
}

SobolevCalibration calibrate_sobolev(const std::vector<ConformalFactor>& family, const MetricSpec& spec,
                                     const SphereBundleMesh& mesh, double eps, double C2,
                                     const NumericPolicy& policy) {
  if (family.empty()) fail(ErrorKind::EmptyFamily, "calibration needs at least one factor");
  SobolevCalibration c;
  c.C2 = C2;
  for (const ConformalFactor& phi : family) {
    SobolevChainRecord r = sobolev_chain(phi, spec, mesh, eps, std::nullopt, policy);
    const double excess = r.lhs - C2 * r.l2_sq;
    if (excess > 0.0) {
      if (r.grad_sq <= 1e-14 * r.l2_sq) {
        std::ostringstream os;
        os << "C2 = " << C2 << " is below the floor " << r.c2_floor << " of a constant member";
        fail(ErrorKind::RequestRejected, os.str());
      }
      c.C1 = std::max(c.C1, excess / r.grad_sq);
    }
    c.members.push_back(std::move(r));
  }
  for (SobolevChainRecord& r : c.members) {
    r.constants = SobolevConstants{c.C1, c.C2};
    r.rhs = c.C1 * r.grad_sq + c.C2 * r.l2_sq;
    r.slack = r.rhs - r.lhs;
  }
  return c;
}

std::vector<BootstrapStep> bootstrap_exponents(double eps, double r_stop) {
  const long double r0 = 6.0L + static_cast<long double>(eps);
  if (!(eps > 0.0) || !(r0 < 12.0L)) {
    std::ostringstream os;
    os << "epsilon " << eps << " must be positive with 6 + epsilon < 12";
    fail(ErrorKind::InvalidEpsilon, os.str());
  }
  std::vector<BootstrapStep> out;
  long double r = r0;
  for (int k = 0;; ++k) {
    out.push_back({k, r, 2.0L * r / (4.0L + r)});
    if (r >= static_cast<long double>(r_stop) || r >= 12.0L || k == 64) break;
    const long double next = 6.0L * r / (12.0L - r);
    if (!(next > r)) fail(ErrorKind::FormulaMismatch, "bootstrap exponents failed to increase");
    r = next;
  }
  return out;
}

void ProbeConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::ConfigError, std::string(name) + " must be positive");
  };
  positive(alpha0, "alpha0");
  positive(alpha1, "alpha1");
  positive(alpha2, "alpha2");
  positive(Lambda, "Lambda");
  positive(a0_rtol, "a0_rtol");
}

std::vector<MemberMeasurement> measure_family(const std::vector<ConformalFactor>& family, const MetricSpec& spec,
                                              const ProbeConfig& config, const NumericPolicy& policy) {
  const SphereBundleMesh mesh = build_mesh(spec, config.resolution, config.directions, policy);
  std::vector<MemberMeasurement> out;
  out.reserve(family.size());
  for (const ConformalFactor& phi : family) {
    MemberMeasurement m;
    m.factor = phi.describe();
    try {
      phi.require_positive(mesh);
      HeatOptions ho;
      ho.curvature = config.curvature;
      const HeatInvariants h = heat_invariants(spec, phi, mesh, ho, policy);
      m.a0 = h.a0;
      m.a1 = h.a1_curvature_form;
      m.a2 = h.a2;
      const MetricSpec deformed = conformal_deform(spec, phi);
      const SphereBundleMesh dmesh = rebuild_mesh(deformed, mesh, policy);
      m.lambda1 = lambda1(assemble(deformed, dmesh, {}, policy), config.spectrum);
      const Extrema e = field_extrema(sample(phi.phi(), mesh), mesh);
      m.min_phi = e.min;
      m.max_phi = e.max;
      m.w22 = sobolev_norm(phi.phi(), mesh, spec, 2, 2.0, SobolevForm::QuadraticForm, policy);
      m.l2 = l2_bounds(phi, spec, mesh, policy);
      try {
        m.curvature_square = curvature_square_identity(phi, spec, mesh, policy);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::NonConstantScalarCurvature) throw;
        m.curvature_square_skipped = err.what();
      }
    } catch (const Error& err) {
      m.error = err.what();
    }
    out.push_back(std::move(m));
  }
  return out;
}

BoundsReport evaluate_family(const std::vector<MemberMeasurement>& measurements, const ProbeConfig& config) {
  config.validate();
  if (measurements.empty()) fail(ErrorKind::EmptyFamily, "the factor family is empty");
  BoundsReport rep;
  rep.config = config;
  for (const MemberMeasurement& m : measurements) {
    MemberRecord r;
    r.m = m;
    if (!m.error) {
      r.a0_deviation = std::abs(m.a0 - config.alpha0) / config.alpha0;
      r.volume_ok = r.a0_deviation <= config.a0_rtol;
      r.a1_ok = m.a1 <= config.alpha1;
      r.a2_ok = m.a2 <= config.alpha2;
      r.lambda_ok = m.lambda1 >= config.Lambda;
    }
    if (r.passed()) {
      ++rep.passing;
      rep.inf_min_phi = std::min(rep.inf_min_phi.value_or(m.min_phi), m.min_phi);
      rep.sup_max_phi = std::max(rep.sup_max_phi.value_or(m.max_phi), m.max_phi);
      rep.sup_w22 = std::max(rep.sup_w22.value_or(m.w22), m.w22);
    }
    rep.members.push_back(std::move(r));
  }
  return rep;
}

BoundsReport theorem_check(const std::vector<ConformalFactor>& family, const MetricSpec& spec,
                           const ProbeConfig& config, const NumericPolicy& policy) {
  config.validate();
  if (family.empty()) fail(ErrorKind::EmptyFamily, "the factor family is empty");
  return evaluate_family(measure_family(family, spec, config, policy), config);
}

ProbeConfig calibrate_caps(const std::vector<MemberMeasurement>& measurements, ProbeConfig base, double margin) {
  if (measurements.empty()) fail(ErrorKind::EmptyFamily, "the factor family is empty");
  double a1 = -std::numeric_limits<double>::infinity();
  double a2 = a1;
  double lam = std::numeric_limits<double>::infinity();
  for (const MemberMeasurement& m : measurements) {
    if (m.error) continue;
    a1 = std::max(a1, m.a1);
    a2 = std::max(a2, m.a2);
    lam = std::min(lam, m.lambda1);
  }
  if (!std::isfinite(lam)) fail(ErrorKind::RequestRejected, "no member was measured successfully");
  const double floor = 1e-12 * base.alpha0;
  base.alpha1 = std::max((1.0 + margin) * a1, floor);
  base.alpha2 = std::max((1.0 + margin) * a2, floor);
  base.Lambda = (1.0 - margin) * lam;
  return base;
}

std::vector<ConformalFactor> generate_family(const FamilyGenerator& gen, const SphereBundleMesh& mesh,
                                             double target_a0) {
  if (gen.count == 0) fail(ErrorKind::EmptyFamily, "family generator count is zero");
  if (gen.modes < 1 || gen.max_wavenumber < 1 || !(gen.amplitude >= 0.0 && gen.amplitude < 1.0)) {
    fail(ErrorKind::ConfigError, "family generator needs modes >= 1, wavenumber >= 1 and amplitude in [0, 1)");
  }
  if (gen.normalize_volume && !(target_a0 > 0.0)) fail(ErrorKind::ConfigError, "target a0 must be positive");
  std::mt19937_64 rng(gen.seed);
  std::uniform_int_distribution<int> wave(-gen.max_wavenumber, gen.max_wavenumber);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<ConformalFactor> out;
  for (std::size_t i = 0; i < gen.count; ++i) {
    std::ostringstream body;
    body << std::setprecision(17) << "1";
    for (int m = 0; m < gen.modes; ++m) {
      std::array<int, 3> k{};
      do {
        for (int& c : k) c = wave(rng);
      } while (k[0] == 0 && k[1] == 0 && k[2] == 0);
      const double a = unit(rng) * gen.amplitude / gen.modes;
      const bool use_sin = unit(rng) < 0.0;
      body << (a < 0.0 ? " - " : " + ") << std::abs(a) << "*" << (use_sin ? "sin" : "cos") << "(2*pi*(" << k[0]
           << "*x1 + " << k[1] << "*x2 + " << k[2] << "*x3))";
    }
    const ConformalFactor raw = ConformalFactor::parse(body.str());
    if (!gen.normalize_volume) {
      out.push_back(raw);
      continue;
    }
    const SampledField s = sample(raw.phi(), mesh);
    std::vector<double> six(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) six[k] = std::pow(s[k], 6);
    const double c = std::pow(target_a0 / integral(mesh, std::move(six)), 1.0 / 6.0);
    std::ostringstream text;
    text << std::setprecision(17) << c << "*(" << body.str() << ")";
    out.push_back(ConformalFactor::parse(text.str()));
  }
  return out;
}

void write_bounds_csv(const BoundsReport& report, std::ostream& out) {
  out << std::setprecision(12);
  out << "member,factor,a0,a1,a2,lambda1,flag_i,flag_ii,flag_iii,flag_iv,passed,min_phi,max_phi,w22,"
         "phi_sq,holder_bound,grad_sq,l2_identity_residual,curv_sq,lap_sq,s_sq_term,curv_identity_residual,"
         "parts_residual,error\n";
  for (std::size_t i = 0; i < report.members.size(); ++i) {
    const MemberRecord& r = report.members[i];
    const MemberMeasurement& m = r.m;
    out << i << ",\"" << m.factor << "\"," << m.a0 << "," << m.a1 << "," << m.a2 << "," << m.lambda1 << ","
        << r.volume_ok << "," << r.a1_ok << "," << r.a2_ok << "," << r.lambda_ok << "," << r.passed() << ","
        << m.min_phi << "," << m.max_phi << "," << m.w22 << "," << m.l2.phi_sq << "," << m.l2.holder_bound << ","
        << m.l2.grad_sq << "," << m.l2.identity_residual << ",";
    if (m.curvature_square) {
      const CurvatureSquareRecord& c = *m.curvature_square;
      out << c.lhs << "," << c.lap_sq << "," << c.t1 << "," << c.identity_residual << "," << c.parts_residual;
    } else {
      out << ",,,,";
    }
    out << ",\"" << (m.error ? *m.error : m.curvature_square_skipped.value_or("")) << "\"\n";
  }
  const ProbeConfig& c = report.config;
  out << "# alpha0=" << c.alpha0 << " alpha1=" << c.alpha1 << " alpha2=" << c.alpha2 << " Lambda=" << c.Lambda
      << " a0_rtol=" << c.a0_rtol << "\n";
  out << "# resolution=" << c.resolution[0] << "x" << c.resolution[1] << "x" << c.resolution[2]
      << " curvature=" << to_string(c.curvature) << "\n";
  out << "# members=" << report.members.size() << " passing=" << report.passing << "\n";
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream os;
    os << std::setprecision(12);
    if (v) {
      os << *v;
    } else {
      os << "none";
    }
    return os.str();
  };
  out << "# envelope inf_min_phi=" << opt(report.inf_min_phi) << " sup_max_phi=" << opt(report.sup_max_phi)
      << " sup_w22=" << opt(report.sup_w22) << "\n";
  out << "# max_identity_residual=" << max_identity_residual(report) << "\n";
  out << "# envelopes are measured over passing members and are not certified constants\n";
}

double max_identity_residual(const BoundsReport& report) {
  double worst = 0.0;
  for (const MemberRecord& r : report.members) {
    if (r.m.error) continue;
    worst = std::max(worst, r.m.l2.identity_residual);
    if (r.m.curvature_square) {
      worst = std::max({worst, r.m.curvature_square->identity_residual, r.m.curvature_square->parts_residual});
    }
  }
  return worst;
}

}  // namespace finsler
