#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "finsler/conformal.hpp"
#include "finsler/mesh.hpp"
#include "finsler/metric.hpp"
#include "finsler/numeric_policy.hpp"
#include "finsler/spectral.hpp"

namespace finsler {

/// |a - b| / max(|a|, |b|), zero when both vanish.
double relative_gap(double a, double b);

/// Integral quantities controlling int phi^2 and int |grad phi|^2.
struct L2Record {
  double volume = 0.0;             // vol(SM) of the undeformed mesh
  double phi_sq = 0.0;             // int phi^2 eta
  double phi_six = 0.0;            // int phi^6 eta = a0~
  double holder_bound = 0.0;       // (int phi^6)^(1/3) vol^(2/3)
  double holder_slack = 0.0;       // holder_bound - phi_sq
  double grad_sq = 0.0;            // int |grad phi|^2 eta
  double s_phi_sq = 0.0;           // int S phi^2 eta
  double a1 = 0.0;                 // (1/6) int S~ phi^6 eta
  double identity_lhs = 0.0;       // (4/3) grad_sq
  double identity_rhs = 0.0;       // a1 - s_phi_sq / 6
  double identity_residual = 0.0;  // relative
};

/// PRE phi > 0 on the mesh (NonPositiveFactor).
L2Record l2_bounds(const ConformalFactor& phi, const MetricSpec& spec, const SphereBundleMesh& mesh,
                        const NumericPolicy& policy = default_policy());

/// Expansion of int S~^2 eta~ for constant background curvature S. The
/// Laplacian is the positive one, so the cross term carries +16.
struct CurvatureSquareRecord {
  double S = 0.0;
  double S_spread = 0.0;            // sup - inf of S over the mesh
  double lhs = 0.0;                 // int S~^2 phi^6 eta, direct curvature
  double t1 = 0.0;                  // int S^2 phi^-2 eta
  double t2 = 0.0;                  // 16 S int phi^-3 Lap phi eta
  double t3 = 0.0;                  // 64 int (Lap phi)^2 phi^-4 eta
  double lap_sq = 0.0;              // int (Lap phi)^2 phi^-4 eta
  double identity_residual = 0.0;   // lhs against t1 + t2 + t3
  double parts_direct = 0.0;        // int phi^-3 Lap phi eta
  double parts_rewritten = 0.0;     // -3 int |grad phi|^2 phi^-4 eta
  double parts_residual = 0.0;
  double middle_rewritten = 0.0;    // -48 S int |grad phi|^2 phi^-4 eta
  bool sign_consistent = true;      // S <= 0 implies the middle term is >= 0
  double a2 = 0.0;
  double lower_slack = 0.0;         // lhs - (t1 + t3) through the rewritten middle term
  double upper_slack = 0.0;         // 120 a2 - lhs
};

/// NonConstantScalarCurvature when S varies by more than 1e-6 over the mesh.
CurvatureSquareRecord curvature_square_identity(const ConformalFactor& phi, const MetricSpec& spec,
                                       const SphereBundleMesh& mesh, const NumericPolicy& policy = default_policy());

struct LowerBoundRecord {
  double green_residual = 0.0;       // sup |1/phi - mean - G M Lap_h(1/phi)| / sup 1/phi
  double green_consistency = 0.0;    // same with the jet Laplacian of 1/phi; a discretization error
  double chain_rule_residual = 0.0;  // jets Lap(1/phi) against -Lap phi / phi^2 - 2 |grad phi|^2 / phi^3
  double mean_inverse = 0.0;         // vol^-1 int phi^-1 eta
  double cs_bound = 0.0;             // vol^-1/2 (int phi^-2 eta)^1/2
  double cs_slack = 0.0;
  double c1 = 0.0;                   // 1 / sup(1/phi) = min phi
  double s_term = 0.0;               // (int S^2 phi^-2 eta)^1/2
  double s_tilde_term = 0.0;         // (int S~^2 phi^6 eta)^1/2
  std::optional<double> green_min;   // smallest entry of the dense Green matrix
  std::optional<double> green_max_abs;
};

/// Uses the dense Green matrix of the undeformed operator.
LowerBoundRecord inverse_lower_bound(const ConformalFactor& phi, const MetricSpec& spec,
                                     const SphereBundleMesh& mesh, const GreenMatrix& G,
                                     const NumericPolicy& policy = default_policy());
/// Per-source sparse or iterative solves; no Green matrix entries reported.
LowerBoundRecord inverse_lower_bound(const ConformalFactor& phi, const MetricSpec& spec,
                                     const SphereBundleMesh& mesh, const DiscreteOperator& op,
                                     const NumericPolicy& policy = default_policy());

struct SobolevConstants {
  double C1 = 0.0;
  double C2 = 0.0;
};

/// Sobolev chain for phi^ = phi^(1 + eps).
struct SobolevChainRecord {
  double eps = 0.0;
  double lhs = 0.0;              // (int phi^^6 eta)^(1/3)
  double grad_sq = 0.0;          // int |grad phi^|^2 eta
  double l2_sq = 0.0;            // int phi^^2 eta
  std::optional<SobolevConstants> constants;
  double rhs = 0.0;              // C1 grad_sq + C2 l2_sq when constants are given
  double slack = 0.0;
  double c2_floor = 0.0;         // lhs / l2_sq, the C2 needed with C1 = 0
  double energy_lhs = 0.0;       // 8 int phi^(1+2eps) Lap phi eta
  double energy_rhs = 0.0;       // 8 (1+2eps)/(1+eps)^2 int |grad phi^|^2 eta
  double energy_residual = 0.0;
  double phi_six_eps = 0.0;      // int phi^(6+eps) eta
};

/// EpsilonOutOfRange unless 0 < eps < 2.
SobolevChainRecord sobolev_chain(const ConformalFactor& phi, const MetricSpec& spec,
                                         const SphereBundleMesh& mesh, double eps,
                                         std::optional<SobolevConstants> constants = std::nullopt,
                                         const NumericPolicy& policy = default_policy());

struct SobolevCalibration {
  double C1 = 0.0;  // smallest C1 making every member satisfy the chain with C2 fixed
  double C2 = 0.0;
  std::vector<SobolevChainRecord> members;
};

/// RequestRejected when C2 is below a constant member's floor, since no C1 helps there.
SobolevCalibration calibrate_sobolev(const std::vector<ConformalFactor>& family, const MetricSpec& spec,
                                     const SphereBundleMesh& mesh, double eps, double C2,
                                     const NumericPolicy& policy = default_policy());

struct BootstrapStep {
  int k = 0;
  long double r = 0.0L;
  long double p = 0.0L;  // 2 r / (4 + r)
};

/// r_0 = 6 + eps and r_{k+1} = 6 r_k / (12 - r_k) until r_k >= r_stop or
/// k = 64. InvalidEpsilon when eps <= 0 or r_0 >= 12.
std::vector<BootstrapStep> bootstrap_exponents(double eps, double r_stop = 12.0);

struct ProbeConfig {
  double alpha0 = 4.0 * 3.14159265358979323846;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double Lambda = 1.0;
  double a0_rtol = 1e-6;
  std::array<int, 3> resolution{16, 16, 16};
  DirectionRule directions = DirectionRule::ico(0);
  CurvatureSource curvature = CurvatureSource::Direct;
  SpectrumOptions spectrum{};

  /// ConfigError unless every cap and tolerance is positive.
  void validate() const;
};

/// Config-independent measurements of one family member.
struct MemberMeasurement {
  std::string factor;
  std::optional<std::string> error;
  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  double lambda1 = 0.0;
  double min_phi = 0.0, max_phi = 0.0;
  double w22 = 0.0;  // (int phi^2 + |grad phi|^2 + |grad^2 phi|^2)^(1/2)
  L2Record l2;
  std::optional<CurvatureSquareRecord> curvature_square;
  std::optional<std::string> curvature_square_skipped;
};

struct MemberRecord {
  MemberMeasurement m;
  bool volume_ok = false;  // (i) |a0 - alpha0| <= a0_rtol alpha0
  bool a1_ok = false;      // (ii) a1 <= alpha1
  bool a2_ok = false;      // (iii) a2 <= alpha2
  bool lambda_ok = false;  // (iv) lambda1 >= Lambda
  double a0_deviation = 0.0;
  bool passed() const { return !m.error && volume_ok && a1_ok && a2_ok && lambda_ok; }
};

/// Envelopes are measured over passing members, not certified constants.
struct BoundsReport {
  ProbeConfig config;
  std::vector<MemberRecord> members;
  std::size_t passing = 0;
  std::optional<double> inf_min_phi;
  std::optional<double> sup_max_phi;
  std::optional<double> sup_w22;
};

/// The mesh is built from config for `spec`; lambda1 is taken on the mesh of
/// the deformed metric. Member errors are recorded in place.
std::vector<MemberMeasurement> measure_family(const std::vector<ConformalFactor>& family, const MetricSpec& spec,
                                              const ProbeConfig& config,
                                              const NumericPolicy& policy = default_policy());
/// EmptyFamily on an empty list.
BoundsReport evaluate_family(const std::vector<MemberMeasurement>& measurements, const ProbeConfig& config);
BoundsReport theorem_check(const std::vector<ConformalFactor>& family, const MetricSpec& spec,
                           const ProbeConfig& config, const NumericPolicy& policy = default_policy());

/// Caps at (1 + margin) times the largest measured a1, a2 (floored at
/// 1e-12 alpha0) and Lambda at (1 - margin) times the smallest lambda1.
ProbeConfig calibrate_caps(const std::vector<MemberMeasurement>& measurements, ProbeConfig base,
                           double margin = 0.1);

/// Factors c (1 + sum_m a_m trig(2 pi k_m . x)) with sum |a_m| <= amplitude,
/// integer wave vectors of sup norm at most max_wavenumber, and c chosen so
/// that int phi^6 eta equals target_a0 on `mesh`.
struct FamilyGenerator {
  std::size_t count = 10;
  int modes = 3;
  int max_wavenumber = 2;
  double amplitude = 0.1;
  std::uint64_t seed = 0x5eed;
  bool normalize_volume = true;
};

std::vector<ConformalFactor> generate_family(const FamilyGenerator& gen, const SphereBundleMesh& mesh,
                                             double target_a0);

/// One row per member, then '#' summary lines.
void write_bounds_csv(const BoundsReport& report, std::ostream& out);

/// Largest identity residual recorded on passing and failing members alike.
double max_identity_residual(const BoundsReport& report);

}  // namespace finsler
