#pragma once

// Run configuration: a plain-text file of [section] headers and
// `key = value` lines. '#' and ';' start comments. Sections and keys:
//
//   [metric]    kind = euclidean | riemannian | randers | closed_form
//               a11 a12 a13 a22 a23 a33 = expr   (riemannian, randers)
//               b1 b2 b3 = expr                  (randers)
//               F = expr                         (closed_form)
//               periods = L1 L2 L3
//   [mesh]      resolution = N1 N2 N3
//               directions = ico LEVEL | product NTHETA NPHI | single Y1 Y2 Y3
//   [factor]    phi = expr                       (repeatable, kept in order)
//               generate = true | false
//               count, modes, max_wavenumber, amplitude, seed,
//               normalize_volume, target_a0
//   [probe]     alpha0 alpha1 alpha2 Lambda a0_rtol
//               curvature = direct | predicted
//               calibrate = true | false, margin
//               identity_tolerance, heat_tolerance
//   [spectrum]  m, tolerance, dense_limit, isospec_tolerance
//   [yamabe]    laplacian = jets | stencil, tolerance
//   [output]    dir, formats = csv[, plot]

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finsler/bounds.hpp"
#include "finsler/conformal.hpp"
#include "finsler/mesh.hpp"
#include "finsler/metric.hpp"

namespace finsler::cli {

struct MetricBlock {
  std::string kind = "euclidean";
  std::array<std::string, 6> a{"1", "0", "0", "1", "0", "1"};
  std::array<std::string, 3> b{"0", "0", "0"};
  std::string F;
  std::array<double, 3> periods{1.0, 1.0, 1.0};
};

struct MeshBlock {
  std::array<int, 3> resolution{16, 16, 16};
  DirectionRule directions = DirectionRule::ico(1);
};

struct FactorBlock {
  std::vector<std::string> expressions;
  bool generate = false;
  FamilyGenerator generator{};
  std::optional<double> target_a0;  // defaults to the undeformed volume
};

struct ProbeBlock {
  bool present = false;
  double alpha0 = 4.0 * 3.14159265358979323846;
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double Lambda = 1.0;
  double a0_rtol = 1e-6;
  CurvatureSource curvature = CurvatureSource::Direct;
  bool calibrate = false;
  double margin = 0.1;
  double identity_tolerance = 1e-6;
  double heat_tolerance = 0.0;
};

struct SpectrumBlock {
  std::size_t m = 10;
  double tolerance = 1e-8;
  std::size_t dense_limit = 3000;
  double isospec_tolerance = 1e-8;
};

struct YamabeBlock {
  LaplacianSource laplacian = LaplacianSource::Jets;
  double tolerance = 0.0;  // 0 reports without judging
};

struct OutputBlock {
  std::string dir = ".";
  bool csv = true;
  bool plot = false;
};

struct RunConfig {
  MetricBlock metric;
  MeshBlock mesh;
  FactorBlock factor;
  bool factor_present = false;
  ProbeBlock probe;
  SpectrumBlock spectrum;
  YamabeBlock yamabe;
  OutputBlock output;
  // `section.key=value` lines in file order, the input to the config hash.
  std::vector<std::string> canonical;
};

/// ConfigError naming `origin`, the line and the field on any malformed,
/// unknown, duplicate or out-of-range entry. Expressions are parsed here.
RunConfig parse_run_config(std::string_view text, const std::string& origin = "<config>");
/// IoError when the file cannot be read.
RunConfig load_run_config(const std::string& path);

MetricSpec build_metric(const RunConfig& config);
/// Expression factors first, then generated ones. An absent factor block
/// means the single factor phi = 1.
std::vector<ConformalFactor> build_family(const RunConfig& config, const SphereBundleMesh& mesh);
ProbeConfig build_probe_config(const RunConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::string config_hash(const RunConfig& config);

}  // namespace finsler::cli
