#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "finsler/bounds.hpp"
#include "finsler/conformal.hpp"
#include "finsler/error.hpp"
#include "finsler/geometry.hpp"
#include "finsler/spectral.hpp"
#include "run_config.hpp"

namespace finsler::cli {

namespace {

struct Options {
  std::string command;
  std::string config_path;
  std::optional<std::string> out_dir;
  int threads = 0;
  bool check = false;
  std::optional<std::size_t> m;
  std::optional<double> bootstrap;
  std::optional<double> tol;
  std::vector<double> x{0.0, 0.0, 0.0};
  std::vector<double> y{1.0, 0.0, 0.0};
};

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string short_num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string quoted(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

class Context {
 public:
  Context(const Options& o, RunConfig c, std::ostream& out) : opt(o), config(std::move(c)), out_(out) {
    if (opt.out_dir) config.output.dir = *opt.out_dir;
    if (opt.m) config.canonical.push_back("override.m=" + std::to_string(*opt.m));
    if (opt.tol) config.canonical.push_back("override.tol=" + num(*opt.tol));
    if (opt.bootstrap) config.canonical.push_back("override.bootstrap=" + num(*opt.bootstrap));
    hash = config_hash(config);
  }

  std::string metadata() const {
    std::ostringstream os;
    os << "# tool=" << tool_name << " version=" << tool_version << "\n";
    os << "# command=" << opt.command << "\n";
    os << "# config_hash=fnv1a64:" << hash << "\n";
    return os.str();
  }

  /// Writes `<stem>.csv` and, when requested, `<stem>.plot.dat`.
  void emit(const std::string& stem, const std::string& csv_body, const std::string& plot_header,
            const std::vector<std::pair<double, double>>& series) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(config.output.dir, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create output directory '" + config.output.dir + "': " + ec.message());
    auto write = [&](const std::string& name, const std::string& body) {
      const fs::path p = fs::path(config.output.dir) / name;
      std::ofstream f(p, std::ios::binary);
      f << body << metadata();
      if (!f) fail(ErrorKind::IoError, "cannot write '" + p.string() + "'");
      out_ << "wrote " << p.string() << "\n";
    };
    if (config.output.csv) write(stem + ".csv", csv_body);
    if (config.output.plot) {
      std::ostringstream os;
      os << "# " << plot_header << "\n";
      for (const auto& [a, b] : series) os << num(a) << " " << num(b) << "\n";
      write(stem + ".plot.dat", os.str());
    }
  }

  SphereBundleMesh mesh(const MetricSpec& spec) const {
    return build_mesh(spec, config.mesh.resolution, config.mesh.directions);
  }

  SpectrumOptions spectrum_options() const {
    SpectrumOptions s;
    s.tolerance = config.spectrum.tolerance;
    s.dense_limit = config.spectrum.dense_limit;
    s.want_vectors = false;
    return s;
  }

  const Options& opt;
  RunConfig config;
  std::string hash;

  std::ostream& out() const { return out_; }

 private:
  std::ostream& out_;
};

double gnorm3(const Tensor3& t, const Mat3& up0, const Mat3& lo1, const Mat3& lo2) {
  // sum over t[i][j][k] t[a][b][c] up0[i][a] lo1[j][b] lo2[k][c]
  double s = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 3; ++a)
      for (int j = 0; j < 3; ++j)
        for (int b = 0; b < 3; ++b)
          for (int k = 0; k < 3; ++k)
            for (int c = 0; c < 3; ++c) s += t[i][j][k] * t[a][b][c] * up0[i][a] * lo1[j][b] * lo2[k][c];
  return std::sqrt(std::max(s, 0.0));
}

Vec3 to_vec(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

int cmd_geom(const Context& ctx) {
  const MetricSpec spec = build_metric(ctx.config);
  const Vec3 x = to_vec(ctx.opt.x), y = to_vec(ctx.opt.y);
  const GeometryAtPoint p = compute_geometry(spec, x, y, GeometryLevel::Curvature);
  const double a_norm = gnorm3(p.cartan, p.g_inv, p.g_inv, p.g_inv);
  const double gamma_norm = gnorm3(p.gamma, p.g, p.g_inv, p.g_inv);

  std::ostringstream os;
  os << "quantity,value\n";
  os << "F," << num(p.F) << "\n";
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) os << "g" << i + 1 << j + 1 << "," << num(p.g[i][j]) << "\n";
  os << "A_norm," << num(a_norm) << "\n";
  for (int i = 0; i < 3; ++i) os << "G" << i + 1 << "," << num(p.spray[i]) << "\n";
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) os << "N" << i + 1 << "_" << j + 1 << "," << num(p.N[i][j]) << "\n";
  os << "Gamma_norm," << num(gamma_norm) << "\n";
  os << "S," << num(p.scalar_S) << "\n";
  ctx.out() << os.str() << ctx.metadata();
  if (!ctx.opt.check) return Success;

  // Scaling and Euler laws at (x, y) over a spread of scales.
  const double tol = ctx.opt.tol.value_or(1e-9);
  double dF = 0.0, dg = 0.0, dA = 0.0, dG = 0.0, dN = 0.0, dS = 0.0, d_euler = 0.0, d_ay = 0.0, d_ny = 0.0;
  double amax = 1.0, gmax = 1.0, nmax = 1.0;
  for (int i = 0; i < 3; ++i) {
    gmax = std::max(gmax, std::abs(p.spray[i]));
    for (int j = 0; j < 3; ++j) {
      nmax = std::max(nmax, std::abs(p.N[i][j]));
      for (int k = 0; k < 3; ++k) amax = std::max(amax, std::abs(p.cartan[i][j][k]));
    }
  }
  double gscale = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) gscale = std::max(gscale, std::abs(p.g[i][j]));
  const double sscale = std::max(1.0, std::abs(p.scalar_S));

  double euler = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) euler += p.g[i][j] * y[i] * y[j];
  d_euler = std::abs(euler - p.F * p.F) / (p.F * p.F);
  for (int i = 0; i < 3; ++i) {
    double ny = 0.0;
    for (int j = 0; j < 3; ++j) {
      ny += p.N[i][j] * y[j];
      double ay = 0.0;
      for (int k = 0; k < 3; ++k) ay += p.cartan[i][j][k] * y[k];
      d_ay = std::max(d_ay, std::abs(ay) / amax);
    }
    d_ny = std::max(d_ny, std::abs(ny - 2.0 * p.spray[i]) / gmax);
  }
  for (double k : {0.25, 0.5, 2.0, 3.7, 10.0}) {
    const Vec3 ky{k * y[0], k * y[1], k * y[2]};
    const GeometryAtPoint q = compute_geometry(spec, x, ky, GeometryLevel::Curvature);
    dF = std::max(dF, std::abs(q.F - k * p.F) / (k * p.F));
    dS = std::max(dS, std::abs(q.scalar_S - p.scalar_S) / sscale);
    for (int i = 0; i < 3; ++i) {
      dG = std::max(dG, std::abs(q.spray[i] - k * k * p.spray[i]) / (k * k * gmax));
      for (int j = 0; j < 3; ++j) {
        dg = std::max(dg, std::abs(q.g[i][j] - p.g[i][j]) / gscale);
        dN = std::max(dN, std::abs(q.N[i][j] - k * p.N[i][j]) / (k * nmax));
        for (int l = 0; l < 3; ++l) dA = std::max(dA, std::abs(q.cartan[i][j][l] - p.cartan[i][j][l]) / amax);
      }
    }
  }
  const double worst = std::max({dF, dg, dA, dG, dN, dS, d_euler, d_ay, d_ny});
  const bool pass = worst <= tol;
  ctx.out() << (pass ? "PASS" : "FAIL") << " homogeneity/Euler suite (tol " << short_num(tol) << "): max deviations"
            << " F=" << num(dF) << " g=" << num(dg) << " A=" << num(dA) << " G=" << num(dG) << " N=" << num(dN)
            << " S=" << num(dS) << " euler=" << num(d_euler) << " A.y=" << num(d_ay) << " N.y=" << num(d_ny)
            << "\n";
  return pass ? Success : NumericFailure;
}

int cmd_invariants(const Context& ctx) {
  const MetricSpec spec = build_metric(ctx.config);
  const SphereBundleMesh mesh = ctx.mesh(spec);
  const std::vector<ConformalFactor> family = build_family(ctx.config, mesh);
  if (family.empty()) fail(ErrorKind::EmptyFamily, "the factor family is empty");
  HeatOptions ho;
  ho.tolerance = ctx.opt.tol.value_or(ctx.config.probe.heat_tolerance);
  ho.curvature = ctx.config.probe.curvature;

  std::ostringstream os;
  os << "factor_id,factor,a0,a1,a2,a0_error,a1_error,a2_error,a1_curvature_form\n";
  std::vector<std::pair<double, double>> series;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const HeatInvariants h = heat_invariants(spec, family[i], mesh, ho);
    os << i + 1 << "," << quoted(family[i].describe()) << "," << num(h.a0) << "," << num(h.a1) << "," << num(h.a2)
       << "," << num(h.a0_error) << "," << num(h.a1_error) << "," << num(h.a2_error) << ","
       << num(h.a1_curvature_form) << "\n";
    series.emplace_back(static_cast<double>(i + 1), h.a2);
  }
  ctx.emit("invariants", os.str(), "factor_id a2", series);
  ctx.out() << family.size() << " factor(s)\n";
  return Success;
}

int cmd_spectrum(const Context& ctx) {
  const MetricSpec spec = build_metric(ctx.config);
  const SphereBundleMesh mesh = ctx.mesh(spec);
  const std::size_t m = ctx.opt.m.value_or(ctx.config.spectrum.m);
  const Spectrum s = spectrum(assemble(spec, mesh), m, ctx.spectrum_options());
  std::ostringstream os;
  os << "index,eigenvalue,residual\n";
  std::vector<std::pair<double, double>> series;
  for (std::size_t k = 0; k < s.eigenvalues.size(); ++k) {
    os << k << "," << num(s.eigenvalues[k]) << "," << num(s.residuals[k]) << "\n";
    series.emplace_back(static_cast<double>(k), s.eigenvalues[k]);
  }
  os << "# method=" << to_string(s.method) << " nodes=" << mesh.node_count() << "\n";
  ctx.emit("spectrum", os.str(), "index eigenvalue", series);
  ctx.out() << s.eigenvalues.size() << " eigenvalue(s), method " << to_string(s.method) << "\n";
  return Success;
}

int cmd_isospec(const Context& ctx) {
  const MetricSpec spec = build_metric(ctx.config);
  const SphereBundleMesh mesh = ctx.mesh(spec);
  const std::vector<ConformalFactor> family = build_family(ctx.config, mesh);
  if (family.empty()) fail(ErrorKind::EmptyFamily, "the factor family is empty");
  const std::size_t m = ctx.opt.m.value_or(ctx.config.spectrum.m);
  const double tol = ctx.opt.tol.value_or(ctx.config.spectrum.isospec_tolerance);

  std::ostringstream os;
  os << "member,factor,verdict,max_gap,tolerance,m\n";
  std::vector<std::pair<double, double>> series;
  std::size_t same = 0;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const MetricSpec deformed = conformal_deform(spec, family[i]);
    const IsospectralReport r = isospectral_compare(spec, deformed, mesh, m, tol, ctx.spectrum_options());
    os << i + 1 << "," << quoted(family[i].describe()) << "," << (r.verdict ? "true" : "false") << ","
       << num(r.max_relative_gap) << "," << num(r.tolerance) << "," << m << "\n";
    series.emplace_back(static_cast<double>(i + 1), r.max_relative_gap);
    same += r.verdict ? 1 : 0;
  }
  os << "# verdict: discrete isospectrality of the first m eigenvalues up to tolerance\n";
  ctx.emit("isospec", os.str(), "member max_gap", series);
  ctx.out() << same << " of " << family.size() << " member(s) isospectral to the base metric\n";
  return Success;
}

int cmd_yamabe(const Context& ctx) {
  const MetricSpec spec = build_metric(ctx.config);
  const SphereBundleMesh mesh = ctx.mesh(spec);
  const std::vector<ConformalFactor> family = build_family(ctx.config, mesh);
  if (family.empty()) fail(ErrorKind::EmptyFamily, "the factor family is empty");
  YamabeOptions yo;
  yo.curvature = ctx.config.probe.curvature;
  yo.laplacian = ctx.config.yamabe.laplacian;
  const double tol = ctx.opt.tol.value_or(ctx.config.yamabe.tolerance);

  std::ostringstream os;
  os << "member,factor,sup_norm,l2_norm,curvature,laplacian,within_tolerance\n";
  std::vector<std::pair<double, double>> series;
  bool ok = true;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const YamabeReport r = yamabe_residual(spec, family[i], mesh, yo);
    const bool within = tol <= 0.0 || r.sup_norm <= tol;
    ok = ok && within;
    os << i + 1 << "," << quoted(family[i].describe()) << "," << num(r.sup_norm) << "," << num(r.l2_norm) << ","
       << to_string(r.curvature) << "," << (yo.laplacian == LaplacianSource::Jets ? "jets" : "stencil") << ","
       << (tol <= 0.0 ? "unchecked" : (within ? "true" : "false")) << "\n";
    series.emplace_back(static_cast<double>(i + 1), r.sup_norm);
  }
  ctx.emit("yamabe", os.str(), "member sup_norm", series);
  if (!ok) ctx.out() << "Yamabe residual above tolerance " << short_num(tol) << "\n";
  return ok ? Success : NumericFailure;
}

int cmd_bootstrap(const Context& ctx, double eps) {
  const std::vector<BootstrapStep> steps = bootstrap_exponents(eps);
  std::ostringstream os;
  os << "k,r_k,p_k\n";
  std::vector<std::pair<double, double>> series;
  for (const BootstrapStep& s : steps) {
    os << s.k << "," << num(static_cast<double>(s.r)) << "," << num(static_cast<double>(s.p)) << "\n";
    series.emplace_back(static_cast<double>(s.k), static_cast<double>(s.r));
  }
  os << "# eps=" << num(eps) << "\n";
  ctx.out() << os.str();
  ctx.emit("bootstrap", os.str(), "k r_k", series);
  return Success;
}

int cmd_probe(const Context& ctx) {
  if (ctx.opt.bootstrap) return cmd_bootstrap(ctx, *ctx.opt.bootstrap);
  if (!ctx.config.probe.present) fail(ErrorKind::ConfigError, "probe requires a [probe] section");
  const MetricSpec spec = build_metric(ctx.config);
  const SphereBundleMesh mesh = ctx.mesh(spec);
  const std::vector<ConformalFactor> family = build_family(ctx.config, mesh);
  ProbeConfig pc = build_probe_config(ctx.config);
  pc.validate();
  const std::vector<MemberMeasurement> meas = measure_family(family, spec, pc);
  if (ctx.config.probe.calibrate && !meas.empty()) pc = calibrate_caps(meas, pc, ctx.config.probe.margin);
  const BoundsReport rep = evaluate_family(meas, pc);

  std::ostringstream os;
  write_bounds_csv(rep, os);
  std::vector<std::pair<double, double>> series;
  std::size_t errored = 0;
  for (std::size_t i = 0; i < rep.members.size(); ++i) {
    series.emplace_back(static_cast<double>(i), rep.members[i].m.lambda1);
    errored += rep.members[i].m.error ? 1 : 0;
  }
  ctx.emit("probe", os.str(), "member lambda1", series);

  const double tol = ctx.opt.tol.value_or(ctx.config.probe.identity_tolerance);
  const double resid = max_identity_residual(rep);
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string("none"); };
  ctx.out() << "members=" << rep.members.size() << " passing=" << rep.passing << " errored=" << errored
            << " max_identity_residual=" << num(resid) << " (tol " << short_num(tol) << ")\n";
  ctx.out() << "envelope inf_min_phi=" << opt(rep.inf_min_phi) << " sup_max_phi=" << opt(rep.sup_max_phi)
            << " sup_w22=" << opt(rep.sup_w22) << " (measured, not certified)\n";
  for (std::size_t i = 0; i < rep.members.size(); ++i)
    if (rep.members[i].m.error) ctx.out() << "member " << i << " error: " << *rep.members[i].m.error << "\n";
  return (errored > 0 || resid > tol) ? NumericFailure : Success;
}

}  // namespace

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
    case ErrorKind::InvalidEpsilon:
    case ErrorKind::EpsilonOutOfRange:
    case ErrorKind::RequestRejected:
      return ConfigFailure;
    case ErrorKind::ConvergenceFailure:
      return ConvergenceFailed;
    default:
      return NumericFailure;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Finsler geometry queries, heat invariants, spectra, Yamabe residuals and compactness probes",
               tool_name};
  app.set_version_flag("--version", std::string(tool_name) + " " + tool_version);
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub, bool needs_config = true) {
    auto* c = sub->add_option("--config", o.config_path, "run configuration file");
    if (needs_config) c->required();
    sub->add_option("--out", o.out_dir, "output directory (overrides [output] dir)");
    sub->add_option("--threads", o.threads, "worker threads; 1 selects reproducibility mode")
        ->check(CLI::NonNegativeNumber);
  };
  CLI::App* geom = app.add_subcommand("geom", "geometry at one point (x, y)");
  common(geom);
  geom->add_option("--x", o.x, "base point x1 x2 x3")->expected(3);
  geom->add_option("--y", o.y, "direction y1 y2 y3")->expected(3);
  geom->add_flag("--check", o.check, "run the homogeneity/Euler suite at the point");
  geom->add_option("--tol", o.tol, "relative tolerance of --check (default 1e-9)");

  CLI::App* inv = app.add_subcommand("invariants", "heat invariants of every factor");
  common(inv);
  inv->add_option("--tol", o.tol, "quadrature-error tolerance; MeshTooCoarse above it");

  CLI::App* spec = app.add_subcommand("spectrum", "first eigenvalues of the base metric");
  common(spec);
  spec->add_option("--m", o.m, "number of eigenvalues")->check(CLI::Range(1, 200));

  CLI::App* iso = app.add_subcommand("isospec", "base metric against each deformed member");
  common(iso);
  iso->add_option("--m", o.m, "number of eigenvalues compared")->check(CLI::Range(1, 200));
  iso->add_option("--tol", o.tol, "relative gap tolerance");

  CLI::App* yam = app.add_subcommand("yamabe", "Yamabe residual of every factor");
  common(yam);
  yam->add_option("--tol", o.tol, "sup-norm tolerance; exit 3 above it");

  CLI::App* probe = app.add_subcommand("probe", "compactness probe over the factor family");
  common(probe, false);
  probe->add_option("--bootstrap", o.bootstrap, "print the exponent table for EPS instead");
  probe->add_option("--tol", o.tol, "identity-residual tolerance");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? Success : ConfigFailure;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    if (o.threads > 0) {
#ifdef _OPENMP
      omp_set_num_threads(o.threads);
#endif
    }
    RunConfig config;
    if (!o.config_path.empty()) {
      config = load_run_config(o.config_path);
    } else if (!(o.command == "probe" && o.bootstrap)) {
      fail(ErrorKind::ConfigError, "--config is required");
    }
    const Context ctx(o, std::move(config), out);
    if (o.command == "geom") return cmd_geom(ctx);
    if (o.command == "invariants") return cmd_invariants(ctx);
    if (o.command == "spectrum") return cmd_spectrum(ctx);
    if (o.command == "isospec") return cmd_isospec(ctx);
    if (o.command == "yamabe") return cmd_yamabe(ctx);
    return cmd_probe(ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return NumericFailure;
  }
}

}  // namespace finsler::cli
