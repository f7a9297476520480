#include "run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "finsler/error.hpp"
#include "finsler/expr.hpp"

namespace finsler::cli {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// One `key = value` entry with its position for diagnostics.
struct Entry {
  std::string section, key, value;
  int line = 0;
};

class Reader {
 public:
  Reader(std::string origin) : origin_(std::move(origin)) {}

  [[noreturn]] void error(const Entry& e, const std::string& msg) const {
    fail(ErrorKind::ConfigError, origin_ + ":" + std::to_string(e.line) + ": field " + e.section + "." + e.key + ": " + msg);
  }
  [[noreturn]] void error(int line, const std::string& msg) const {
    fail(ErrorKind::ConfigError, origin_ + ":" + std::to_string(line) + ": " + msg);
  }

  double number(const Entry& e, const std::string& text) const {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v)) error(e, "expected a number, got '" + text + "'");
    return v;
  }
  double number(const Entry& e) const { return number(e, e.value); }

  double positive(const Entry& e) const {
    const double v = number(e);
    if (!(v > 0.0)) error(e, "must be positive");
    return v;
  }
  double nonnegative(const Entry& e) const {
    const double v = number(e);
    if (v < 0.0) error(e, "must be non-negative");
    return v;
  }

  long long integer(const Entry& e, const std::string& text, long long lo, long long hi) const {
    long long v = 0;
    const char* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) error(e, "expected an integer, got '" + text + "'");
    if (v < lo || v > hi) error(e, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }
  long long integer(const Entry& e, long long lo, long long hi) const { return integer(e, e.value, lo, hi); }

  bool boolean(const Entry& e) const {
    const std::string v = lower(e.value);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    error(e, "expected true or false, got '" + e.value + "'");
  }

  std::string expression(const Entry& e) const {
    try {
      (void)parse_expression(e.value);
    } catch (const Error& err) {
      error(e, err.what());
    }
    return e.value;
  }

  std::vector<std::string> words(const Entry& e, std::size_t n) const {
    std::vector<std::string> w = split_words(e.value);
    if (w.size() != n) error(e, "expected " + std::to_string(n) + " values, got " + std::to_string(w.size()));
    return w;
  }

 private:
  std::string origin_;
};

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"metric", {"kind", "a11", "a12", "a13", "a22", "a23", "a33", "b1", "b2", "b3", "F", "periods"}},
      {"mesh", {"resolution", "directions"}},
      {"factor",
       {"phi", "generate", "count", "modes", "max_wavenumber", "amplitude", "seed", "normalize_volume", "target_a0"}},
      {"probe",
       {"alpha0", "alpha1", "alpha2", "Lambda", "a0_rtol", "curvature", "calibrate", "margin", "identity_tolerance",
        "heat_tolerance"}},
      {"spectrum", {"m", "tolerance", "dense_limit", "isospec_tolerance"}},
      {"yamabe", {"laplacian", "tolerance"}},
      {"output", {"dir", "formats"}},
  };
  return s;
}

void apply_metric(RunConfig& c, const Entry& e, const Reader& r) {
  static const std::array<std::string, 6> a_keys{"a11", "a12", "a13", "a22", "a23", "a33"};
  if (e.key == "kind") {
    const std::string k = lower(e.value);
    if (k != "euclidean" && k != "riemannian" && k != "randers" && k != "closed_form")
      r.error(e, "unknown kind '" + e.value + "' (euclidean, riemannian, randers, closed_form)");
    c.metric.kind = k;
  } else if (e.key == "periods") {
    const auto w = r.words(e, 3);
    for (int i = 0; i < 3; ++i) {
      c.metric.periods[i] = r.number(e, w[i]);
      if (!(c.metric.periods[i] > 0.0)) r.error(e, "periods must be positive");
    }
  } else if (e.key == "F") {
    c.metric.F = r.expression(e);
  } else if (e.key[0] == 'b') {
    c.metric.b[e.key[1] - '1'] = r.expression(e);
  } else {
    const auto it = std::find(a_keys.begin(), a_keys.end(), e.key);
    c.metric.a[static_cast<std::size_t>(it - a_keys.begin())] = r.expression(e);
  }
}

void apply_mesh(RunConfig& c, const Entry& e, const Reader& r) {
  if (e.key == "resolution") {
    const auto w = r.words(e, 3);
    for (int i = 0; i < 3; ++i) c.mesh.resolution[i] = static_cast<int>(r.integer(e, w[i], 4, 4096));
    return;
  }
  const auto w = split_words(e.value);
  if (w.empty()) r.error(e, "expected a direction rule");
  const std::string rule = lower(w[0]);
  if (rule == "ico") {
    if (w.size() != 2) r.error(e, "expected 'ico LEVEL'");
    c.mesh.directions = DirectionRule::ico(static_cast<int>(r.integer(e, w[1], 0, 5)));
  } else if (rule == "product") {
    if (w.size() != 3) r.error(e, "expected 'product NTHETA NPHI'");
    c.mesh.directions = DirectionRule::product(static_cast<int>(r.integer(e, w[1], 1, 256)),
                                               static_cast<int>(r.integer(e, w[2], 1, 512)));
  } else if (rule == "single") {
    if (w.size() != 4) r.error(e, "expected 'single Y1 Y2 Y3'");
    const Vec3 y{r.number(e, w[1]), r.number(e, w[2]), r.number(e, w[3])};
    if (std::hypot(y[0], y[1], y[2]) == 0.0) r.error(e, "the direction must be nonzero");
    c.mesh.directions = DirectionRule::single(y);
  } else {
    r.error(e, "unknown direction rule '" + w[0] + "' (ico, product, single)");
  }
}

void apply_factor(RunConfig& c, const Entry& e, const Reader& r) {
  FactorBlock& f = c.factor;
  if (e.key == "phi") {
    f.expressions.push_back(r.expression(e));
  } else if (e.key == "generate") {
    f.generate = r.boolean(e);
  } else if (e.key == "count") {
    f.generator.count = static_cast<std::size_t>(r.integer(e, 0, 100000));
  } else if (e.key == "modes") {
    f.generator.modes = static_cast<int>(r.integer(e, 0, 64));
  } else if (e.key == "max_wavenumber") {
    f.generator.max_wavenumber = static_cast<int>(r.integer(e, 1, 64));
  } else if (e.key == "amplitude") {
    f.generator.amplitude = r.nonnegative(e);
    if (f.generator.amplitude >= 1.0) r.error(e, "must be below 1 so that every factor stays positive");
  } else if (e.key == "seed") {
    f.generator.seed = static_cast<std::uint64_t>(r.integer(e, 0, std::numeric_limits<long long>::max()));
  } else if (e.key == "normalize_volume") {
    f.generator.normalize_volume = r.boolean(e);
  } else {
    f.target_a0 = r.positive(e);
  }
}

void apply_probe(RunConfig& c, const Entry& e, const Reader& r) {
  ProbeBlock& p = c.probe;
  if (e.key == "alpha0") p.alpha0 = r.positive(e);
  else if (e.key == "alpha1") p.alpha1 = r.positive(e);
  else if (e.key == "alpha2") p.alpha2 = r.positive(e);
  else if (e.key == "Lambda") p.Lambda = r.positive(e);
  else if (e.key == "a0_rtol") p.a0_rtol = r.positive(e);
  else if (e.key == "calibrate") p.calibrate = r.boolean(e);
  else if (e.key == "identity_tolerance") p.identity_tolerance = r.positive(e);
  else if (e.key == "heat_tolerance") p.heat_tolerance = r.nonnegative(e);
  else if (e.key == "margin") {
    p.margin = r.nonnegative(e);
    if (p.margin >= 1.0) r.error(e, "must be below 1");
  } else {
    const std::string v = lower(e.value);
    if (v == "direct") p.curvature = CurvatureSource::Direct;
    else if (v == "predicted") p.curvature = CurvatureSource::Predicted;
    else r.error(e, "expected direct or predicted");
  }
}

void apply_spectrum(RunConfig& c, const Entry& e, const Reader& r) {
  SpectrumBlock& s = c.spectrum;
  if (e.key == "m") s.m = static_cast<std::size_t>(r.integer(e, 1, 200));
  else if (e.key == "tolerance") s.tolerance = r.positive(e);
  else if (e.key == "dense_limit") s.dense_limit = static_cast<std::size_t>(r.integer(e, 1, 20000));
  else s.isospec_tolerance = r.positive(e);
}

void apply_yamabe(RunConfig& c, const Entry& e, const Reader& r) {
  if (e.key == "tolerance") {
    c.yamabe.tolerance = r.nonnegative(e);
    return;
  }
  const std::string v = lower(e.value);
  if (v == "jets") c.yamabe.laplacian = LaplacianSource::Jets;
  else if (v == "stencil") c.yamabe.laplacian = LaplacianSource::Stencil;
  else r.error(e, "expected jets or stencil");
}

void apply_output(RunConfig& c, const Entry& e, const Reader& r) {
  if (e.key == "dir") {
    if (e.value.empty()) r.error(e, "must not be empty");
    c.output.dir = e.value;
    return;
  }
  c.output.csv = c.output.plot = false;
  for (const std::string& w : split_words(e.value)) {
    const std::string v = lower(w);
    if (v == "csv") c.output.csv = true;
    else if (v == "plot") c.output.plot = true;
    else r.error(e, "unknown format '" + w + "' (csv, plot)");
  }
  if (!c.output.csv && !c.output.plot) r.error(e, "at least one format is required");
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& origin) {
  const Reader r(origin);
  RunConfig c;
  std::string section;
  std::set<std::string> seen_sections;
  std::map<std::string, int> seen_keys;
  std::map<std::string, Entry> metric_entries;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find_first_of("#;");
    const std::string s = trim(std::string_view(raw).substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') r.error(line, "unterminated section header");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (!schema().count(section)) r.error(line, "unknown section [" + section + "]");
      if (!seen_sections.insert(section).second) r.error(line, "duplicate section [" + section + "]");
      if (section == "factor") c.factor_present = true;
      if (section == "probe") c.probe.present = true;
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) r.error(line, "expected 'key = value'");
    Entry e{section, trim(std::string_view(s).substr(0, eq)), trim(std::string_view(s).substr(eq + 1)), line};
    if (section.empty()) r.error(line, "entry '" + e.key + "' before any section header");
    if (!schema().at(section).count(e.key)) r.error(e, "unknown key in [" + section + "]");
    if (e.value.empty()) r.error(e, "missing value");
    const std::string full = section + "." + e.key;
    if (e.key != "phi") {
      auto [it, fresh] = seen_keys.emplace(full, line);
      if (!fresh) r.error(e, "duplicate key (first set on line " + std::to_string(it->second) + ")");
    }
    c.canonical.push_back(full + "=" + e.value);

    if (section == "metric") {
      apply_metric(c, e, r);
      metric_entries[e.key] = e;
    } else if (section == "mesh") apply_mesh(c, e, r);
    else if (section == "factor") apply_factor(c, e, r);
    else if (section == "probe") apply_probe(c, e, r);
    else if (section == "spectrum") apply_spectrum(c, e, r);
    else if (section == "yamabe") apply_yamabe(c, e, r);
    else apply_output(c, e, r);
  }

  // Cross-field checks of the metric block.
  const std::string& kind = c.metric.kind;
  for (const auto& [key, e] : metric_entries) {
    const bool is_a = key.size() == 3 && key[0] == 'a';
    const bool is_b = key.size() == 2 && key[0] == 'b';
    if (is_a && kind != "riemannian" && kind != "randers") r.error(e, "only used with kind riemannian or randers");
    if (is_b && kind != "randers") r.error(e, "only used with kind randers");
    if (key == "F" && kind != "closed_form") r.error(e, "only used with kind closed_form");
  }
  if (kind == "closed_form" && c.metric.F.empty())
    r.error(metric_entries.count("kind") ? metric_entries.at("kind").line : line, "field metric.F: required for kind closed_form");

  if (c.factor_present && c.factor.expressions.empty() && !c.factor.generate && seen_keys.count("factor.count"))
    r.error(seen_keys.at("factor.count"), "field factor.count: set generate = true to use the generator");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

MetricSpec build_metric(const RunConfig& config) {
  const MetricBlock& m = config.metric;
  const PeriodicChart3 chart{m.periods};
  std::array<Expr, 6> a;
  for (std::size_t i = 0; i < 6; ++i) a[i] = parse_expression(m.a[i]);
  if (m.kind == "euclidean") return MetricSpec::euclidean(chart);
  if (m.kind == "riemannian") return MetricSpec::riemannian(a, chart);
  if (m.kind == "randers") {
    std::array<Expr, 3> b;
    for (std::size_t i = 0; i < 3; ++i) b[i] = parse_expression(m.b[i]);
    return MetricSpec::randers(a, b, chart);
  }
  return MetricSpec::closed_form(parse_expression(m.F), chart);
}

std::vector<ConformalFactor> build_family(const RunConfig& config, const SphereBundleMesh& mesh) {
  if (!config.factor_present) return {ConformalFactor::identity()};
  std::vector<ConformalFactor> family;
  for (const std::string& s : config.factor.expressions) family.push_back(ConformalFactor::parse(s));
  if (config.factor.generate) {
    const double target = config.factor.target_a0.value_or(mesh.total_volume());
    for (ConformalFactor& f : generate_family(config.factor.generator, mesh, target)) family.push_back(std::move(f));
  }
  return family;
}

ProbeConfig build_probe_config(const RunConfig& config) {
  ProbeConfig p;
  p.alpha0 = config.probe.alpha0;
  p.alpha1 = config.probe.alpha1;
  p.alpha2 = config.probe.alpha2;
  p.Lambda = config.probe.Lambda;
  p.a0_rtol = config.probe.a0_rtol;
  p.resolution = config.mesh.resolution;
  p.directions = config.mesh.directions;
  p.curvature = config.probe.curvature;
  p.spectrum.tolerance = config.spectrum.tolerance;
  p.spectrum.dense_limit = config.spectrum.dense_limit;
  p.spectrum.want_vectors = false;
  return p;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  std::string joined;
  for (const std::string& s : config.canonical) joined += s + "\n";
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(joined);
  return os.str();
}

}  // namespace finsler::cli
