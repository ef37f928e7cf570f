#include "nsac/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <fftw3.h>
#include <omp.h>

#include <json.hpp>

#include "nsac/errors.hpp"
#include "nsac/expansion.hpp"
#include "nsac/sharp.hpp"
#include "nsac/spectral.hpp"

namespace nsac {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') quoted = !quoted;
    if (line[k] == '#' && !quoted) return line.substr(0, k);
  }
  return line;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<const Profile> standard_theta0() {
  static const auto p = std::make_shared<const Profile>(optimal_profile(DoubleWell::standard()));
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  c.origin_ = origin;
  std::istringstream is(text);
  std::string line, section;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    auto fail = [&](const std::string& msg) {
      throw ConfigError(origin + ":" + std::to_string(no) + ": " + msg);
    };
    if (t.front() == '[') {
      if (t.back() != ']') fail("unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (section.empty()) fail("empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string val = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) fail("missing key");
    if (val.empty()) fail("missing value for '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (c.entries_.count(full)) fail("duplicate key '" + full + "'");
    c.entries_[full] = val;
    c.lines_[full] = no;
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

std::string Config::where(const std::string& key) const {
  const auto it = lines_.find(key);
  return origin_ + (it == lines_.end() ? "" : ":" + std::to_string(it->second));
}

double Config::number(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  double v;
  if (!parse_double(it->second, v)) throw ConfigError(where(key) + ": '" + key + "' expects a number, got " + it->second);
  return v;
}

int Config::integer(const std::string& key, int fallback) const {
  const double v = number(key, fallback);
  if (v != std::floor(v)) throw ConfigError(where(key) + ": '" + key + "' expects an integer");
  return static_cast<int>(v);
}

bool Config::flag(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw ConfigError(where(key) + ": '" + key + "' expects true or false");
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

std::vector<double> Config::numbers(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::string v = it->second;
  if (v.front() != '[') return {number(key, 0)};
  if (v.back() != ']') throw ConfigError(where(key) + ": unterminated list for '" + key + "'");
  std::vector<double> out;
  std::stringstream ss(v.substr(1, v.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    double x;
    if (!parse_double(item, x)) throw ConfigError(where(key) + ": bad list entry '" + item + "' in '" + key + "'");
    out.push_back(x);
  }
  return out;
}

std::string Config::canonical() const {
  std::string s;
  for (const auto& [k, v] : entries_) s += k + "=" + v + "\n";
  return s;
}

uint64_t Config::hash() const { return fnv1a64(canonical()); }

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

namespace {
uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

uint64_t CounterRng::bits(uint64_t k) const { return splitmix64(splitmix64(seed_ ^ splitmix64(stream_)) + k); }

double CounterRng::uniform(uint64_t k) const { return static_cast<double>(bits(k) >> 11) * 0x1.0p-53; }

double CounterRng::normal(uint64_t k) const {
  const double u1 = 1.0 - uniform(2 * k), u2 = uniform(2 * k + 1);
  return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------

RunKind parse_run_kind(const std::string& name) {
  static const std::map<std::string, RunKind> m{{"profile", RunKind::Profile},   {"simulate", RunKind::Simulate},
                                                {"mcf", RunKind::Mcf},           {"converge", RunKind::Converge},
                                                {"spectrum", RunKind::Spectrum}, {"expansion", RunKind::Expansion}};
  const auto it = m.find(name);
  if (it == m.end()) throw ConfigError("unknown run kind '" + name + "'");
  return it->second;
}

std::string to_string(RunKind k) {
  switch (k) {
    case RunKind::Profile: return "profile";
    case RunKind::Simulate: return "simulate";
    case RunKind::Mcf: return "mcf";
    case RunKind::Converge: return "converge";
    case RunKind::Spectrum: return "spectrum";
    case RunKind::Expansion: return "expansion";
  }
  return "?";
}

namespace {

// which kinds read which keys
const std::map<std::string, std::set<RunKind>>& schema() {
  using K = RunKind;
  const std::set<K> all{K::Profile, K::Simulate, K::Mcf, K::Converge, K::Spectrum, K::Expansion};
  const std::set<K> shaped{K::Simulate, K::Mcf, K::Converge, K::Spectrum, K::Expansion};
  const std::set<K> gridded{K::Simulate, K::Converge, K::Spectrum, K::Expansion};
  static const std::map<std::string, std::set<K>> s{
      {"run.kind", all},
      {"run.seed", all},
      {"geometry.shape", shaped},
      {"geometry.radius", shaped},
      {"geometry.a", shaped},
      {"geometry.b", shaped},
      {"geometry.center_x", shaped},
      {"geometry.center_y", shaped},
      {"geometry.file", shaped},
      {"geometry.nodes", shaped},
      {"geometry.delta", shaped},
      {"model.eps", {K::Simulate, K::Expansion}},
      {"model.nu_minus", {K::Simulate, K::Expansion}},
      {"model.nu_plus", {K::Simulate, K::Expansion}},
      {"model.stabilization", {K::Simulate}},
      {"model.navier_stokes", {K::Simulate}},
      {"model.capillary", {K::Simulate}},
      {"model.tol", {K::Simulate}},
      {"model.cfl", {K::Simulate}},
      {"domain.boundary", {K::Simulate}},
      {"domain.half_width", gridded},
      {"domain.eps_per_h", gridded},
      {"domain.grid", {K::Simulate, K::Expansion}},
      {"time.t_end", {K::Simulate, K::Mcf, K::Converge, K::Expansion}},
      {"time.dt", {K::Simulate, K::Mcf, K::Expansion}},
      {"time.dt_factor", {K::Converge}},
      {"time.save_every", {K::Simulate, K::Mcf, K::Expansion}},
      {"sweep.eps", {K::Converge, K::Spectrum}},
      {"sweep.dt", {K::Mcf}},
      {"sweep.threshold", {K::Converge, K::Mcf}},
      {"profile.L", {K::Profile}},
      {"profile.n", {K::Profile}},
  };
  return s;
}

}  // namespace

RunConfig RunConfig::from(const Config& c, std::optional<RunKind> kind) {
  RunConfig r;
  r.raw = c;
  if (kind) {
    r.kind = *kind;
    if (c.has("run.kind") && parse_run_kind(c.text("run.kind", "")) != *kind)
      throw ConfigError(c.where("run.kind") + ": run.kind = " + c.text("run.kind", "") + " but the command is " +
                        to_string(*kind));
  } else {
    if (!c.has("run.kind")) throw ConfigError("run.kind is required");
    r.kind = parse_run_kind(c.text("run.kind", ""));
  }
  for (const auto& [key, val] : c.entries()) {
    const auto it = schema().find(key);
    if (it == schema().end()) throw ConfigError(c.where(key) + ": unknown key '" + key + "'");
    if (!it->second.count(r.kind))
      throw ConfigError(c.where(key) + ": '" + key + "' is not used by kind " + to_string(r.kind));
  }
  const double seed = c.number("run.seed", 0);
  if (seed < 0 || seed != std::floor(seed)) throw ConfigError(c.where("run.seed") + ": run.seed must be a non-negative integer");
  r.seed = static_cast<uint64_t>(seed);

  r.shape = c.text("geometry.shape", r.shape);
  r.radius = c.number("geometry.radius", r.radius);
  r.semi_a = c.number("geometry.a", r.semi_a);
  r.semi_b = c.number("geometry.b", r.semi_b);
  r.center = Vec2(c.number("geometry.center_x", 0), c.number("geometry.center_y", 0));
  r.interface_file = c.text("geometry.file", "");
  r.nodes = c.integer("geometry.nodes", r.nodes);
  r.delta = c.number("geometry.delta", r.delta);

  r.model.eps = c.number("model.eps", r.model.eps);
  r.model.nu_minus = c.number("model.nu_minus", r.model.nu_minus);
  r.model.nu_plus = c.number("model.nu_plus", r.model.nu_plus);
  r.model.stabilization = c.number("model.stabilization", r.model.stabilization);
  r.model.navier_stokes = c.flag("model.navier_stokes", r.model.navier_stokes);
  const std::string cap = c.text("model.capillary", "stress");
  if (cap == "stress")
    r.model.capillary = CapillaryForm::Stress;
  else if (cap == "chemical_potential")
    r.model.capillary = CapillaryForm::ChemicalPotential;
  else
    throw ConfigError(c.where("model.capillary") + ": model.capillary must be stress or chemical_potential");
  r.model.tol = c.number("model.tol", r.model.tol);
  r.model.cfl = c.number("model.cfl", r.model.cfl);

  r.boundary = c.text("domain.boundary", r.boundary);
  r.half_width = c.number("domain.half_width", r.half_width);
  r.eps_per_h = c.number("domain.eps_per_h", r.kind == RunKind::Spectrum ? 3.0 : r.eps_per_h);
  r.grid = c.integer("domain.grid", r.grid);

  r.t_end = c.number("time.t_end", r.t_end);
  r.dt = c.number("time.dt", r.kind == RunKind::Simulate ? 1e-4 : r.dt);
  r.model.dt = r.dt;
  r.dt_factor = c.number("time.dt_factor", r.dt_factor);
  r.save_every = c.integer("time.save_every", r.save_every);

  r.eps_list = c.numbers("sweep.eps", r.kind == RunKind::Spectrum ? std::vector<double>{0.1, 0.05, 0.025}
                                                                   : std::vector<double>{0.08, 0.04, 0.02});
  r.dt_list = c.numbers("sweep.dt", {});
  r.rate_threshold = c.number("sweep.threshold", r.kind == RunKind::Mcf ? 1.8 : 1.5);
  r.profile_L = c.number("profile.L", r.profile_L);
  r.profile_n = c.integer("profile.n", r.profile_n);
  r.validate();
  return r;
}

Interface RunConfig::interface() const {
  if (shape == "circle") return Interface::circle(radius, nodes, center);
  if (shape == "ellipse") return Interface::ellipse(semi_a, semi_b, nodes, center);
  return Interface::read_csv(interface_file);
}

double RunConfig::tube_delta() const {
  if (delta > 0) return delta;
  return 0.25 / interface().max_abs_curvature();
}

Grid2D RunConfig::grid_for(double eps) const {
  int n = grid;
  if (n <= 0) {
    n = static_cast<int>(std::ceil(2 * half_width * eps_per_h / eps));
    n += n % 2;
  }
  if (boundary == "wall") return Grid2D::cells(n, n, -half_width, half_width, -half_width, half_width);
  return Grid2D::periodic(n, n, -half_width, half_width, -half_width, half_width);
}

void RunConfig::validate() const {
  auto fail = [&](const std::string& key, const std::string& msg) {
    throw ConfigError((raw.has(key) ? raw.where(key) + ": " : std::string()) + key + ": " + msg);
  };
  if (kind == RunKind::Profile) {
    if (!(profile_L > 4)) fail("profile.L", "must exceed 4");
    if (profile_n < 16) fail("profile.n", "must be at least 16");
    return;
  }
  if (shape != "circle" && shape != "ellipse" && shape != "file") fail("geometry.shape", "must be circle, ellipse or file");
  if (shape == "file" && interface_file.empty()) fail("geometry.file", "required when geometry.shape = file");
  if (shape == "circle" && !(radius > 0)) fail("geometry.radius", "must be positive");
  if (shape == "ellipse" && !(semi_a > 0 && semi_b > 0)) fail("geometry.a", "semi-axes must be positive");
  if (nodes < 16 || nodes % 2) fail("geometry.nodes", "must be an even number >= 16");
  if (delta < 0) fail("geometry.delta", "must be non-negative");
  if ((kind == RunKind::Converge || kind == RunKind::Spectrum) && shape != "circle")
    fail("geometry.shape", "eps sweeps compare against circle references");
  if (boundary != "periodic" && boundary != "wall") fail("domain.boundary", "must be periodic or wall");
  if (kind != RunKind::Mcf) {
    if (!(half_width > 0)) fail("domain.half_width", "must be positive");
    if (!(eps_per_h >= 1)) fail("domain.eps_per_h", "must be at least 1");
    if (grid < 0 || grid % 2) fail("domain.grid", "must be even (0 derives it from eps_per_h)");
    const double extent = shape == "circle" ? radius + center.norm() : std::max(semi_a, semi_b) + center.norm();
    if (shape != "file" && extent >= half_width) fail("domain.half_width", "the interface leaves the box");
  }
  if (kind != RunKind::Spectrum && !(t_end > 0)) fail("time.t_end", "must be positive");
  if ((kind == RunKind::Simulate || kind == RunKind::Mcf || kind == RunKind::Expansion) && !(dt > 0))
    fail("time.dt", "must be positive");
  if (kind == RunKind::Converge && !(dt_factor > 0)) fail("time.dt_factor", "must be positive");
  if (save_every < 1) fail("time.save_every", "must be at least 1");
  if (kind == RunKind::Mcf && shape == "circle" && t_end >= radius * radius / 2)
    fail("time.t_end", "the circle vanishes at R^2/2");

  const double d = tube_delta();
  const double kmax = interface().max_abs_curvature();
  if (3 * d * kmax >= 1) {
    std::ostringstream os;
    os << "3 delta = " << 3 * d << " must stay below the minimal radius of curvature " << 1 / kmax;
    fail("geometry.delta", os.str());
  }
  std::vector<double> eps;
  if (kind == RunKind::Converge || kind == RunKind::Spectrum) {
    if (eps_list.empty()) fail("sweep.eps", "must not be empty");
    if (kind == RunKind::Converge && eps_list.size() < 3) fail("sweep.eps", "a rate fit needs at least 3 values");
    eps = eps_list;
  } else if (kind == RunKind::Simulate || kind == RunKind::Expansion) {
    eps = {model.eps};
  }
  if (kind == RunKind::Mcf && !dt_list.empty() && dt_list.size() < 3) fail("sweep.dt", "a rate fit needs at least 3 values");
  for (double e : eps) {
    if (!(e > 0)) fail(kind == RunKind::Simulate || kind == RunKind::Expansion ? "model.eps" : "sweep.eps", "must be positive");
    if (e > d / 4 * (1 + 1e-12)) {
      std::ostringstream os;
      os << "eps = " << e << " exceeds delta/4 = " << d / 4 << " (set geometry.delta or reduce eps)";
      fail(kind == RunKind::Simulate || kind == RunKind::Expansion ? "model.eps" : "sweep.eps", os.str());
    }
  }
  if (kind == RunKind::Simulate) {
    if (!(model.nu_minus > 0 && model.nu_plus > 0)) fail("model.nu_minus", "viscosities must be positive");
    if (!(model.tol > 0)) fail("model.tol", "must be positive");
  }
}

// ---------------------------------------------------------------------------

RateReport fit_rate(const std::vector<double>& eps, const std::vector<double>& err, double threshold) {
  if (eps.size() != err.size()) throw std::invalid_argument("fit_rate: size mismatch");
  if (eps.size() < 3) throw std::invalid_argument("fit_rate: needs at least 3 points");
  for (size_t k = 0; k < eps.size(); ++k) {
    if (!(err[k] > 0)) {
      std::ostringstream os;
      os << "fit_rate: error " << err[k] << " at eps = " << eps[k] << " is not positive";
      throw NonPositiveError(os.str());
    }
    if (!(eps[k] > 0)) throw NonPositiveError("fit_rate: eps must be positive");
  }
  RateReport r;
  r.eps = eps;
  r.err = err;
  r.threshold = threshold;
  const int n = static_cast<int>(eps.size());
  double mx = 0, my = 0;
  for (int k = 0; k < n; ++k) {
    mx += std::log(eps[k]);
    my += std::log(err[k]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int k = 0; k < n; ++k) {
    const double dx = std::log(eps[k]) - mx, dy = std::log(err[k]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0) throw std::invalid_argument("fit_rate: eps values must differ");
  r.order = sxy / sxx;
  r.intercept = my - r.order * mx;
  double sse = 0;
  for (int k = 0; k < n; ++k) {
    const double e = std::log(err[k]) - (r.intercept + r.order * std::log(eps[k]));
    sse += e * e;
  }
  r.r2 = syy > 0 ? 1 - sse / syy : 1.0;
  r.residual = std::sqrt(sse / n);
  r.order_stderr = n > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
  r.order_lo = r.order - 2 * r.order_stderr;
  r.order_hi = r.order + 2 * r.order_stderr;
  r.pass = r.order >= threshold;
  return r;
}

namespace {

double point_cloud_hausdorff(const Interface& a, const Interface& b, double* l2) {
  const int m = 8 * std::max(a.size(), b.size());
  const Interface A = a.resample(m), B = b.resample(m);
  auto one_way = [](const Interface& p, const Interface& q, double* mean2) {
    double worst = 0, sum = 0;
    for (const auto& x : p.nodes()) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q.nodes()) best = std::min(best, (x - y).squaredNorm());
      worst = std::max(worst, best);
      sum += best;
    }
    if (mean2) *mean2 = sum / p.size();
    return std::sqrt(worst);
  };
  double m2 = 0;
  const double h = std::max(one_way(A, B, &m2), one_way(B, A, nullptr));
  *l2 = std::sqrt(m2);
  return h;
}

}  // namespace

InterfaceDistance compare_interfaces(const Interface& a, const Interface& b) {
  InterfaceDistance out;
  try {
    const TubularMap ta(a), tb(b);
    double sum = 0, w = 0;
    for (int j = 0; j < a.size(); ++j) {
      const double r = tb.project(a.node(j)).r;
      out.hausdorff = std::max(out.hausdorff, std::abs(r));
      sum += r * r * a.node_speed()[j];
      w += a.node_speed()[j];
    }
    for (int j = 0; j < b.size(); ++j) out.hausdorff = std::max(out.hausdorff, std::abs(ta.project(b.node(j)).r));
    out.l2_normal = std::sqrt(sum / w);
  } catch (const std::exception&) {
    out.fallback = true;
    out.hausdorff = point_cloud_hausdorff(a, b, &out.l2_normal);
  }
  return out;
}

CircleRun allen_cahn_circle_run(double eps, double R0, double t_end, double half_width, double eps_per_h,
                                double dt_factor, double delta) {
  const auto t0 = std::chrono::steady_clock::now();
  CircleRun r;
  r.eps = eps;
  r.n = static_cast<int>(std::ceil(2 * half_width * eps_per_h / eps));
  r.n += r.n % 2;
  const auto g = Grid2D::periodic(r.n, r.n, -half_width, half_width, -half_width, half_width);
  const TubularMap tub(Interface::circle(R0, 256), delta);
  r.c = build_cA0(eps, tub, standard_theta0(), Cutoff(delta)).sample(g);
  const long steps = std::lround(std::ceil(t_end / (dt_factor * eps * eps) - 1e-9));
  r.dt = t_end / steps;
  const AllenCahnETD etd(g, eps, r.dt);
  r.t = etd.run(r.c, 0.0, t_end);
  r.radius = level_set_radius(zero_level_set(r.c));
  r.reference = std::sqrt(R0 * R0 - 2 * t_end);
  r.error = r.radius - r.reference;
  r.seconds = seconds_since(t0);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// runs body(k) for k < n on up to `threads` workers; the first exception is rethrown
template <class F>
void parallel_for(int n, int threads, F&& body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, std::min(threads, n)))
  for (int k = 0; k < n; ++k) {
    try {
      body(k);
    } catch (...) {
#pragma omp critical(nsac_parallel_for)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

struct Writer {
  fs::path dir;
  std::vector<std::string> outputs;
  std::ofstream open(const std::string& name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f.precision(17);
    outputs.push_back(name);
    return f;
  }
  std::string path(const std::string& name) {
    outputs.push_back(name);
    return (dir / name).string();
  }
};

json rate_json(const RateReport& r) {
  return json{{"eps", r.eps},
              {"error", r.err},
              {"order", r.order},
              {"order_band", {r.order_lo, r.order_hi}},
              {"intercept", r.intercept},
              {"r2", r.r2},
              {"log_residual", r.residual},
              {"threshold", r.threshold},
              {"pass", r.pass}};
}

void write_json(Writer& w, const std::string& name, const json& j) {
  auto f = w.open(name);
  f << j.dump(2) << "\n";
}

json run_profile(const RunConfig& cfg, Writer& w) {
  const DoubleWell well = DoubleWell::standard();
  const Profile th = optimal_profile(well, cfg.profile_L, cfg.profile_n);
  th.write_csv(w.path("profile.csv"));
  double sup = 0, equi = 0;
  const auto& G = th.grid();
  for (int j = 0; j <= G.n; ++j) {
    const double r = G.x[j], v = th.values()[j], d = th.nodal(1)[j];
    sup = std::max(sup, std::abs(v - std::tanh(r / 2)));
    equi = std::max(equi, std::abs(0.5 * d * d - well.f(v)));
  }
  const auto eta = std::make_shared<const Profile>(default_eta());
  const ExpansionConstants k = expansion_constants(th, *eta, default_viscosity(1.0, 1.0));
  json j{{"sigma", surface_tension(th)},
         {"sigma0", k.sigma0},
         {"sigma_eta", k.sigma_eta},
         {"sigma0_eta", k.sigma0_eta},
         {"sigma2", k.sigma2},
         {"sup_error_tanh", sup},
         {"equipartition_residual", equi}};
  write_json(w, "constants.json", j);
  return j;
}

json run_mcf(const RunConfig& cfg, Writer& w) {
  const Interface iface = cfg.interface();
  const FrontState front = FrontState::from_interface(iface);
  const VecFn zero = [](const Vec2&, double) { return Vec2(0, 0); };
  const bool circle = cfg.shape == "circle";
  const double R0 = cfg.radius;
  const auto hist = mcf_convected_run(front, zero, cfg.t_end, cfg.dt, cfg.save_every);
  {
    auto f = w.open("radius.csv");
    f << "t,area,radius" << (circle ? ",reference" : "") << "\n";
    for (const auto& st : hist) {
      const double A = st.interface().area();
      f << st.t << ',' << A << ',' << std::sqrt(std::abs(A) / std::numbers::pi);
      if (circle) f << ',' << std::sqrt(R0 * R0 - 2 * st.t);
      f << '\n';
    }
  }
  write_front_history(w.path("front_history.csv"), hist);
  json j{{"steps_saved", hist.size()}, {"final_time", hist.back().t}};
  if (circle) {
    const double R = std::sqrt(std::abs(hist.back().interface().area()) / std::numbers::pi);
    j["final_radius"] = R;
    j["relative_error"] = std::abs(R - std::sqrt(R0 * R0 - 2 * cfg.t_end)) / std::sqrt(R0 * R0 - 2 * cfg.t_end);
  }
  if (!cfg.dt_list.empty()) {
    if (!circle) throw ConfigError("sweep.dt: the refinement study needs a circle");
    std::vector<double> errs;
    auto f = w.open("refinement.csv");
    f << "dt,radius,reference,error\n";
    for (double dt : cfg.dt_list) {
      const auto h = mcf_convected_run(front, zero, cfg.t_end, dt, 1 << 30);
      const double R = std::sqrt(std::abs(h.back().interface().area()) / std::numbers::pi);
      const double ref = std::sqrt(R0 * R0 - 2 * cfg.t_end);
      errs.push_back(std::abs(R - ref));
      f << dt << ',' << R << ',' << ref << ',' << R - ref << '\n';
    }
    const RateReport rr = fit_rate(cfg.dt_list, errs, cfg.rate_threshold);
    write_json(w, "rate.json", rate_json(rr));
    j["temporal_order"] = rr.order;
  }
  return j;
}

ScalarField2D initial_field(const RunConfig& cfg, const Grid2D& g, double eps) {
  const TubularMap tub(cfg.interface(), cfg.tube_delta());
  return build_cA0(eps, tub, standard_theta0(), Cutoff(cfg.tube_delta())).sample(g);
}

json run_simulate(const RunConfig& cfg, Writer& w) {
  const Grid2D g = cfg.grid_for(cfg.model.eps);
  ModelParams p = cfg.model;
  NSACSolver solver(g, p);
  SimState s = solver.initial_state(initial_field(cfg, g, p.eps));
  DiagnosticsWriter diag(w.path("diagnostics.csv"));
  auto radius = [&]() {
    try {
      return level_set_radius(zero_level_set(s.c));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  auto snapshot = [&](int k) {
    char name[32];
    std::snprintf(name, sizeof name, "snap_%05d.bin", k);
    std::vector<std::pair<std::string, const ScalarField2D*>> fields{{"c", &s.c}, {"p", &s.p}};
    ScalarField2D u(g), v(g);
    if (solver.spectral()) {
      u.v = s.v.u;
      v.v = s.v.v;
      fields.push_back({"u", &u});
      fields.push_back({"v", &v});
    }
    write_snapshot(w.path(name), fields, s.t);
  };
  EnergyParts e = solver.energy(s);
  const double e0 = e.total;
  double max_rise = 0, prev = e.total;
  diag.row(s.t, e, solver.divergence_max(s), radius());
  snapshot(0);
  int steps = 0, rejections = 0, clamps = 0;
  while (s.t < cfg.t_end - 1e-12 * cfg.t_end) {
    solver.params().dt = std::min(p.dt, cfg.t_end - s.t);
    try {
      const StepInfo info = solver.step(s);
      clamps += info.clamp_events;
    } catch (const StepRejected& r) {
      ++rejections;
      p.dt = r.suggested_dt;
      if (p.dt < 1e-12) throw SolverFailure("time step collapsed");
      continue;
    }
    ++steps;
    e = solver.energy(s);
    max_rise = std::max(max_rise, e.total - prev);
    prev = e.total;
    if (steps % cfg.save_every == 0 || s.t >= cfg.t_end - 1e-12 * cfg.t_end) {
      diag.row(s.t, e, solver.divergence_max(s), radius());
      snapshot(steps);
    }
  }
  try {
    zero_level_set(s.c).write_csv(w.path("final_interface.csv"));
  } catch (const std::exception&) {
  }
  return json{{"grid", g.nx},
              {"steps", steps},
              {"rejected_steps", rejections},
              {"viscosity_clamp_events", clamps},
              {"energy_initial", e0},
              {"energy_final", e.total},
              {"max_energy_rise_per_step", max_rise}};
}

json run_converge(const RunConfig& cfg, Writer& w, int threads) {
  const int n = static_cast<int>(cfg.eps_list.size());
  std::vector<CircleRun> runs(n);
  const double delta = cfg.tube_delta();
  parallel_for(n, threads, [&](int k) {
    runs[k] = allen_cahn_circle_run(cfg.eps_list[k], cfg.radius, cfg.t_end, cfg.half_width, cfg.eps_per_h,
                                    cfg.dt_factor, delta);
  });
  std::vector<double> errs;
  auto f = w.open("convergence.csv");
  f << "eps,n,dt,radius,reference,error\n";
  for (const auto& r : runs) {
    f << r.eps << ',' << r.n << ',' << r.dt << ',' << r.radius << ',' << r.reference << ',' << r.error << '\n';
    errs.push_back(std::abs(r.error));
  }
  const RateReport rr = fit_rate(cfg.eps_list, errs, cfg.rate_threshold);
  write_json(w, "rate.json", rate_json(rr));
  json times = json::array();
  for (const auto& r : runs) times.push_back(r.seconds);
  return json{{"order", rr.order}, {"pass", rr.pass}, {"run_seconds", times}};
}

json run_spectrum(const RunConfig& cfg, Writer& w, int threads) {
  const int n = static_cast<int>(cfg.eps_list.size());
  std::vector<EigenPair> res(n);
  std::vector<int> sizes(n);
  parallel_for(n, threads, [&](int k) {
    const double eps = cfg.eps_list[k];
    RunConfig c = cfg;
    c.boundary = "periodic";
    const Grid2D g = c.grid_for(eps);
    sizes[k] = g.nx;
    const LinearizedOperator op(initial_field(cfg, g, eps), eps);
    res[k] = min_eigenvalue(op, 1e-8);
  });
  auto f = w.open("spectrum.csv");
  f << "eps,n,lambda_min,iterations,residual,shift\n";
  double worst = -std::numeric_limits<double>::infinity();
  bool negative = true;
  std::vector<double> neg;
  for (int k = 0; k < n; ++k) {
    f << cfg.eps_list[k] << ',' << sizes[k] << ',' << res[k].lambda << ',' << res[k].iterations << ','
      << res[k].residual << ',' << res[k].shift << '\n';
    worst = std::max(worst, -res[k].lambda);
    negative = negative && res[k].lambda < 0;
    neg.push_back(-res[k].lambda);
  }
  json j{{"C", worst}};
  if (negative && n >= 3) {
    const RateReport rr = fit_rate(cfg.eps_list, neg);
    j["exponent"] = rr.order;
    j["no_blowup"] = std::abs(rr.order) <= 0.1;
  }
  write_json(w, "spectrum.json", j);
  return j;
}

json run_expansion(const RunConfig& cfg, Writer& w) {
  if (cfg.shape != "circle") throw ConfigError("geometry.shape: the expansion run uses the circle solution of MCF");
  const auto th = standard_theta0();
  const double R = cfg.radius, eps = cfg.model.eps;
  const Interface circ = Interface::circle(R, cfg.nodes, cfg.center);
  const TubularMap tub(circ, cfg.tube_delta());
  const auto eta = std::make_shared<const Profile>(default_eta());
  const ExpansionConstants k =
      expansion_constants(*th, *eta, default_viscosity(cfg.model.nu_minus, cfg.model.nu_plus));

  G0Field g0;
  g0.tub = &tub;
  g0.v0 = [](const Vec2&, double) { return Vec2(0, 0); };
  g0.normal_velocity = [&](double s) { return tub.interface().curvature(s); };
  g0.h = 2 * cfg.half_width / cfg.grid_for(eps).nx;
  double worst_on = 0, worst_off = 0;
  {
    auto f = w.open("g0.csv");
    f << "s,g0,reference,g0_plus,reference_plus,g0_minus,reference_minus\n";
    for (int j = 0; j < circ.size(); ++j) {
      const double s = circ.s(j);
      const double on = g0.on_interface(s), ref = -1 / (R * R);
      const double dp = 0.1 * R, dm = -0.1 * R;
      const double gp = g0.at(tub.point(dp, s)).value, gm = g0.at(tub.point(dm, s)).value;
      const double rp = -1 / (R * (R - dp)), rm = -1 / (R * (R - dm));
      worst_on = std::max(worst_on, std::abs(on - ref) / std::abs(ref));
      worst_off = std::max({worst_off, std::abs(gp - rp) / std::abs(rp), std::abs(gm - rm) / std::abs(rm)});
      f << s << ',' << on << ',' << ref << ',' << gp << ',' << rp << ',' << gm << ',' << rm << '\n';
    }
  }
  H1Inputs in;
  const int nodes = cfg.nodes;
  const Vec2 c0 = cfg.center;
  in.geometry = [R, nodes, c0](double t) { return Interface::circle(std::sqrt(R * R - 2 * t), nodes, c0); };
  in.g0 = [R](double, double t) { return -1 / (R * R - 2 * t); };
  in.sigma = surface_tension(*th);
  in.sigma0 = k.sigma0;
  SurfaceSolveOptions opt;
  opt.dt = cfg.dt;
  opt.t_end = cfg.t_end;
  opt.save_every = cfg.save_every;
  const HeightFunction h1 = h1_evolution(in, *th, nodes, opt);
  h1.write_csv(w.path("height.csv"));
  const Grid2D g = cfg.grid_for(eps);
  const ScalarField2D cA = build_cA0(eps, tub, th, Cutoff(cfg.tube_delta())).sample(g);
  write_snapshot(w.path("cA0.bin"), {{"c", &cA}}, 0.0);
  return json{{"sigma", in.sigma},
              {"sigma0", k.sigma0},
              {"sigma_eta", k.sigma_eta},
              {"sigma2", k.sigma2},
              {"g0_interface_rel_error", worst_on},
              {"g0_off_rel_error", worst_off},
              {"h1_max", h1.current().lpNorm<Eigen::Infinity>()}};
}

}  // namespace

RunSummary run(const RunConfig& cfg, const std::string& out_dir, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  threads = std::max(1, threads);
  omp_set_num_threads(threads);
  fs::create_directories(out_dir);
  Writer w{fs::path(out_dir), {}};
  json results;
  switch (cfg.kind) {
    case RunKind::Profile: results = run_profile(cfg, w); break;
    case RunKind::Mcf: results = run_mcf(cfg, w); break;
    case RunKind::Simulate: results = run_simulate(cfg, w); break;
    case RunKind::Converge: results = run_converge(cfg, w, threads); break;
    case RunKind::Spectrum: results = run_spectrum(cfg, w, threads); break;
    case RunKind::Expansion: results = run_expansion(cfg, w); break;
  }
  RunSummary out;
  out.seconds = seconds_since(t0);
  json cfg_json = json::object();
  for (const auto& [k, v] : cfg.raw.entries()) cfg_json[k] = v;
  std::ostringstream eigen_ver;
  eigen_ver << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
  json versions{{"nsac", std::string(kVersion)},
                {"eigen", eigen_ver.str()},
                {"fftw", std::string(fftw_version)},
                {"compiler", std::string(__VERSION__)}};
  json manifest{{"kind", to_string(cfg.kind)},
                {"config_hash", hex64(cfg.raw.hash())},
                {"config", cfg_json},
                {"seed", cfg.seed},
                {"threads", threads},
                {"versions", versions},
                {"wall_seconds", out.seconds},
                {"outputs", w.outputs},
                {"results", results}};
  out.outputs = w.outputs;
  out.manifest = (w.dir / "manifest.json").string();
  std::ofstream f(out.manifest);
  f << manifest.dump(2) << "\n";
  return out;
}

}  // namespace nsac
