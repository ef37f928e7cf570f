#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsac/diffuse.hpp"
#include "nsac/geometry.hpp"

namespace nsac {

inline constexpr const char* kVersion = "0.1.0";

// Flat sectioned key = value text.  Keys are addressed as "section.key"; values are
// numbers, true/false, quoted strings or [a, b, ...] lists.  '#' starts a comment.
class Config {
public:
  static Config parse(const std::string& text, const std::string& origin = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  double number(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& raw) { entries_[key] = raw; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string where(const std::string& key) const;  // "origin:line" for messages

  // sorted key=value lines; the hash is FNV-1a of this text
  std::string canonical() const;
  uint64_t hash() const;

private:
  std::string origin_;
  std::map<std::string, std::string> entries_;
  std::map<std::string, int> lines_;
};

uint64_t fnv1a64(std::string_view bytes);
std::string hex64(uint64_t v);

// Counter-based generator: draw k of stream s is a SplitMix64 hash of (seed, s, k),
// so parallel streams are reproducible without shared state.
class CounterRng {
public:
  explicit CounterRng(uint64_t seed, uint64_t stream = 0) : seed_(seed), stream_(stream) {}
  uint64_t bits(uint64_t k) const;
  double uniform(uint64_t k) const;  // [0, 1)
  double normal(uint64_t k) const;   // Box-Muller on draws 2k, 2k + 1
  uint64_t next() { return bits(counter_++); }
  double next_uniform() { return uniform(counter_++); }
  double next_normal() { return normal(counter_++); }

private:
  uint64_t seed_, stream_, counter_ = 0;
};

enum class RunKind { Profile, Simulate, Mcf, Converge, Spectrum, Expansion };
RunKind parse_run_kind(const std::string& name);
std::string to_string(RunKind k);

struct RunConfig {
  RunKind kind = RunKind::Profile;
  Config raw;
  uint64_t seed = 0;

  // geometry
  std::string shape = "circle";  // circle | ellipse | file
  double radius = 1.0, semi_a = 1.2, semi_b = 0.8;
  Vec2 center = Vec2::Zero();
  std::string interface_file;
  int nodes = 128;
  double delta = 0;  // tube half-width; 0 picks a quarter of the minimal radius of curvature

  // model and domain
  ModelParams model;
  std::string boundary = "periodic";  // periodic | wall
  double half_width = 2.0;
  double eps_per_h = 4.0;
  int grid = 0;  // cells per side; 0 derives it from eps_per_h

  // time
  double t_end = 0.1;
  double dt = 1e-3;
  double dt_factor = 0.125;  // dt = dt_factor eps^2 in eps sweeps
  int save_every = 10;

  // sweeps
  std::vector<double> eps_list;
  std::vector<double> dt_list;
  double rate_threshold = 1.5;

  // profile
  double profile_L = 24.0;
  int profile_n = 320;

  // parse and validate; `kind` overrides run.kind when given
  static RunConfig from(const Config& c, std::optional<RunKind> kind = std::nullopt);
  void validate() const;  // throws ConfigError with field-level messages

  Interface interface() const;
  double tube_delta() const;
  Grid2D grid_for(double eps) const;
};

struct RateReport {
  std::vector<double> eps, err;
  double order = 0, intercept = 0, r2 = 0;
  double order_stderr = 0, order_lo = 0, order_hi = 0;  // band of two standard errors
  double residual = 0;                                  // rms of the log-log fit
  double threshold = 0;
  bool pass = false;
};

// least squares of log e against log eps; needs >= 3 points, throws NonPositiveError
RateReport fit_rate(const std::vector<double>& eps, const std::vector<double>& err, double threshold = 0.0);

struct InterfaceDistance {
  double hausdorff = 0;
  double l2_normal = 0;  // sqrt(mean over arclength of the normal offset squared)
  bool fallback = false;  // point-cloud Hausdorff was used
};
InterfaceDistance compare_interfaces(const Interface& a, const Interface& b);

// Allen-Cahn with v = 0 from circular c_{A,0} data, compared with curve shortening
struct CircleRun {
  double eps = 0, dt = 0, t = 0;
  int n = 0;
  double radius = 0, reference = 0, error = 0;
  double seconds = 0;
  ScalarField2D c;
};
CircleRun allen_cahn_circle_run(double eps, double R0, double t_end, double half_width, double eps_per_h,
                                double dt_factor, double delta);

struct RunSummary {
  std::vector<std::string> outputs;
  std::string manifest;
  double seconds = 0;
};

// Executes one experiment, writing CSV tables and manifest.json into out_dir.
RunSummary run(const RunConfig& cfg, const std::string& out_dir, int threads = 1);

}  // namespace nsac
