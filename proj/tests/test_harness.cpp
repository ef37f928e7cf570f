#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "nsac/errors.hpp"
#include "nsac/harness.hpp"

using namespace nsac;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nsac_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

}  // namespace

TEST_CASE("config parsing") {
  const auto c = Config::parse(R"(
# comment
[run]
kind = "converge"   # trailing
seed = 7
[geometry]
radius = 1.25
[sweep]
eps = [0.08, 0.04 , 0.02]
[model]
navier_stokes = false
)");
  CHECK(c.text("run.kind", "") == "converge");
  CHECK(c.integer("run.seed", 0) == 7);
  CHECK(c.number("geometry.radius", 0) == 1.25);
  CHECK(c.number("geometry.missing", 3.5) == 3.5);
  CHECK(c.flag("model.navier_stokes", true) == false);
  const auto e = c.numbers("sweep.eps", {});
  REQUIRE(e.size() == 3);
  CHECK(e[1] == 0.04);

  CHECK_THROWS_AS(Config::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("[a\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = [1, 2\n").numbers("x", {}), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = abc\n").number("x", 0), ConfigError);
  CHECK_THROWS_AS(Config::parse("x = 1.5\n").integer("x", 0), ConfigError);

  // messages carry the location
  try {
    Config::parse("[a]\nx = 1\n\nx = 2\n", "cfg.toml");
    FAIL("no throw");
  } catch (const ConfigError& err) {
    CHECK(std::string(err.what()).find("cfg.toml:4") != std::string::npos);
  }
}

TEST_CASE("run config validation") {
  auto rc = [](const std::string& text) { return RunConfig::from(Config::parse(text)); };
  const auto ok = rc("[run]\nkind = converge\n[geometry]\ndelta = 0.32\n");
  CHECK(ok.kind == RunKind::Converge);
  CHECK(ok.eps_list.size() == 3);
  CHECK(ok.rate_threshold == 1.5);

  // eps above delta/4
  CHECK_THROWS_AS(rc("[run]\nkind = converge\n"), ConfigError);
  // unknown key, key of another kind
  CHECK_THROWS_AS(rc("[run]\nkind = profile\n[profile]\nLL = 3\n"), ConfigError);
  CHECK_THROWS_AS(rc("[run]\nkind = profile\n[sweep]\neps = [0.1]\n"), ConfigError);
  // sweep with two points
  CHECK_THROWS_AS(rc("[run]\nkind = converge\n[geometry]\ndelta = 0.32\n[sweep]\neps = [0.08, 0.04]\n"), ConfigError);
  CHECK_THROWS_AS(rc("[run]\nkind = converge\n[geometry]\ndelta = 0.32\n[sweep]\neps = []\n"), ConfigError);
  CHECK_THROWS_AS(rc("[run]\nkind = converge\n[geometry]\nshape = ellipse\ndelta = 0.2\n"), ConfigError);
  CHECK_THROWS_AS(rc("[run]\nkind = mcf\n[time]\nt_end = 0.6\n"), ConfigError);
  CHECK_THROWS_AS(rc("[run]\nkind = nope\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from(Config::parse("[run]\nkind = mcf\n"), RunKind::Profile), ConfigError);

  try {
    rc("[run]\nkind = simulate\n[model]\neps = 0.2\n");
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.eps") != std::string::npos);
  }
}

TEST_CASE("hash and rng determinism") {
  const auto a = Config::parse("[x]\nb = 1\na = 2\n");
  const auto b = Config::parse("# other order\n[x]\na = 2\n\nb = 1\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != Config::parse("[x]\na = 2\nb = 3\n").hash());
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");

  CounterRng r1(42, 3), r2(42, 3), r3(42, 4);
  for (int k = 0; k < 10; ++k) CHECK(r1.next() == r2.bits(k));
  CHECK(r3.bits(0) != r2.bits(0));
  double m = 0, v = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double u = r2.uniform(k);
    CHECK_FALSE((u < 0 || u >= 1));
    const double z = r3.normal(k);
    m += z;
    v += z * z;
  }
  CHECK(std::abs(m / n) < 0.03);
  CHECK(std::abs(v / n - 1) < 0.05);
}

TEST_CASE("rate fit") {
  const std::vector<double> eps{0.08, 0.04, 0.02};
  {
    std::vector<double> e;
    for (double x : eps) e.push_back(0.5 * x * x);
    const auto r = fit_rate(eps, e, 1.5);
    CHECK(r.order == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(r.pass);
    CHECK(r.r2 == doctest::Approx(1.0));
    CHECK(r.order_stderr < 1e-8);
  }
  {
    std::vector<double> e;
    for (double x : eps) e.push_back(3 * std::pow(x, 1.5));
    const auto r = fit_rate(eps, e, 1.5);
    CHECK(r.order == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(r.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  }
  {
    // 5% deterministic noise keeps the order near 2
    CounterRng rng(1);
    std::vector<double> xs{0.16, 0.08, 0.04, 0.02, 0.01}, e;
    for (size_t k = 0; k < xs.size(); ++k) e.push_back(xs[k] * xs[k] * (1 + 0.05 * (2 * rng.uniform(k) - 1)));
    const auto r = fit_rate(xs, e, 1.5);
    CHECK(r.order > 1.9);
    CHECK(r.order < 2.1);
    CHECK(r.order_lo <= r.order);
    CHECK(r.order_hi >= r.order);
  }
  CHECK_THROWS_AS(fit_rate(eps, {1e-3, 0.0, 1e-4}), NonPositiveError);
  CHECK_THROWS_AS(fit_rate({0.1, 0.05}, {1e-2, 1e-3}), std::invalid_argument);
}

TEST_CASE("interface comparison") {
  const auto a = Interface::circle(1.0, 128);
  CHECK(compare_interfaces(a, a).hausdorff < 1e-12);
  const double h = 0.01;
  const auto d = compare_interfaces(a, Interface::circle(1.0 + h, 96, Vec2::Zero(), true, 0.3));
  CHECK(d.hausdorff == doctest::Approx(h).epsilon(1e-6));
  CHECK(d.l2_normal == doctest::Approx(h).epsilon(1e-6));
  CHECK_FALSE(d.fallback);
  // far apart: the tube projection fails and the point cloud is used
  const auto far = compare_interfaces(a, Interface::circle(1.0, 128, Vec2(5, 0)));
  CHECK(far.fallback);
  CHECK(far.hausdorff == doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("profile and mcf runs") {
  const auto dir = scratch("profile");
  const auto s = run(RunConfig::from(Config::parse("[run]\nkind = profile\n")), dir.string());
  CHECK(fs::exists(dir / "profile.csv"));
  const auto m = manifest(dir);
  CHECK(m["results"]["sigma"].get<double>() == doctest::Approx(2.0 / 3.0).epsilon(1e-8));
  CHECK(m["results"]["sup_error_tanh"].get<double>() < 1e-8);
  CHECK(m["config_hash"].get<std::string>().size() == 16);
  CHECK(s.outputs.size() == 2);

  const auto mdir = scratch("mcf");
  const auto cfg = RunConfig::from(Config::parse("[run]\nkind = mcf\n[time]\nt_end = 0.2\ndt = 1e-3\n"
                                                 "[sweep]\ndt = [4e-3, 2e-3, 1e-3]\n"));
  run(cfg, mdir.string());
  const auto mm = manifest(mdir);
  CHECK(mm["results"]["relative_error"].get<double>() < 1e-3);
  CHECK(mm["results"]["temporal_order"].get<double>() > 0.8);
  CHECK(fs::exists(mdir / "front_history.csv"));
  CHECK(fs::exists(mdir / "radius.csv"));
}

TEST_CASE("converge run is reproducible") {
  const std::string text =
      "[run]\nkind = converge\n[geometry]\nradius = 1\ndelta = 0.32\n[domain]\nhalf_width = 1.5\n"
      "[time]\nt_end = 0.01\n[sweep]\neps = [0.08, 0.065, 0.05]\n";
  const auto cfg = RunConfig::from(Config::parse(text));
  const auto d1 = scratch("conv1"), d2 = scratch("conv2");
  run(cfg, d1.string(), 1);
  run(cfg, d2.string(), 2);
  CHECK(slurp(d1 / "convergence.csv") == slurp(d2 / "convergence.csv"));
  CHECK(slurp(d1 / "rate.json") == slurp(d2 / "rate.json"));
  const auto m = manifest(d1);
  CHECK(m["threads"].get<int>() == 1);
  CHECK(m["results"]["order"].get<double>() > 1.0);
}

TEST_CASE("simulate, spectrum and expansion runs") {
  {
    const auto dir = scratch("sim");
    const auto cfg = RunConfig::from(Config::parse(
        "[run]\nkind = simulate\n[geometry]\nshape = ellipse\na = 1.0\nb = 0.9\ndelta = 0.25\n"
        "[model]\neps = 0.06\nnu_plus = 10\n[domain]\ngrid = 64\n[time]\nt_end = 2e-3\ndt = 2e-4\nsave_every = 5\n"));
    run(cfg, dir.string());
    const auto m = manifest(dir);
    CHECK(m["results"]["steps"].get<int>() == 10);
    CHECK(m["results"]["energy_final"].get<double>() < m["results"]["energy_initial"].get<double>());
    CHECK(fs::exists(dir / "diagnostics.csv"));
    CHECK(fs::exists(dir / "snap_00010.bin"));
    CHECK(fs::exists(dir / "final_interface.csv"));
  }
  {
    const auto dir = scratch("spectrum");
    const auto cfg = RunConfig::from(Config::parse(
        "[run]\nkind = spectrum\n[geometry]\nradius = 1.5\ndelta = 0.48\n[sweep]\neps = [0.12, 0.1, 0.08]\n"));
    run(cfg, dir.string());
    const auto m = manifest(dir);
    CHECK(m["results"]["C"].get<double>() > 0);
    CHECK(m["results"]["C"].get<double>() < 0.5);
    CHECK(fs::exists(dir / "spectrum.csv"));
  }
  {
    const auto dir = scratch("exp");
    const auto cfg = RunConfig::from(Config::parse(
        "[run]\nkind = expansion\n[geometry]\nradius = 1.2\nnodes = 64\n[model]\neps = 0.05\n"
        "[time]\nt_end = 0.05\ndt = 1e-3\n"));
    run(cfg, dir.string());
    const auto m = manifest(dir);
    CHECK(m["results"]["g0_interface_rel_error"].get<double>() < 1e-8);
    CHECK(m["results"]["g0_off_rel_error"].get<double>() < 1e-6);
    CHECK(m["results"]["h1_max"].get<double>() < 1e-10);
    CHECK(fs::exists(dir / "height.csv"));
    CHECK(fs::exists(dir / "cA0.bin"));
  }
}
