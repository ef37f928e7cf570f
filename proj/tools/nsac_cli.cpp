#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nsac/errors.hpp"
#include "nsac/harness.hpp"

using namespace nsac;

namespace {

struct Args {
  std::string config;
  std::string out = "out";
  int threads = 1;
  std::vector<std::string> overrides;
};

int execute(RunKind kind, const Args& a) {
  Config c = a.config.empty() ? Config::parse("", "<defaults>") : Config::load(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const RunConfig cfg = RunConfig::from(c, kind);
  const RunSummary s = run(cfg, a.out, a.threads);
  for (const auto& f : s.outputs) std::cout << a.out << "/" << f << "\n";
  std::cout << s.manifest << "\n";
  std::cerr << to_string(kind) << " finished in " << s.seconds << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Navier-Stokes/Allen-Cahn sharp interface experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  const std::vector<std::pair<RunKind, std::string>> kinds{
      {RunKind::Profile, "optimal profile and surface tension constants"},
      {RunKind::Simulate, "diffuse-interface simulation"},
      {RunKind::Mcf, "sharp-interface front tracking"},
      {RunKind::Converge, "eps sweep of the interface error against curve shortening"},
      {RunKind::Spectrum, "smallest eigenvalue of the linearised operator over an eps sweep"},
      {RunKind::Expansion, "approximate solution, g0 and h1 on a shrinking circle"}};

  Args args;
  std::optional<RunKind> chosen;
  for (const auto& [kind, help] : kinds) {
    auto* sub = app.add_subcommand(to_string(kind), help);
    sub->add_option("--config", args.config, "config file")->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory")->capture_default_str();
    sub->add_option("--threads", args.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--set", args.overrides, "override a config entry, section.key=value");
    sub->callback([&chosen, k = kind] { chosen = k; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return execute(*chosen, args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
