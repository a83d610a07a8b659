// Command-line front end. Exit codes: 0 all checks pass, 1 a check failed,
// 2 usage or configuration error.
#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "gapsphere/experiments.hpp"

namespace ex = gapsphere::experiments;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  bool dumpConfig = false;
};

const char* summary(const std::string& name) {
  if (name == "sample") return "Draw states from a measure and write them out";
  if (name == "density") return "Evaluate the G, GA and GAP densities at given points";
  if (name == "verify") return "Run the invariant batteries for GAP and EIG";
  if (name == "typicality") return "Conditional wave function typicality over growing environments";
  if (name == "heatbath") return "Qubit in a microcanonical bath: conditional measure against GAP";
  if (name == "compare") return "Compare GAP with EIG, extremal, Brody-Hughston and Guerra-Loffredo";
  return "Tabulate the two-level density f(s) for several delta values";
}

int run(const std::string& name, const Options& o) {
  const ex::ExperimentConfig cfg = ex::loadConfig(name, o.config, o.seed);
  const bool tabular = name == "sample" || name == "density" || name == "figure1";
  const std::string format = o.format.empty() ? (tabular ? "csv" : "json") : o.format;

  std::unique_ptr<std::ofstream> file;
  if (!o.out.empty()) {
    file = std::make_unique<std::ofstream>(o.out);
    if (!*file) throw ex::ConfigError("cannot open output file '" + o.out + "'");
  }
  std::ostream& out = file ? *file : std::cout;

  if (o.dumpConfig) {
    out << cfg.toJson().dump(2) << '\n';
    return 0;
  }
  if (name == "sample") {
    const auto batch = ex::runSample(cfg);
    if (format == "csv")
      ex::writeSamplesCsv(out, batch);
    else
      out << ex::samplesJson(cfg, batch).dump(2) << '\n';
    return 0;
  }
  if (name == "density") {
    const auto rows = ex::runDensity(cfg);
    if (format == "csv")
      ex::writeDensityCsv(out, rows);
    else
      out << ex::densityJson(cfg, rows).dump(2) << '\n';
    return 0;
  }
  if (name == "figure1") {
    if (format == "csv")
      ex::writeFigure1Csv(out, cfg);
    else
      out << ex::figure1Json(cfg).dump(2) << '\n';
    return 0;
  }

  const auto start = std::chrono::steady_clock::now();
  ex::RunReport report = ex::runExperiment(cfg);
  report.wallTimeSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (format == "csv") {
    out << "check,pass\n";
    for (const auto& c : report.checks) out << '"' << c.name << "\"," << (c.pass ? 1 : 0) << '\n';
  } else {
    out << report.toJson().dump(2) << '\n';
  }
  for (const auto& c : report.checks) std::cerr << (c.pass ? "PASS " : "FAIL ") << c.name << '\n';
  std::cerr << name << ": " << (report.pass ? "all checks passed" : "some checks failed") << " in "
            << report.wallTimeSeconds << " s\n";
  return report.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gapsphere: Gaussian adjusted projected measures on the unit sphere"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  for (const auto& name : ex::experimentNames()) {
    CLI::App* sub = app.add_subcommand(name, summary(name));
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed (overrides the config file)");
    sub->add_option("--out", o.out, "Output file (default: standard output)");
    sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--dump-config", o.dumpConfig, "Print the resolved configuration and exit");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }
  const CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) o.seed = seed;
  try {
    return run(chosen->get_name(), o);
  } catch (const ex::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
