// Command-line driver: mesh construction, DtN assembly, kernel sampling,
// and the stability experiments, all driven by one JSON config.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "calderon/runner.hpp"

using namespace calderon;

namespace {

struct GlobalArgs {
  std::string configPath;
  std::string outDir = ".";
  std::uint64_t seed = 0;
  bool seedSet = false;
  int threads = 0;
};

RunConfig load_config(const GlobalArgs& g) {
  RunConfig cfg = g.configPath.empty() ? parse_config_text(default_config_text())
                                       : parse_config_file(g.configPath);
  if (g.seedSet) cfg.seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calderon: local-data impedance tomography laboratory"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.configPath, "JSON config file (bundled default otherwise)");
  app.add_option("--out-dir", g.outDir, "output directory");
  auto* seedOpt = app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--threads", g.threads, "override the config thread count");

  auto* meshCmd = app.add_subcommand("mesh", "build the tagged mesh and dump it");
  std::string meshOut, gammaOut;
  meshCmd->add_option("--mesh-out", meshOut, "mesh dump path (relative to --out-dir)");
  meshCmd->add_option("--gamma-out", gammaOut, "reference field dump path");

  auto* dtnCmd = app.add_subcommand("dtn", "assemble a DtN operator and dump it");
  std::string dtnTag = "Sigma", dtnOut, dtnGamma;
  dtnCmd->add_option("--tag", dtnTag, "Sigma (local map) or dDtilde (full map)");
  dtnCmd->add_option("--out", dtnOut, "operator dump path");
  dtnCmd->add_option("--gamma", dtnGamma, "field file to use instead of the profile");

  auto* skCmd = app.add_subcommand("skernel", "sample the S kernel on dDtilde");
  std::string skOut;
  skCmd->add_option("--out", skOut, "CSV output path");

  auto* expCmd = app.add_subcommand("experiment", "run the stability sweep");

  auto* runCmd = app.add_subcommand("run", "full pipeline with manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? static_cast<int>(ErrorKind::Usage) : 0;
  }
  g.seedSet = seedOpt->count() > 0;

  try {
    std::filesystem::create_directories(g.outDir);
    RunConfig cfg = load_config(g);
    if (meshCmd->parsed()) {
      Pipeline p(cfg);
      for (const auto& f : write_mesh_artifacts(p, g.outDir, meshOut, gammaOut))
        std::cout << "wrote " << g.outDir << "/" << f << "\n";
      return 0;
    }
    if (dtnCmd->parsed()) {
      Boundary tag;
      if (!boundary_from_string(dtnTag, tag) ||
          (tag != Boundary::Sigma && tag != Boundary::dDtilde))
        throw ValidationError(ErrorKind::Usage, "dtn.tag",
                              "tag must be Sigma or dDtilde");
      Pipeline p(cfg);
      for (const auto& f : write_dtn_artifacts(p, tag, g.outDir, dtnOut, dtnGamma))
        std::cout << "wrote " << g.outDir << "/" << f << "\n";
      return 0;
    }
    if (skCmd->parsed()) {
      Pipeline p(cfg);
      for (const auto& f : write_skernel_artifacts(p, g.outDir, skOut))
        std::cout << "wrote " << g.outDir << "/" << f << "\n";
      return 0;
    }
    if (expCmd->parsed()) {
      Pipeline p(cfg);
      for (const auto& f : write_experiment_artifacts(p, g.outDir))
        std::cout << "wrote " << g.outDir << "/" << f << "\n";
      return 0;
    }
    if (runCmd->parsed()) {
      run_all(cfg, g.outDir);
      std::cout << "wrote " << g.outDir << "/manifest.json\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error [" << e.key() << "]: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
