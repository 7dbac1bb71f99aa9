#pragma once

#include "calderon/config.hpp"
#include "calderon/manifest.hpp"
#include "calderon/mesh_io.hpp"

namespace calderon {

/// Rebuilds the deterministic pipeline pieces from a config.
struct Pipeline {
  explicit Pipeline(const RunConfig& cfg);

  RunConfig cfg;
  MeshedDomain mesh;
  MeshGradients grads;
  ConductivityField gamma0;

  BumpSpec seededBump() const;  // seeded center inside D when requested
  SweepOptions sweepOptions() const;
  double fdStep() const;
};

/// Subcommand bodies; each returns the list of files written (relative to
/// outDir) so `run` can assemble the manifest.
std::vector<std::string> write_mesh_artifacts(const Pipeline& p,
                                              const std::string& outDir,
                                              const std::string& meshOut = "",
                                              const std::string& gammaOut = "");
std::vector<std::string> write_dtn_artifacts(const Pipeline& p, Boundary tag,
                                             const std::string& outDir,
                                             const std::string& outFile = "",
                                             const std::string& gammaPath = "");
std::vector<std::string> write_skernel_artifacts(const Pipeline& p,
                                                 const std::string& outDir,
                                                 const std::string& outFile = "");
std::vector<std::string> write_experiment_artifacts(const Pipeline& p,
                                                    const std::string& outDir);

/// The all-in-one pipeline: mesh, fields, operators, kernel CSV,
/// experiment CSV, manifest.
int run_all(const RunConfig& cfg, const std::string& outDir);

void write_experiment_csv(const ExperimentReport& rep, const std::string& path);
void write_skernel_csv(const SKernelSample& sample, const std::string& path);

}  // namespace calderon
