#pragma once

#include <cstdint>

#include "calderon/analysis.hpp"

namespace calderon {

/// Full configuration of a run.  Parsed from a single JSON document with
/// a strict schema: unknown keys anywhere are hard errors.
struct RunConfig {
  GeometryParams geometry;

  struct Conductivity {
    double lambda = 0.4;
    double E = 50.0;
    ProfileSpec profile;
    BumpSpec bump;
    bool randomCenter = true;
  } conductivity;

  SolverOptions solver;

  struct Dtn {
    int maxDofs = 2000;
  } dtn;

  struct Skernel {
    double hFd = 0.0;      // 0: derived default
    int sampleStride = 8;  // every n-th boundary node in the CSV sample
  } skernel;

  struct Sweep {
    double t0 = 0.4;
    int K = 6;
    bool withReconstruction = true;
    int propagationFamily = 50;
  } sweep;

  std::uint64_t seed = 1;
  int threads = 1;

  /// Cross-module checks run before any solve.
  void validate() const;
};

RunConfig parse_config_text(const std::string& jsonText);
RunConfig parse_config_file(const std::string& path);

/// The default configuration bundled with the tool (2D disk pipeline).
std::string default_config_text();

}  // namespace calderon
