#include "calderon/runner.hpp"

#include <filesystem>
#include <fstream>
#include <random>

namespace calderon {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ValidationError(ErrorKind::Io, "io", "cannot write " + path);
  return os;
}

}  // namespace

Pipeline::Pipeline(const RunConfig& c)
    : cfg(c), mesh(build_domain(c.geometry)), grads(mesh),
      gamma0(make_reference(mesh, c.conductivity.profile, c.conductivity.lambda,
                            c.conductivity.E)) {}

BumpSpec Pipeline::seededBump() const {
  BumpSpec bump = cfg.conductivity.bump;
  if (cfg.conductivity.randomCenter) {
    std::mt19937_64 rng(cfg.seed ^ 0x73776565702d6273ull);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Vec3 cm = Vec3::Zero();
    double vol = 0;
    for (int c : mesh.cellsOf({Region::D})) {
      Vec3 b = Vec3::Zero();
      b.head(mesh.dim) = mesh.cellBarycenter.row(c);
      cm += mesh.cellVolume[c] * b;
      vol += mesh.cellVolume[c];
    }
    cm /= vol;
    double slack = 0.1 * bump.width;
    for (int d = 0; d < mesh.dim; ++d) cm[d] += slack * unif(rng);
    bump.center = cm;
  }
  return bump;
}

SweepOptions Pipeline::sweepOptions() const {
  SweepOptions sw;
  sw.t0 = cfg.sweep.t0;
  sw.K = cfg.sweep.K;
  sw.bump = seededBump();
  sw.randomCenter = false;  // center already resolved, keep rows comparable
  sw.withReconstruction = cfg.sweep.withReconstruction;
  sw.hFd = fdStep();
  sw.propagationFamily = cfg.sweep.propagationFamily;
  sw.seed = cfg.seed;
  return sw;
}

double Pipeline::fdStep() const {
  return cfg.skernel.hFd > 0 ? cfg.skernel.hFd : default_fd_step(cfg.geometry);
}

std::vector<std::string> write_mesh_artifacts(const Pipeline& p,
                                              const std::string& outDir,
                                              const std::string& meshOut,
                                              const std::string& gammaOut) {
  std::vector<std::string> files;
  std::string meshFile = meshOut.empty() ? "mesh.txt" : meshOut;
  dump_mesh(p.mesh, outDir + "/" + meshFile);
  files.push_back(meshFile);
  std::string gammaFile = gammaOut.empty() ? "gamma0.txt" : gammaOut;
  dump_field_values(p.gamma0.values, p.gamma0.lambda, p.gamma0.E, p.gamma0.E1,
                    outDir + "/" + gammaFile);
  files.push_back(gammaFile);

  BumpSpec bump = p.seededBump();
  bump.amplitude = p.cfg.conductivity.bump.amplitude;
  if (bump.amplitude != 0) {
    PerturbResult pr = perturb_in_D(p.gamma0, bump);
    dump_field_values(pr.gamma.values, pr.gamma.lambda, pr.gamma.E, pr.gamma.E1,
                      outDir + "/gamma1.txt");
    files.push_back("gamma1.txt");
  }
  return files;
}

std::vector<std::string> write_dtn_artifacts(const Pipeline& p, Boundary tag,
                                             const std::string& outDir,
                                             const std::string& outFile,
                                             const std::string& gammaPath) {
  ConductivityField gamma = p.gamma0;
  if (!gammaPath.empty()) {
    FieldFile f = load_field_values(gammaPath);
    if (f.values.size() != p.mesh.numVertices())
      throw ValidationError(ErrorKind::Io, "dtn.gamma",
                            "field file does not match the mesh vertex count");
    gamma.values = f.values;
    gamma.lambda = f.lambda;
    gamma.E = f.E;
    gamma.E1 = f.E1;
  }
  BoundaryOperator op =
      (tag == Boundary::Sigma)
          ? assemble_local_dtn(p.mesh, p.grads, gamma, p.cfg.solver)
          : assemble_full_dtn(p.mesh, p.grads, gamma, p.cfg.solver);
  if (static_cast<int>(op.dofs.size()) > p.cfg.dtn.maxDofs)
    throw ValidationError(ErrorKind::Solver, "dtn.max_dofs",
                          "boundary dof count " + std::to_string(op.dofs.size()) +
                              " exceeds dtn.max_dofs");
  std::string file = outFile.empty()
                         ? (tag == Boundary::Sigma ? "dtn_sigma.txt" : "dtn_dDtilde.txt")
                         : outFile;
  auto os = open_out(outDir + "/" + file);
  os << "calderon-boundary-operator 1\n";
  os << "tag " << to_string(tag) << "\n";
  os << "dofs " << op.dofs.size() << "\n";
  for (int v : op.dofs) os << v << "\n";
  dump_matrix(op.op, "operator", os);
  dump_matrix(op.gram, "gram_half", os);
  return {file};
}

void write_skernel_csv(const SKernelSample& sample, const std::string& path) {
  auto os = open_out(path);
  os << "z_index,w_index,S,dS_dnu_z,dS_dnu_w,d2S_dnu_z_dnu_w\n";
  for (Eigen::Index j = 0; j < sample.values.rows(); ++j)
    for (Eigen::Index k = 0; k < sample.values.cols(); ++k)
      os << j << "," << k << "," << format_double(sample.values(j, k)) << ","
         << format_double(sample.dSdnuZ(j, k)) << ","
         << format_double(sample.dSdnuW(j, k)) << ","
         << format_double(sample.d2SdnuZdnuW(j, k)) << "\n";
}

std::vector<std::string> write_skernel_artifacts(const Pipeline& p,
                                                 const std::string& outDir,
                                                 const std::string& outFile) {
  BumpSpec bump = p.seededBump();
  bump.amplitude = p.cfg.conductivity.bump.amplitude;
  if (bump.amplitude == 0)
    throw ValidationError(ErrorKind::Conductivity, "conductivity.bump.amplitude",
                          "kernel sampling needs a nonzero perturbation");
  PerturbResult pert = perturb_in_D(p.gamma0, bump);
  SKernelEngine engine(p.mesh, p.grads, p.gamma0, pert.gamma, p.cfg.solver);

  NodalQuadrature quad = nodal_quadrature(p.mesh, Boundary::dDtilde);
  // Strided subsample keeps the pairwise grid affordable.
  SurfaceQuadrature sub;
  int stride = std::max(1, p.cfg.skernel.sampleStride);
  std::vector<int> idx;
  for (size_t i = 0; i < quad.verts.size(); i += stride) idx.push_back(i);
  sub.points.resize(idx.size(), p.mesh.dim);
  sub.normals.resize(idx.size(), p.mesh.dim);
  sub.weights.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    sub.points.row(i) = p.mesh.vertices.row(quad.verts[idx[i]]);
    sub.normals.row(i) = quad.normals.row(idx[i]);
    sub.weights[i] = quad.weights[idx[i]];
  }
  SKernelSample sample = engine.normal_derivatives(sub, p.fdStep());

  std::string file = outFile.empty() ? "skernel.csv" : outFile;
  write_skernel_csv(sample, outDir + "/" + file);
  return {file};
}

void write_experiment_csv(const ExperimentReport& rep, const std::string& path) {
  auto os = open_out(path);
  os << "t,epsilon,fullGap,supGap\n";
  for (const auto& r : rep.rows)
    os << format_double(r.t) << "," << format_double(r.epsilon) << ","
       << format_double(r.fullGap) << "," << format_double(r.supGap) << "\n";
  os << "# summary\n";
  os << "# beta " << format_double(rep.fittedBeta) << "\n";
  os << "# beta_C " << format_double(rep.betaC) << "\n";
  os << "# beta_r2 " << format_double(rep.betaR2) << "\n";
  os << "# beta_residual " << format_double(rep.betaResidual) << "\n";
  os << "# delta " << format_double(rep.fittedDelta) << "\n";
  os << "# delta_C " << format_double(rep.deltaC) << "\n";
  os << "# delta_residual " << format_double(rep.deltaResidual) << "\n";
  os << "# eta " << format_double(rep.fittedEta) << "\n";
  os << "# eta_C " << format_double(rep.etaC) << "\n";
  os << "# eta_margin " << format_double(rep.etaMargin) << "\n";
  os << "# supgap_cap " << format_double(rep.lambdaInvCap) << "\n";
  os << "# epsilon_strictly_decreasing "
     << (rep.epsilonStrictlyDecreasing ? 1 : 0) << "\n";
  for (const auto& r : rep.rows)
    if (r.reconRelGap >= 0)
      os << "# recon_rel_gap t=" << format_double(r.t) << " "
         << format_double(r.reconRelGap) << "\n";
}

std::vector<std::string> write_experiment_artifacts(const Pipeline& p,
                                                    const std::string& outDir) {
  ExperimentReport rep =
      stability_sweep(p.mesh, p.grads, p.gamma0, p.sweepOptions(), p.cfg.solver);
  write_experiment_csv(rep, outDir + "/experiment.csv");
  return {"experiment.csv"};
}

int run_all(const RunConfig& cfg, const std::string& outDir) {
  std::filesystem::create_directories(outDir);
  Pipeline p(cfg);
  Manifest manifest(outDir);
  for (const auto& f : write_mesh_artifacts(p, outDir)) manifest.add(f);
  for (const auto& f : write_dtn_artifacts(p, Boundary::Sigma, outDir))
    manifest.add(f);
  for (const auto& f : write_dtn_artifacts(p, Boundary::dDtilde, outDir))
    manifest.add(f);
  for (const auto& f : write_skernel_artifacts(p, outDir)) manifest.add(f);
  for (const auto& f : write_experiment_artifacts(p, outDir)) manifest.add(f);
  manifest.write();
  return 0;
}

}  // namespace calderon
