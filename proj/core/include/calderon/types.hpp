#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace calderon {

using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Region tag of a cell inside the augmented domain.
enum class Region : std::uint8_t {
  A = 0,                 // exterior attachment (the bulge)
  OmegaMinusDtilde = 1,
  DtildeMinusDprime = 2,
  DprimeMinusD = 3,
  D = 4,
};

/// Tag of a marked facet.  Sigma0 facets are interior to the augmented
/// domain (the attachment interface); Sigma here means the accessible
/// part of the original boundary outside Sigma0.  dD* facets are the
/// interior scaffold interfaces.
enum class Boundary : std::uint8_t {
  Sigma = 0,
  Sigma0 = 1,
  OuterRest = 2,
  dDtilde = 3,
  dDprime = 4,
  dD = 5,
};

const char* to_string(Region r);
const char* to_string(Boundary b);
bool region_from_string(const std::string& s, Region& out);
bool boundary_from_string(const std::string& s, Boundary& out);

/// Validation failure categories; the CLI maps each to a distinct exit code.
enum class ErrorKind : int {
  Usage = 2,
  ConfigParse = 3,
  Geometry = 4,
  Conductivity = 5,
  Solver = 6,
  Io = 7,
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(ErrorKind kind, std::string key, const std::string& what)
      : std::runtime_error(what), kind_(kind), key_(std::move(key)) {}
  ErrorKind kind() const { return kind_; }
  const std::string& key() const { return key_; }

 private:
  ErrorKind kind_;
  std::string key_;
};

}  // namespace calderon
