#pragma once

#include <Eigen/Core>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgm/rng.hpp"

namespace rsgm {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : GeometryError {
  using GeometryError::GeometryError;
};
struct CutLocusError : GeometryError {
  using GeometryError::GeometryError;
};
struct NonCompactError : GeometryError {
  using GeometryError::GeometryError;
};
struct UnsupportedSchemeError : GeometryError {
  using GeometryError::GeometryError;
};
struct UnsupportedManifoldError : GeometryError {
  using GeometryError::GeometryError;
};

enum class ManifoldKind { Euclidean, Sphere, Torus, SpecialOrthogonal, Hyperbolic };

// Identifies one of the supported closed-form geometries.
//
// Coordinate conventions:
//   Euclidean(d)   ambient = d
//   Sphere(d)      unit vectors in R^{d+1}
//   Torus(d)       angle vector in [0, 2pi)^d (flat chart; no embedding stored)
//   SO(3)          3x3 rotation matrix flattened row-major into R^9
//   Hyperbolic(2)  hyperboloid sheet {<x,x>_L = -1, x0 > 0} in Minkowski R^{1,2}
struct ManifoldId {
  ManifoldKind kind{ManifoldKind::Euclidean};
  int dim{1};  // intrinsic dimension

  static ManifoldId euclidean(int d) { return {ManifoldKind::Euclidean, d}; }
  static ManifoldId sphere(int d) { return {ManifoldKind::Sphere, d}; }
  static ManifoldId torus(int d) { return {ManifoldKind::Torus, d}; }
  static ManifoldId so3() { return {ManifoldKind::SpecialOrthogonal, 3}; }
  static ManifoldId hyperbolic2() { return {ManifoldKind::Hyperbolic, 2}; }

  int ambient_dim() const {
    switch (kind) {
      case ManifoldKind::Euclidean: return dim;
      case ManifoldKind::Sphere: return dim + 1;
      case ManifoldKind::Torus: return dim;
      case ManifoldKind::SpecialOrthogonal: return 9;
      case ManifoldKind::Hyperbolic: return 3;
    }
    return dim;
  }

  bool is_compact() const {
    return kind == ManifoldKind::Sphere || kind == ManifoldKind::Torus ||
           kind == ManifoldKind::SpecialOrthogonal;
  }

  // Largest radius on which exp is injective; +inf on flat/hyperbolic spaces.
  double injectivity_radius() const;

  // log of the Riemannian volume |M|; throws NonCompactError otherwise.
  double log_volume() const;

  std::string name() const;
  static ManifoldId parse(const std::string& name);

  bool operator==(const ManifoldId& o) const { return kind == o.kind && dim == o.dim; }
  bool operator!=(const ManifoldId& o) const { return !(*this == o); }
};

struct ManifoldPoint {
  ManifoldId manifold;
  Eigen::VectorXd coords;
};

struct TangentVector {
  ManifoldPoint base;
  Eigen::VectorXd vec;
};

enum class FrameScheme { Projected, LieFrame, Coordinates };

// A spanning set of tangent vectors at a base point, stored as the columns of
// an ambient_dim x n matrix with n >= d.
struct Frame {
  ManifoldPoint base;
  Eigen::MatrixXd vectors;

  int size() const { return static_cast<int>(vectors.cols()); }
  TangentVector field(int i) const { return {base, vectors.col(i)}; }
};

// --- validation ------------------------------------------------------------

// Checked constructor: throws DimensionError / GeometryError on violation.
ManifoldPoint make_point(const ManifoldId& m, Eigen::VectorXd coords, double tol = 1e-9);

bool point_satisfies_invariants(const ManifoldPoint& p, double tol = 1e-9);
bool tangent_satisfies_invariants(const TangentVector& v, double tol = 1e-9);

// --- metric ----------------------------------------------------------------

// Riemannian inner product of ambient tangent representatives.
// Sphere/Torus/Euclidean: dot product. SO(3): (1/2) tr(U^T V), so that the
// norm of Q*hat(w) equals |w| and geodesic distance equals rotation angle.
// Hyperbolic: Minkowski form (positive definite on tangent spaces).
double metric_inner(const ManifoldId& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double metric_inner(const TangentVector& u, const TangentVector& v);
double tangent_norm(const TangentVector& v);

double minkowski_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// --- core operations ---------------------------------------------------------

ManifoldPoint exp_map(const ManifoldPoint& x, const TangentVector& v);
TangentVector log_map(const ManifoldPoint& x, const ManifoldPoint& y);
TangentVector parallel_transport(const ManifoldPoint& x, const ManifoldPoint& y,
                                 const TangentVector& v);
double dist(const ManifoldPoint& x, const ManifoldPoint& y);
TangentVector project_to_tangent(const ManifoldPoint& x, const Eigen::VectorXd& w);
ManifoldPoint sample_uniform(const ManifoldId& m, Rng& rng);
Frame frame_at(const ManifoldPoint& x, FrameScheme scheme);

// Drift of the Langevin SDE (dX = -1/2 grad U dt + dB) for the Riemannian
// normal potential U = d(x,mu)^2 / (2 gamma^2): returns log_x(mu) / (2 gamma^2).
TangentVector langevin_drift(const ManifoldPoint& x, const ManifoldPoint& mu, double gamma);

// Canonical orthonormal tangent basis (ambient_dim x d). Deterministic:
// Gram-Schmidt over the projected ambient basis in pivot order where no
// closed-form basis exists.
Eigen::MatrixXd tangent_basis(const ManifoldPoint& x);

// Standard normal in the tangent space (coefficients on tangent_basis).
TangentVector gaussian_tangent(const ManifoldPoint& x, Rng& rng);

// Closest-point retraction of arbitrary ambient coordinates.
ManifoldPoint retract(const ManifoldId& m, const Eigen::VectorXd& ambient);

// --- SO(3) helpers -----------------------------------------------------------

Eigen::Matrix3d so3_hat(const Eigen::Vector3d& w);
Eigen::Vector3d so3_vee(const Eigen::Matrix3d& skew);
// Rodrigues' rotation: exp of hat(w).
Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w);
// Axis-angle log of a rotation matrix; throws CutLocusError near angle pi.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& rot);
Eigen::Matrix3d so3_unflatten(const Eigen::VectorXd& coords);
Eigen::VectorXd so3_flatten(const Eigen::Matrix3d& rot);

inline double wrap_angle_2pi(double a) {
  constexpr double two_pi = 6.283185307179586476925287;
  double r = std::fmod(a, two_pi);
  if (r < 0) r += two_pi;
  if (r >= two_pi) r = 0.0;  // guard fmod rounding
  return r;
}

// Shortest signed angle difference in (-pi, pi], ties at pi mapped to +pi.
inline double wrap_angle_signed(double a) {
  constexpr double two_pi = 6.283185307179586476925287;
  double r = std::fmod(a, two_pi);
  if (r > 3.141592653589793238462643) r -= two_pi;
  if (r <= -3.141592653589793238462643) r += two_pi;
  return r;
}

}  // namespace rsgm
