#include "rsgm/manifold.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace rsgm {

namespace {

constexpr double kPi = 3.141592653589793238462643;

void require_same_manifold(const ManifoldId& a, const ManifoldId& b) {
  if (a != b) throw DimensionError("operands live on different manifolds");
}

void require_ambient(const ManifoldId& m, const Eigen::VectorXd& v) {
  if (v.size() != m.ambient_dim()) throw DimensionError("ambient dimension mismatch");
}

// sin(t)/t with series fallback below the small-angle threshold
double sinc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}

// (1 - cos(t)) / t^2
double cosc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  }
  return (1.0 - std::cos(t)) / (t * t);
}

// t / sin(t)
double inv_sinc(double t) {
  if (std::abs(t) < 1e-4) {
    const double t2 = t * t;
    return 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0;
  }
  return t / std::sin(t);
}

}  // namespace

// --- ManifoldId ---------------------------------------------------------------

double ManifoldId::injectivity_radius() const {
  switch (kind) {
    case ManifoldKind::Sphere: return kPi;
    case ManifoldKind::Torus: return kPi;
    case ManifoldKind::SpecialOrthogonal: return kPi;
    default: return std::numeric_limits<double>::infinity();
  }
}

double ManifoldId::log_volume() const {
  switch (kind) {
    case ManifoldKind::Sphere: {
      // |S^d| = 2 pi^{(d+1)/2} / Gamma((d+1)/2)
      const double half = 0.5 * (dim + 1);
      return std::log(2.0) + half * std::log(kPi) - std::lgamma(half);
    }
    case ManifoldKind::Torus:
      return dim * std::log(2.0 * kPi);
    case ManifoldKind::SpecialOrthogonal:
      // bi-invariant metric with dist = rotation angle
      return std::log(8.0 * kPi * kPi);
    default:
      throw NonCompactError("volume undefined for non-compact manifold");
  }
}

std::string ManifoldId::name() const {
  switch (kind) {
    case ManifoldKind::Euclidean: return "euclidean" + std::to_string(dim);
    case ManifoldKind::Sphere: return "sphere" + std::to_string(dim);
    case ManifoldKind::Torus: return "torus" + std::to_string(dim);
    case ManifoldKind::SpecialOrthogonal: return "so3";
    case ManifoldKind::Hyperbolic: return "hyperbolic2";
  }
  return "unknown";
}

ManifoldId ManifoldId::parse(const std::string& name) {
  auto tail_int = [&](size_t prefix_len) {
    const int d = std::stoi(name.substr(prefix_len));
    if (d < 1) throw DimensionError("manifold dimension must be >= 1: " + name);
    return d;
  };
  if (name == "so3") return so3();
  if (name == "hyperbolic2" || name == "h2") return hyperbolic2();
  if (name.rfind("sphere", 0) == 0) return sphere(tail_int(6));
  if (name.rfind("torus", 0) == 0) return torus(tail_int(5));
  if (name.rfind("euclidean", 0) == 0) return euclidean(tail_int(9));
  throw GeometryError("unknown manifold name: " + name);
}

// --- validation ----------------------------------------------------------------

bool point_satisfies_invariants(const ManifoldPoint& p, double tol) {
  const ManifoldId& m = p.manifold;
  if (p.coords.size() != m.ambient_dim()) return false;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return p.coords.allFinite();
    case ManifoldKind::Sphere:
      return std::abs(p.coords.norm() - 1.0) <= tol;
    case ManifoldKind::Torus:
      for (int i = 0; i < p.coords.size(); ++i) {
        if (!(p.coords[i] >= 0.0 && p.coords[i] < 2.0 * kPi)) return false;
      }
      return true;
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d q = so3_unflatten(p.coords);
      return (q.transpose() * q - Eigen::Matrix3d::Identity()).norm() <= 3.0 * tol &&
             std::abs(q.determinant() - 1.0) <= tol;
    }
    case ManifoldKind::Hyperbolic:
      return std::abs(minkowski_inner(p.coords, p.coords) + 1.0) <= tol && p.coords[0] > 0.0;
  }
  return false;
}

bool tangent_satisfies_invariants(const TangentVector& v, double tol) {
  const ManifoldId& m = v.base.manifold;
  if (v.vec.size() != m.ambient_dim()) return false;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus:
      return v.vec.allFinite();
    case ManifoldKind::Sphere:
      return std::abs(v.vec.dot(v.base.coords)) <= tol * std::max(1.0, v.vec.norm());
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d q = so3_unflatten(v.base.coords);
      const Eigen::Matrix3d a = q.transpose() * so3_unflatten(v.vec);
      return (a + a.transpose()).norm() <= 3.0 * tol * std::max(1.0, a.norm());
    }
    case ManifoldKind::Hyperbolic:
      return std::abs(minkowski_inner(v.vec, v.base.coords)) <=
             tol * std::max(1.0, v.vec.norm());
  }
  return false;
}

ManifoldPoint make_point(const ManifoldId& m, Eigen::VectorXd coords, double tol) {
  require_ambient(m, coords);
  ManifoldPoint p{m, std::move(coords)};
  if (!point_satisfies_invariants(p, tol)) throw GeometryError("point violates manifold invariants");
  return p;
}

// --- metric ---------------------------------------------------------------------

double minkowski_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

double metric_inner(const ManifoldId& m, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  switch (m.kind) {
    case ManifoldKind::SpecialOrthogonal: return 0.5 * u.dot(v);
    case ManifoldKind::Hyperbolic: return minkowski_inner(u, v);
    default: return u.dot(v);
  }
}

double metric_inner(const TangentVector& u, const TangentVector& v) {
  return metric_inner(u.base.manifold, u.vec, v.vec);
}

double tangent_norm(const TangentVector& v) {
  const double sq = metric_inner(v.base.manifold, v.vec, v.vec);
  return std::sqrt(std::max(0.0, sq));
}

// --- SO(3) helpers ----------------------------------------------------------------

Eigen::Matrix3d so3_hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
  return s;
}

Eigen::Vector3d so3_vee(const Eigen::Matrix3d& s) {
  return Eigen::Vector3d(s(2, 1), s(0, 2), s(1, 0));
}

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d k = so3_hat(w);
  return Eigen::Matrix3d::Identity() + sinc(theta) * k + cosc(theta) * k * k;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& rot) {
  const double cos_theta = std::clamp(0.5 * (rot.trace() - 1.0), -1.0, 1.0);
  const Eigen::Vector3d v = so3_vee(rot - rot.transpose());  // 2 sin(theta) * axis
  const double sin_theta = 0.5 * v.norm();
  const double theta = std::atan2(sin_theta, cos_theta);
  if (theta > kPi - 1e-9) throw CutLocusError("so3 log near angle pi");
  if (theta < kPi - 1e-4) {
    return 0.5 * inv_sinc(theta) * v;
  }
  // near (but not at) the cut locus: axis from the symmetric part, sign from v
  const Eigen::Matrix3d s = 0.5 * (rot + Eigen::Matrix3d::Identity());
  int j = 0;
  s.diagonal().maxCoeff(&j);
  Eigen::Vector3d axis = s.col(j) / std::sqrt(s(j, j));
  if (axis.dot(v) < 0) axis = -axis;
  return theta * axis.normalized();
}

Eigen::Matrix3d so3_unflatten(const Eigen::VectorXd& coords) {
  Eigen::Matrix3d q;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) q(r, c) = coords[3 * r + c];
  return q;
}

Eigen::VectorXd so3_flatten(const Eigen::Matrix3d& rot) {
  Eigen::VectorXd v(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[3 * r + c] = rot(r, c);
  return v;
}

// --- exp / log / transport / dist ------------------------------------------------

ManifoldPoint exp_map(const ManifoldPoint& x, const TangentVector& v) {
  require_same_manifold(x.manifold, v.base.manifold);
  require_ambient(x.manifold, v.vec);
  if (!tangent_satisfies_invariants(v, 1e-6)) {
    throw GeometryError("exp_map: vector is not tangent at the base point");
  }
  const ManifoldId& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {m, x.coords + v.vec};
    case ManifoldKind::Torus: {
      Eigen::VectorXd a = x.coords + v.vec;
      for (int i = 0; i < a.size(); ++i) a[i] = wrap_angle_2pi(a[i]);
      return {m, std::move(a)};
    }
    case ManifoldKind::Sphere: {
      const double r = v.vec.norm();
      Eigen::VectorXd y = std::cos(r) * x.coords + sinc(r) * v.vec;
      y.normalize();
      return {m, std::move(y)};
    }
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d q = so3_unflatten(x.coords);
      const Eigen::Matrix3d a = q.transpose() * so3_unflatten(v.vec);
      const Eigen::Vector3d w = so3_vee(0.5 * (a - a.transpose()));
      return {m, so3_flatten(q * so3_exp(w))};
    }
    case ManifoldKind::Hyperbolic: {
      const double r2 = minkowski_inner(v.vec, v.vec);
      const double r = std::sqrt(std::max(0.0, r2));
      Eigen::VectorXd y;
      if (r < 1e-8) {
        y = x.coords + v.vec + 0.5 * r2 * x.coords;
      } else {
        y = std::cosh(r) * x.coords + (std::sinh(r) / r) * v.vec;
      }
      // renormalize onto the sheet
      const double s = std::sqrt(std::max(1e-300, -minkowski_inner(y, y)));
      y /= s;
      return {m, std::move(y)};
    }
  }
  throw GeometryError("unreachable");
}

TangentVector log_map(const ManifoldPoint& x, const ManifoldPoint& y) {
  require_same_manifold(x.manifold, y.manifold);
  const ManifoldId& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {x, y.coords - x.coords};
    case ManifoldKind::Torus: {
      Eigen::VectorXd v(m.dim);
      for (int i = 0; i < m.dim; ++i) v[i] = wrap_angle_signed(y.coords[i] - x.coords[i]);
      return {x, std::move(v)};
    }
    case ManifoldKind::Sphere: {
      const double c = std::clamp(x.coords.dot(y.coords), -1.0, 1.0);
      Eigen::VectorXd u = y.coords - c * x.coords;
      const double s = u.norm();  // sin(theta)
      const double theta = std::atan2(s, c);
      if (theta > kPi - 1e-9) throw CutLocusError("sphere log at antipode");
      if (s < 1e-14) return {x, Eigen::VectorXd::Zero(m.ambient_dim())};
      return {x, (theta / s) * u};
    }
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d q1 = so3_unflatten(x.coords);
      const Eigen::Matrix3d q2 = so3_unflatten(y.coords);
      const Eigen::Vector3d w = so3_log(q1.transpose() * q2);
      return {x, so3_flatten(q1 * so3_hat(w))};
    }
    case ManifoldKind::Hyperbolic: {
      const Eigen::VectorXd diff = x.coords - y.coords;
      const double delta = 0.5 * minkowski_inner(diff, diff);  // cosh(d) - 1, stable
      if (delta <= 0.0) return {x, Eigen::VectorXd::Zero(3)};
      const double sinh_d = std::sqrt(delta * (delta + 2.0));
      const double d = std::asinh(sinh_d);
      const double c = 1.0 + delta;  // -<x, y>_L
      Eigen::VectorXd u = y.coords - c * x.coords;  // norm sinh(d)
      return {x, (d / sinh_d) * u};
    }
  }
  throw GeometryError("unreachable");
}

double dist(const ManifoldPoint& x, const ManifoldPoint& y) {
  require_same_manifold(x.manifold, y.manifold);
  if (x.coords == y.coords) return 0.0;
  const ManifoldId& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return (y.coords - x.coords).norm();
    case ManifoldKind::Torus: {
      double s = 0;
      for (int i = 0; i < m.dim; ++i) {
        const double d = wrap_angle_signed(y.coords[i] - x.coords[i]);
        s += d * d;
      }
      return std::sqrt(s);
    }
    case ManifoldKind::Sphere: {
      const double c = std::clamp(x.coords.dot(y.coords), -1.0, 1.0);
      const double s = (y.coords - c * x.coords).norm();
      return std::atan2(s, c);
    }
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d r = so3_unflatten(x.coords).transpose() * so3_unflatten(y.coords);
      const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
      const double sin_theta = 0.5 * so3_vee(r - r.transpose()).norm();
      return std::atan2(sin_theta, cos_theta);
    }
    case ManifoldKind::Hyperbolic: {
      const Eigen::VectorXd diff = x.coords - y.coords;
      const double delta = std::max(0.0, 0.5 * minkowski_inner(diff, diff));
      return std::asinh(std::sqrt(delta * (delta + 2.0)));
    }
  }
  throw GeometryError("unreachable");
}

TangentVector parallel_transport(const ManifoldPoint& x, const ManifoldPoint& y,
                                 const TangentVector& v) {
  require_same_manifold(x.manifold, y.manifold);
  require_same_manifold(x.manifold, v.base.manifold);
  const ManifoldId& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus:
      // flat: zero Christoffel symbols, components carry over
      return {y, v.vec};
    case ManifoldKind::Sphere: {
      const double c = std::clamp(x.coords.dot(y.coords), -1.0, 1.0);
      if (c <= -1.0 + 1e-9) throw CutLocusError("sphere transport through antipode");
      const double f = y.coords.dot(v.vec) / (1.0 + c);
      return {y, v.vec - f * (x.coords + y.coords)};
    }
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d q1 = so3_unflatten(x.coords);
      const Eigen::Matrix3d q2 = so3_unflatten(y.coords);
      const Eigen::Vector3d w = so3_log(q1.transpose() * q2);
      const Eigen::Matrix3d a = q1.transpose() * so3_unflatten(v.vec);
      const Eigen::Vector3d b = so3_vee(0.5 * (a - a.transpose()));
      // transport along the geodesic is conjugation by the half-rotation,
      // i.e. a rotation of the axis coordinates by exp(-w/2)
      const Eigen::Vector3d b_t = so3_exp(-0.5 * w) * b;
      return {y, so3_flatten(q2 * so3_hat(b_t))};
    }
    case ManifoldKind::Hyperbolic: {
      const double c = -minkowski_inner(x.coords, y.coords);  // cosh(d) >= 1
      const double f = minkowski_inner(y.coords, v.vec) / (1.0 + c);
      return {y, v.vec + f * (x.coords + y.coords)};
    }
  }
  throw GeometryError("unreachable");
}

// --- projection / frames / sampling ------------------------------------------------

TangentVector project_to_tangent(const ManifoldPoint& x, const Eigen::VectorXd& w) {
  require_ambient(x.manifold, w);
  const ManifoldId& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus:
      return {x, w};
    case ManifoldKind::Sphere:
      return {x, w - x.coords.dot(w) * x.coords};
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d q = so3_unflatten(x.coords);
      const Eigen::Matrix3d a = q.transpose() * so3_unflatten(w);
      return {x, so3_flatten(q * (0.5 * (a - a.transpose())))};
    }
    case ManifoldKind::Hyperbolic:
      return {x, w + minkowski_inner(w, x.coords) * x.coords};
  }
  throw GeometryError("unreachable");
}

ManifoldPoint sample_uniform(const ManifoldId& m, Rng& rng) {
  switch (m.kind) {
    case ManifoldKind::Sphere: {
      Eigen::VectorXd g(m.ambient_dim());
      do {
        for (int i = 0; i < g.size(); ++i) g[i] = rng.normal();
      } while (g.norm() < 1e-12);
      g.normalize();
      return {m, std::move(g)};
    }
    case ManifoldKind::Torus: {
      Eigen::VectorXd a(m.dim);
      for (int i = 0; i < m.dim; ++i) a[i] = rng.uniform(0.0, 2.0 * kPi);
      return {m, std::move(a)};
    }
    case ManifoldKind::SpecialOrthogonal: {
      // Gram-Schmidt of a Gaussian matrix (positive diagonal R) is Haar on
      // O(3); a fixed column flip maps the det = -1 half onto SO(3).
      Eigen::Matrix3d g;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) g(r, c) = rng.normal();
      Eigen::Matrix3d q;
      for (int c = 0; c < 3; ++c) {
        Eigen::Vector3d col = g.col(c);
        for (int k = 0; k < c; ++k) col -= q.col(k).dot(g.col(c)) * q.col(k);
        const double n = col.norm();
        if (n < 1e-12) return sample_uniform(m, rng);  // degenerate draw, retry
        q.col(c) = col / n;
      }
      if (q.determinant() < 0) q.col(2) = -q.col(2);
      return {m, so3_flatten(q)};
    }
    default:
      throw NonCompactError("uniform sampling requires a compact manifold");
  }
}

Frame frame_at(const ManifoldPoint& x, FrameScheme scheme) {
  const ManifoldId& m = x.manifold;
  const int p = m.ambient_dim();
  switch (scheme) {
    case FrameScheme::Projected: {
      Eigen::MatrixXd f(p, p);
      for (int i = 0; i < p; ++i) {
        f.col(i) = project_to_tangent(x, Eigen::VectorXd::Unit(p, i)).vec;
      }
      return {x, std::move(f)};
    }
    case FrameScheme::LieFrame: {
      if (m.kind == ManifoldKind::Torus) return {x, Eigen::MatrixXd::Identity(p, p)};
      if (m.kind == ManifoldKind::SpecialOrthogonal) {
        const Eigen::Matrix3d q = so3_unflatten(x.coords);
        Eigen::MatrixXd f(9, 3);
        for (int i = 0; i < 3; ++i) {
          f.col(i) = so3_flatten(q * so3_hat(Eigen::Vector3d::Unit(i)));
        }
        return {x, std::move(f)};
      }
      throw UnsupportedSchemeError("LieFrame only available on SO(3) and the torus");
    }
    case FrameScheme::Coordinates: {
      if (m.kind == ManifoldKind::Torus || m.kind == ManifoldKind::Euclidean) {
        return {x, Eigen::MatrixXd::Identity(p, p)};
      }
      if (m.kind == ManifoldKind::Hyperbolic) {
        // graph chart x0 = sqrt(1 + x1^2 + x2^2)
        Eigen::MatrixXd f(3, 2);
        f.col(0) << x.coords[1] / x.coords[0], 1.0, 0.0;
        f.col(1) << x.coords[2] / x.coords[0], 0.0, 1.0;
        return {x, std::move(f)};
      }
      throw UnsupportedSchemeError("Coordinates frame requires a global chart");
    }
  }
  throw UnsupportedSchemeError("unknown scheme");
}

TangentVector langevin_drift(const ManifoldPoint& x, const ManifoldPoint& mu, double gamma) {
  if (gamma <= 0) throw GeometryError("langevin_drift: gamma must be positive");
  TangentVector l = log_map(x, mu);
  l.vec /= 2.0 * gamma * gamma;
  return l;
}

Eigen::MatrixXd tangent_basis(const ManifoldPoint& x) {
  const ManifoldId& m = x.manifold;
  const int p = m.ambient_dim();
  const int d = m.dim;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus:
      return Eigen::MatrixXd::Identity(p, d);
    case ManifoldKind::SpecialOrthogonal:
      return frame_at(x, FrameScheme::LieFrame).vectors;  // orthonormal in the (1/2)tr metric
    default: {
      // Gram-Schmidt over projected ambient axes, fixed pivot order
      Eigen::MatrixXd basis(p, d);
      int got = 0;
      for (int i = 0; i < p && got < d; ++i) {
        Eigen::VectorXd cand = project_to_tangent(x, Eigen::VectorXd::Unit(p, i)).vec;
        for (int k = 0; k < got; ++k) {
          cand -= metric_inner(m, basis.col(k), cand) * basis.col(k);
        }
        const double n2 = metric_inner(m, cand, cand);
        if (n2 > 1e-16) {
          basis.col(got++) = cand / std::sqrt(n2);
        }
      }
      if (got != d) throw GeometryError("tangent basis construction failed");
      return basis;
    }
  }
}

TangentVector gaussian_tangent(const ManifoldPoint& x, Rng& rng) {
  const Eigen::MatrixXd basis = tangent_basis(x);
  Eigen::VectorXd z(basis.cols());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return {x, basis * z};
}

ManifoldPoint retract(const ManifoldId& m, const Eigen::VectorXd& ambient) {
  require_ambient(m, ambient);
  switch (m.kind) {
    case ManifoldKind::Euclidean:
      return {m, ambient};
    case ManifoldKind::Torus: {
      Eigen::VectorXd a = ambient;
      for (int i = 0; i < a.size(); ++i) a[i] = wrap_angle_2pi(a[i]);
      return {m, std::move(a)};
    }
    case ManifoldKind::Sphere: {
      Eigen::VectorXd y = ambient;
      const double n = y.norm();
      if (n < 1e-300) throw GeometryError("cannot retract the origin onto the sphere");
      return {m, y / n};
    }
    case ManifoldKind::SpecialOrthogonal: {
      // closest rotation by polar decomposition
      const Eigen::Matrix3d a = so3_unflatten(ambient);
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::Matrix3d q = svd.matrixU() * svd.matrixV().transpose();
      if (q.determinant() < 0) {
        Eigen::Matrix3d u = svd.matrixU();
        u.col(2) = -u.col(2);
        q = u * svd.matrixV().transpose();
      }
      return {m, so3_flatten(q)};
    }
    case ManifoldKind::Hyperbolic: {
      Eigen::VectorXd y = ambient;
      if (y[0] <= 0) throw GeometryError("cannot retract onto the upper hyperboloid sheet");
      const double q = -minkowski_inner(y, y);
      if (q <= 0) throw GeometryError("ambient point outside the hyperboloid cone");
      return {m, y / std::sqrt(q)};
    }
  }
  throw GeometryError("unreachable");
}

}  // namespace rsgm
