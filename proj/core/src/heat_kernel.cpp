#include "rsgm/heat_kernel.hpp"

#include <cmath>

namespace rsgm {

namespace {

constexpr double kPi = 3.141592653589793238462643;
constexpr double kTwoPi = 6.283185307179586476925287;
constexpr double kDensityFloor = 1e-300;

// multiplicity of the degree-n eigenspace on S^d
double sphere_multiplicity(int n, int d) {
  if (n == 0) return 1.0;
  // (2n + d - 1) (n + d - 2)! / ((d - 1)! n!)
  return std::exp(std::log(2.0 * n + d - 1.0) + std::lgamma(n + d - 1.0) -
                  std::lgamma(static_cast<double>(d)) - std::lgamma(n + 1.0));
}

// Legendre polynomial of degree n in ambient dimension d+1 (normalized to 1
// at u = 1), via the closed-form sum in log-Gamma arithmetic, plus its
// u-derivative when requested.
double sphere_legendre(int n, double u, int d, bool derivative) {
  const double lam = 0.5 * d;  // (q - 1)/2 with q = d + 1
  const double log_front = std::lgamma(n + 1.0) + std::lgamma(lam);
  const double one_m_u2 = 1.0 - u * u;
  double acc = 0.0;
  for (int k = 0; 2 * k <= n; ++k) {
    const double log_coef = log_front - k * std::log(4.0) - std::lgamma(k + 1.0) -
                            std::lgamma(n - 2 * k + 1.0) - std::lgamma(k + lam);
    const double coef = ((k % 2) ? -1.0 : 1.0) * std::exp(log_coef);
    const int m = n - 2 * k;
    if (!derivative) {
      acc += coef * std::pow(one_m_u2, k) * std::pow(u, m);
    } else {
      double term = 0.0;
      if (k > 0) term += k * std::pow(one_m_u2, k - 1) * (-2.0 * u) * std::pow(u, m);
      if (m > 0) term += std::pow(one_m_u2, k) * m * std::pow(u, m - 1);
      acc += coef * term;
    }
  }
  return acc;
}

void require_heat_kernel_manifold(const ManifoldId& m) {
  if (m.kind != ManifoldKind::Sphere && m.kind != ManifoldKind::Torus) {
    throw UnsupportedManifoldError(
        "spectral heat kernel only available on the sphere and torus");
  }
}

int fourier_order_for(double t, int configured) {
  // enough modes that the dropped tail is below 1e-18
  const int needed = static_cast<int>(std::ceil(std::sqrt(83.0 / std::max(t, 1e-12)))) + 1;
  return std::max(configured, needed);
}

}  // namespace

double gegenbauer_pair_sum(int n, double inner, int d) {
  if (d < 2) throw DimensionError("gegenbauer_pair_sum requires sphere dimension >= 2");
  if (n < 0) throw GeometryError("gegenbauer_pair_sum: negative degree");
  if (std::abs(inner) > 1.0 + 1e-12) throw GeometryError("gegenbauer_pair_sum: |inner| > 1");
  const double u = std::clamp(inner, -1.0, 1.0);
  return sphere_multiplicity(n, d) * sphere_legendre(n, u, d, false);
}

double gegenbauer_pair_sum_deriv(int n, double inner, int d) {
  if (d < 2) throw DimensionError("gegenbauer_pair_sum requires sphere dimension >= 2");
  const double u = std::clamp(inner, -1.0, 1.0);
  return sphere_multiplicity(n, d) * sphere_legendre(n, u, d, true);
}

EigenSpectrum EigenSpectrum::sphere(int d, int max_order) {
  EigenSpectrum s;
  s.manifold = ManifoldId::sphere(d);
  s.max_order = max_order;
  for (int k = 0; k <= max_order; ++k) {
    s.eigenvalues.push_back(static_cast<double>(k) * (k + d - 1.0));
    s.multiplicities.push_back(sphere_multiplicity(k, d));
  }
  return s;
}

EigenSpectrum EigenSpectrum::torus_factor(int max_order) {
  EigenSpectrum s;
  s.manifold = ManifoldId::torus(1);
  s.max_order = max_order;
  for (int k = 0; k <= max_order; ++k) {
    s.eigenvalues.push_back(static_cast<double>(k) * k);
    s.multiplicities.push_back(k == 0 ? 1.0 : 2.0);
  }
  return s;
}

double EigenSpectrum::pair_sum(int j, double arg) const {
  if (manifold.kind == ManifoldKind::Sphere) {
    return gegenbauer_pair_sum(j, arg, manifold.dim);
  }
  return j == 0 ? 1.0 : 2.0 * std::cos(j * arg);
}

HeatKernelConfig HeatKernelConfig::defaults(const ManifoldId& m, double horizon) {
  HeatKernelConfig cfg;
  cfg.order = (m.kind == ManifoldKind::Torus) ? 20 : 30;
  cfg.tau = 0.25 * horizon;
  return cfg;
}

// --- circle primitives ----------------------------------------------------------

double torus1_log_density_fourier(double delta, double t, int order) {
  double s = 1.0;
  for (int k = 1; k <= order; ++k) {
    s += 2.0 * std::exp(-0.5 * k * k * t) * std::cos(k * delta);
  }
  return std::log(std::max(s, kDensityFloor));
}

double torus1_log_density_image(double delta, double t, int windings) {
  // sqrt(2 pi / t) sum_j exp(-(delta + 2 pi j)^2 / (2t)), evaluated stably
  // relative to the dominant image
  const double d0 = wrap_angle_signed(delta);
  double lead = -0.5 * d0 * d0 / t;
  double s = 0.0;
  for (int j = -windings; j <= windings; ++j) {
    const double g = d0 + kTwoPi * j;
    s += std::exp(-0.5 * g * g / t - lead);
  }
  return 0.5 * std::log(kTwoPi / t) + lead + std::log(s);
}

double torus1_score(double delta, double t) {
  const double d0 = wrap_angle_signed(delta);
  if (t < 1.0) {
    const double lead = -0.5 * d0 * d0 / t;
    double num = 0.0, den = 0.0;
    for (int j = -10; j <= 10; ++j) {
      const double g = d0 + kTwoPi * j;
      const double w = std::exp(-0.5 * g * g / t - lead);
      den += w;
      num += -(g / t) * w;
    }
    return num / den;
  }
  const int order = fourier_order_for(t, 0);
  double num = 0.0, den = 1.0;
  for (int k = 1; k <= order; ++k) {
    const double w = std::exp(-0.5 * k * k * t);
    den += 2.0 * w * std::cos(k * d0);
    num += -2.0 * k * w * std::sin(k * d0);
  }
  return num / std::max(den, kDensityFloor);
}

// --- compact-manifold heat kernel --------------------------------------------------

double hk_log_density(const ManifoldPoint& x0, const ManifoldPoint& x, double t,
                      const HeatKernelConfig& cfg, bool* negative_clamped) {
  if (x0.manifold != x.manifold) throw DimensionError("heat kernel: manifold mismatch");
  require_heat_kernel_manifold(x.manifold);
  if (t <= 0) throw GeometryError("heat kernel: t must be positive");
  if (negative_clamped) *negative_clamped = false;

  if (x.manifold.kind == ManifoldKind::Sphere) {
    const int d = x.manifold.dim;
    const double u = std::clamp(x0.coords.dot(x.coords), -1.0, 1.0);
    double s = 0.0;
    for (int k = 0; k <= cfg.order; ++k) {
      s += std::exp(-0.5 * k * (k + d - 1.0) * t) * gegenbauer_pair_sum(k, u, d);
    }
    if (s <= 0.0) {
      if (negative_clamped) *negative_clamped = true;
      s = kDensityFloor;
    }
    return std::log(s);
  }

  // torus: product of circle factors; image form below t = 1 (fast
  // convergence), truncated Fourier form above
  double acc = 0.0;
  for (int i = 0; i < x.manifold.dim; ++i) {
    const double delta = x.coords[i] - x0.coords[i];
    acc += (t < 1.0) ? torus1_log_density_image(delta, t)
                     : torus1_log_density_fourier(delta, t, cfg.order);
  }
  return acc;
}

TangentVector hk_score_truncated(const ManifoldPoint& x0, const ManifoldPoint& x, double t,
                                 const HeatKernelConfig& cfg) {
  if (x0.manifold != x.manifold) throw DimensionError("heat kernel: manifold mismatch");
  require_heat_kernel_manifold(x.manifold);
  if (t <= 0) throw GeometryError("heat kernel: t must be positive");

  if (x.manifold.kind == ManifoldKind::Sphere) {
    const int d = x.manifold.dim;
    const double u = std::clamp(x0.coords.dot(x.coords), -1.0, 1.0);
    double s = 0.0, ds = 0.0;
    for (int k = 0; k <= cfg.order; ++k) {
      const double w = std::exp(-0.5 * k * (k + d - 1.0) * t);
      s += w * gegenbauer_pair_sum(k, u, d);
      ds += w * gegenbauer_pair_sum_deriv(k, u, d);
    }
    if (s <= kDensityFloor) return {x, Eigen::VectorXd::Zero(x.coords.size())};
    // chain rule through u = <x0, x>, then tangent projection
    const double ratio = ds / s;
    return {x, ratio * (x0.coords - u * x.coords)};
  }

  Eigen::VectorXd v(x.manifold.dim);
  for (int i = 0; i < x.manifold.dim; ++i) {
    v[i] = torus1_score(x.coords[i] - x0.coords[i], t);
  }
  return {x, std::move(v)};
}

TangentVector hk_score_varadhan(const ManifoldPoint& x0, const ManifoldPoint& x, double t) {
  if (t <= 0) throw GeometryError("heat kernel: t must be positive");
  TangentVector l = log_map(x, x0);
  l.vec /= t;
  return l;
}

TangentVector hk_score(const ManifoldPoint& x0, const ManifoldPoint& x, double t,
                       const HeatKernelConfig& cfg) {
  switch (cfg.method) {
    case HeatKernelConfig::Method::Truncated: return hk_score_truncated(x0, x, t, cfg);
    case HeatKernelConfig::Method::Varadhan: return hk_score_varadhan(x0, x, t);
    case HeatKernelConfig::Method::Hybrid:
      return (t <= cfg.tau) ? hk_score_varadhan(x0, x, t) : hk_score_truncated(x0, x, t, cfg);
  }
  throw GeometryError("unreachable");
}

// --- wrapped Gaussians ----------------------------------------------------------------

ManifoldPoint wrapped_gaussian_sample(const ManifoldPoint& mu, double sigma, Rng& rng) {
  if (sigma <= 0) throw GeometryError("wrapped_gaussian_sample: sigma must be positive");
  TangentVector z = gaussian_tangent(mu, rng);
  z.vec *= sigma;
  return exp_map(mu, z);
}

double wrapped_gaussian_logpdf_torus(const ManifoldPoint& mu, double sigma,
                                     const ManifoldPoint& x, int windings) {
  if (mu.manifold.kind != ManifoldKind::Torus || mu.manifold != x.manifold) {
    throw UnsupportedManifoldError("wrapped_gaussian_logpdf_torus requires torus points");
  }
  const double var = sigma * sigma;
  double acc = 0.0;
  for (int i = 0; i < mu.manifold.dim; ++i) {
    const double d0 = wrap_angle_signed(x.coords[i] - mu.coords[i]);
    const double lead = -0.5 * d0 * d0 / var;
    double s = 0.0;
    for (int j = -windings; j <= windings; ++j) {
      const double g = d0 + kTwoPi * j;
      s += std::exp(-0.5 * g * g / var - lead);
    }
    acc += lead + std::log(s) - 0.5 * std::log(kTwoPi * var);
  }
  return acc;
}

double wrapped_gaussian_logpdf_h2(const ManifoldPoint& mu, double sigma,
                                  const ManifoldPoint& x) {
  if (mu.manifold.kind != ManifoldKind::Hyperbolic) {
    throw UnsupportedManifoldError("wrapped_gaussian_logpdf_h2 requires H^2 points");
  }
  const double r = dist(mu, x);
  const double var = sigma * sigma;
  // |det D exp_mu| = sinh(r)/r on H^2
  double log_det;
  if (r < 1e-6) {
    log_det = std::log1p(r * r / 6.0);
  } else {
    log_det = std::log(std::sinh(r) / r);
  }
  return -0.5 * r * r / var - std::log(kTwoPi * var) - log_det;
}

}  // namespace rsgm
