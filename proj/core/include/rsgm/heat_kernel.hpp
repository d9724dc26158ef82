#pragma once

#include <Eigen/Core>
#include <vector>

#include "rsgm/manifold.hpp"
#include "rsgm/rng.hpp"

namespace rsgm {

// Laplace-Beltrami eigenvalue table with pair-sum evaluators
// sum_{phi in Phi_j} phi(x0) phi(x), for the manifolds with known spectra.
// Eigenfunctions are orthonormal in L^2 of the uniform probability measure,
// and the Brownian generator is Delta/2, so the kernel weight of level j at
// time t is exp(-lambda_j t / 2).
struct EigenSpectrum {
  ManifoldId manifold;
  int max_order = 0;                 // J
  std::vector<double> eigenvalues;   // lambda_0 <= lambda_1 <= ...
  std::vector<double> multiplicities;

  static EigenSpectrum sphere(int d, int max_order);
  // one circle factor; the T^d kernel is the product over dimensions
  static EigenSpectrum torus_factor(int max_order);

  // pair sum of level j as a function of the geometry between x0 and x:
  // sphere: argument is <x0, x>; torus factor: argument is the angle gap.
  double pair_sum(int j, double arg) const;
};

struct HeatKernelConfig {
  int order = 30;      // truncation J
  double tau = 0.25;   // Varadhan switch time for the Hybrid method
  enum class Method { Truncated, Varadhan, Hybrid } method = Method::Hybrid;

  static HeatKernelConfig defaults(const ManifoldId& m, double horizon = 1.0);
};

// Pair sum over the degree-n spherical-harmonic eigenspace on S^d, as a
// function of inner = <x, y>. Equals the multiplicity at inner = 1.
double gegenbauer_pair_sum(int n, double inner, int d);
// derivative w.r.t. inner
double gegenbauer_pair_sum_deriv(int n, double inner, int d);

// --- circle (T^1) primitives -------------------------------------------------

// log density of the Brownian transition over the gap delta, w.r.t. the
// uniform probability measure. Image-sum and Fourier forms agree by Poisson
// summation; each is exposed for cross-validation.
double torus1_log_density_fourier(double delta, double t, int order);
double torus1_log_density_image(double delta, double t, int windings = 10);
// d/d(delta) of the log density; image form below t = 1, Fourier above.
double torus1_score(double delta, double t);

// --- heat kernel on compact manifolds ----------------------------------------

// log p_{t|0}(x | x0) w.r.t. the uniform probability measure (Sphere, Torus).
// A truncated series that comes out non-positive is clamped at 1e-300 before
// the log; `negative_clamped` reports that J was too small for this t.
double hk_log_density(const ManifoldPoint& x0, const ManifoldPoint& x, double t,
                      const HeatKernelConfig& cfg, bool* negative_clamped = nullptr);

// gradient in x of the truncated log density, projected to T_x M
TangentVector hk_score_truncated(const ManifoldPoint& x0, const ManifoldPoint& x, double t,
                                 const HeatKernelConfig& cfg);

// Varadhan small-time asymptotics: log_x(x0) / t
TangentVector hk_score_varadhan(const ManifoldPoint& x0, const ManifoldPoint& x, double t);

// dispatch on cfg.method; Hybrid takes the Varadhan branch for t <= tau.
// Not continuous at the switch.
TangentVector hk_score(const ManifoldPoint& x0, const ManifoldPoint& x, double t,
                       const HeatKernelConfig& cfg);

// --- wrapped Gaussians ---------------------------------------------------------

// pushforward of N(0, sigma^2 Id) on T_mu M through exp_mu
ManifoldPoint wrapped_gaussian_sample(const ManifoldPoint& mu, double sigma, Rng& rng);

// log density w.r.t. Lebesgue measure on [0, 2pi)^d (truncated image sum)
double wrapped_gaussian_logpdf_torus(const ManifoldPoint& mu, double sigma,
                                     const ManifoldPoint& x, int windings = 10);

// exact log density w.r.t. the Hausdorff measure on H^2 (exp is a global
// diffeomorphism there, so no image sum is needed)
double wrapped_gaussian_logpdf_h2(const ManifoldPoint& mu, double sigma,
                                  const ManifoldPoint& x);

}  // namespace rsgm
