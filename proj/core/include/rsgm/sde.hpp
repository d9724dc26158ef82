#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rsgm/manifold.hpp"
#include "rsgm/rng.hpp"
#include "rsgm/score_model.hpp"

namespace rsgm {

// beta(t) = beta_min + (beta_max - beta_min) t, diffusion g(t) = sqrt(beta(t)).
// The Brownian forward marginal at schedule time t is the unit-speed heat
// kernel at the rescaled time u(t) = int_0^t beta(s) ds.
struct NoiseSchedule {
  double horizon = 1.0;   // T
  double eps = 1e-3;      // lower time cutoff
  double beta_min = 0.001;
  double beta_max = 5.0;

  double beta(double t) const { return beta_min + (beta_max - beta_min) * t / horizon; }
  double g(double t) const { return std::sqrt(beta(t)); }
  double u(double t) const {
    return beta_min * t + 0.5 * (beta_max - beta_min) * t * t / horizon;
  }
  void validate() const;
};

enum class NoisingKind { BrownianCompact, LangevinWrapped, EuclideanOU };

// Forward noising process dX = g(t)^2 b0(X) dt + g(t) dB with b0 the
// unit-schedule drift: zero on compact manifolds (target uniform),
// log_x(mu)/(2 gamma^2) for the wrapped Langevin, -x/2 for the Euclidean OU.
struct NoisingProcess {
  NoisingKind kind = NoisingKind::BrownianCompact;
  ManifoldId manifold;
  NoiseSchedule schedule;
  std::optional<ManifoldPoint> mu;  // Langevin mean
  double gamma = 1.0;               // Langevin scale

  static NoisingProcess brownian(const ManifoldId& m, const NoiseSchedule& s);
  static NoisingProcess langevin(const ManifoldPoint& mean, double gamma, const NoiseSchedule& s);
  static NoisingProcess ou(int dim, const NoiseSchedule& s);

  TangentVector drift(double t, const ManifoldPoint& x) const;
  ManifoldPoint sample_reference(Rng& rng) const;
  // log density of the reference distribution w.r.t. the Hausdorff measure
  double log_reference_density(const ManifoldPoint& x) const;
};

struct GrwStats {
  long long steps = 0;
  long long step_too_large = 0;
};

// One Euler-Maruyama step in the tangent space pushed through exp:
// exp_x(gamma * drift + sqrt(gamma) * g * Z). Steps beyond 0.9 x injectivity
// radius are counted in stats but still taken.
ManifoldPoint grw_step(const ManifoldPoint& x, const TangentVector& drift_val, double g_val,
                       double gamma, Rng& rng, GrwStats* stats = nullptr);

using DriftFn = std::function<TangentVector(double, const ManifoldPoint&)>;
using DiffusionFn = std::function<double(double)>;

// N steps of step size T_sim / N; returns the N+1 visited points.
std::vector<ManifoldPoint> grw_path(const ManifoldPoint& x0, const DriftFn& drift,
                                    const DiffusionFn& diffusion, double t_sim, int n_steps,
                                    Rng& rng, GrwStats* stats = nullptr);

// forward noising endpoint at schedule time t
ManifoldPoint forward_sample(const ManifoldPoint& x0, double t, int n_steps,
                             const NoisingProcess& process, Rng& rng,
                             GrwStats* stats = nullptr);

// drift of the reverse-time generative SDE at reverse time s in [0, T - eps]:
// -b(T - s, y) + g(T - s)^2 score(T - s, y)
TangentVector reverse_drift(double s, const ManifoldPoint& y, const TimeVectorField& score,
                            const NoisingProcess& process);

struct ReverseSamplerConfig {
  int n_steps = 100;
  bool corrector = false;
  int corrector_steps = 1;    // S
  double snr = 0.15;          // r in the step size rule
  double corrector_cap = 0.1; // upper bound on gamma_s
};

// reverse diffusion from the reference distribution; optionally records the path
ManifoldPoint sample_reverse(const TimeVectorField& score, const NoisingProcess& process,
                             const ReverseSamplerConfig& cfg, Rng& rng,
                             std::vector<ManifoldPoint>* path = nullptr,
                             GrwStats* stats = nullptr);

// S Langevin corrector steps at forward time t: drift (1/2) g^2 score,
// diffusion g, with g = g(t) supplied by the caller. gamma_s <= 0 selects the
// snr-based step size min(cap, snr (2/g)^2 (|Z|/|score|)^2) with a fresh
// probe Z per sweep.
ManifoldPoint corrector_sweep(const ManifoldPoint& y, double t, const TimeVectorField& score,
                              int sweeps, double g_val, double gamma_s, Rng& rng,
                              const ReverseSamplerConfig& cfg = {},
                              GrwStats* stats = nullptr);

// --- sample dump -----------------------------------------------------------------

void write_sample_dump(const std::string& path, const ManifoldId& m, uint64_t seed,
                       const std::vector<ManifoldPoint>& points);
struct SampleDump {
  ManifoldId manifold;
  uint64_t seed = 0;
  std::vector<ManifoldPoint> points;
};
// parses and validates every point against the manifold invariants
SampleDump read_sample_dump(const std::string& path);

}  // namespace rsgm
