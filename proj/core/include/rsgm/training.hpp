#pragma once

#include <vector>

#include "rsgm/heat_kernel.hpp"
#include "rsgm/manifold.hpp"
#include "rsgm/rng.hpp"
#include "rsgm/score_model.hpp"
#include "rsgm/sde.hpp"

namespace rsgm {

enum class LossKind {
  DsmExact,             // closed-form transition score (torus / Euclidean)
  DsmTruncated,         // spectral target, optionally hybridized with Varadhan
  DsmVaradhan,          // log_x(x0) / u(t)
  DsmVaradhanSegmented, // short-horizon target from an intermediate time s
  IsmExact,
  IsmHutchinson,
};

enum class LossWeighting { BetaT, VarProxy };

struct LossSpec {
  LossKind kind = LossKind::DsmVaradhan;
  LossWeighting weighting = LossWeighting::VarProxy;
  int hutchinson_probes = 1;
  HeatKernelConfig hk;          // truncation order and Varadhan switch
  double segment_delta = -1.0;  // <= 0: use hk.tau
};

// lambda_t: g(t)^2 for BetaT, the Euclidean OU conditional variance
// 1 - exp(-u(t)) as the compact-manifold proxy for VarProxy
double loss_weight(double t, const LossSpec& loss, const NoiseSchedule& sched);

// one DSM regression pair: x_ref is x_0 (or x_s for the segmented loss) and
// u_delta the rescaled time gap driving the target
struct DsmItem {
  ManifoldPoint x_ref;
  ManifoldPoint x_t;
  double t;
  double u_delta;
};

// regression target for the configured DSM loss; throws CutLocusError where
// the Varadhan target is undefined
TangentVector dsm_target(const DsmItem& item, const LossSpec& loss,
                         const NoisingProcess& process);

// mean_i lambda_{t_i} 1/2 || s(t_i, x_i) - target_i ||^2 over the batch;
// cut-locus items are dropped and counted
double dsm_loss(const std::vector<DsmItem>& batch, const Eigen::VectorXd& params,
                const NetworkSpec& spec, const LossSpec& loss, const NoisingProcess& process,
                Eigen::VectorXd* grad = nullptr, long long* dropped = nullptr);

// mean_i lambda_{t_i} ( 1/2 ||s||^2 + div s ) with exact or Hutchinson
// divergence; rng required for IsmHutchinson
double ism_loss(const std::vector<std::pair<ManifoldPoint, double>>& batch,
                const Eigen::VectorXd& params, const NetworkSpec& spec, const LossSpec& loss,
                const NoisingProcess& process, Eigen::VectorXd* grad = nullptr,
                Rng* rng = nullptr);

struct AdamState {
  Eigen::VectorXd m, v;
  long long step = 0;
};

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               double lr, double beta1 = 0.9, double beta2 = 0.999);

struct TrainConfig {
  int batch_size = 512;
  int iters = 1000;
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  uint64_t seed = 0;
  int forward_n = 10;   // GRW steps per forward sample
  int warmup = 1000;    // linear ramp length before the cosine decay
};

// learning rate at iteration i: linear 0 -> warmup, then cosine decay
double lr_schedule(const TrainConfig& cfg, int iteration);

struct TrainingAbort : std::runtime_error {
  int iteration;
  TrainingAbort(int it, const std::string& what) : std::runtime_error(what), iteration(it) {}
};

struct TrainResult {
  Eigen::VectorXd params;
  std::vector<double> loss_trace;
  long long cutlocus_dropped = 0;
  GrwStats grw;
};

// the full loop: minibatch -> per-item t ~ U[eps, T] -> GRW forward sample ->
// loss -> Adam. Single-threaded and bitwise reproducible for a fixed seed.
TrainResult train(const std::vector<ManifoldPoint>& dataset, const NoisingProcess& process,
                  const LossSpec& loss, const NetworkSpec& spec, const TrainConfig& cfg);

}  // namespace rsgm
