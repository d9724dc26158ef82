#include "rsgm/training.hpp"

#include <cmath>

namespace rsgm {

namespace {
constexpr double kPi = 3.141592653589793238462643;

TangentVector euclidean_ou_score(const DsmItem& item) {
  // X_t | X_0 ~ N(e^{-u/2} x0, (1 - e^{-u}) Id)
  const double u = item.u_delta;
  const double mean_factor = std::exp(-0.5 * u);
  const double var = 1.0 - std::exp(-u);
  return {item.x_t, -(item.x_t.coords - mean_factor * item.x_ref.coords) / var};
}

TangentVector torus_exact_score(const DsmItem& item) {
  const int d = item.x_t.manifold.dim;
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) {
    v[i] = torus1_score(item.x_t.coords[i] - item.x_ref.coords[i], item.u_delta);
  }
  return {item.x_t, std::move(v)};
}

}  // namespace

double loss_weight(double t, const LossSpec& loss, const NoiseSchedule& sched) {
  switch (loss.weighting) {
    case LossWeighting::BetaT: return sched.beta(t);
    case LossWeighting::VarProxy: return 1.0 - std::exp(-sched.u(t));
  }
  return 1.0;
}

TangentVector dsm_target(const DsmItem& item, const LossSpec& loss,
                         const NoisingProcess& process) {
  switch (loss.kind) {
    case LossKind::DsmExact:
      if (item.x_t.manifold.kind == ManifoldKind::Euclidean) return euclidean_ou_score(item);
      if (item.x_t.manifold.kind == ManifoldKind::Torus) return torus_exact_score(item);
      throw UnsupportedManifoldError("DsmExact: no closed-form transition score here");
    case LossKind::DsmTruncated: {
      // the Varadhan switch of the hybrid target is taken in schedule time,
      // the spectral series in the rescaled time u
      if (loss.hk.method == HeatKernelConfig::Method::Hybrid && item.t <= loss.hk.tau) {
        return hk_score_varadhan(item.x_ref, item.x_t, item.u_delta);
      }
      if (loss.hk.method == HeatKernelConfig::Method::Varadhan) {
        return hk_score_varadhan(item.x_ref, item.x_t, item.u_delta);
      }
      return hk_score_truncated(item.x_ref, item.x_t, item.u_delta, loss.hk);
    }
    case LossKind::DsmVaradhan:
    case LossKind::DsmVaradhanSegmented:
      return hk_score_varadhan(item.x_ref, item.x_t, item.u_delta);
    default:
      throw std::invalid_argument("dsm_target: not a DSM loss");
  }
}

double dsm_loss(const std::vector<DsmItem>& batch, const Eigen::VectorXd& params,
                const NetworkSpec& spec, const LossSpec& loss, const NoisingProcess& process,
                Eigen::VectorXd* grad, long long* dropped) {
  if (batch.empty()) throw std::invalid_argument("dsm_loss: empty batch");
  ad::Tape tape(&params);
  int acc = -1;
  int kept = 0;
  for (const auto& item : batch) {
    TangentVector target{item.x_t, Eigen::VectorXd()};
    try {
      target = dsm_target(item, loss, process);
    } catch (const CutLocusError&) {
      if (dropped) ++(*dropped);
      continue;
    }
    const double lambda = loss_weight(item.t, loss, process.schedule);
    ScoreGraph g = build_score_graph(tape, spec, item.t, item.x_t);
    const int diff = tape.sub(g.score, tape.constant(target.vec));
    const int term =
        tape.scale(build_metric_sqnorm_node(tape, spec.manifold, diff), 0.5 * lambda);
    acc = (acc < 0) ? term : tape.add(acc, term);
    ++kept;
  }
  if (kept == 0) return 0.0;
  const int mean = tape.scale(acc, 1.0 / kept);
  if (grad) {
    if (grad->size() != params.size()) grad->setZero(params.size());
    tape.backward(mean, *grad);
  }
  return tape.scalar(mean);
}

double ism_loss(const std::vector<std::pair<ManifoldPoint, double>>& batch,
                const Eigen::VectorXd& params, const NetworkSpec& spec, const LossSpec& loss,
                const NoisingProcess& process, Eigen::VectorXd* grad, Rng* rng) {
  if (batch.empty()) throw std::invalid_argument("ism_loss: empty batch");
  if (loss.kind == LossKind::IsmHutchinson && (!rng || loss.hutchinson_probes < 1)) {
    throw std::invalid_argument("IsmHutchinson requires an rng and probes >= 1");
  }
  ad::Tape tape(&params);
  int acc = -1;
  for (const auto& [x, t] : batch) {
    const double lambda = loss_weight(t, loss, process.schedule);
    ScoreGraph g = build_score_graph(tape, spec, t, x);
    const int half_sq = tape.scale(build_metric_sqnorm_node(tape, spec.manifold, g.score), 0.5);
    int div;
    if (loss.kind == LossKind::IsmExact) {
      div = build_divergence_node(tape, g, spec, x);
    } else {
      const Eigen::MatrixXd basis = tangent_basis(x);
      int probe_acc = -1;
      for (int k = 0; k < loss.hutchinson_probes; ++k) {
        Eigen::VectorXd eps = Eigen::VectorXd::Zero(x.coords.size());
        for (int i = 0; i < basis.cols(); ++i) eps += rng->rademacher() * basis.col(i);
        const int jv = build_jvp_node(tape, g, spec, x, eps);
        const int term = tape.dot(jv, tape.constant(metric_dual(x.manifold, eps)));
        probe_acc = (probe_acc < 0) ? term : tape.add(probe_acc, term);
      }
      div = tape.scale(probe_acc, 1.0 / loss.hutchinson_probes);
    }
    const int term = tape.scale(tape.add(half_sq, div), lambda);
    acc = (acc < 0) ? term : tape.add(acc, term);
  }
  const int mean = tape.scale(acc, 1.0 / static_cast<double>(batch.size()));
  if (grad) {
    if (grad->size() != params.size()) grad->setZero(params.size());
    tape.backward(mean, *grad);
  }
  return tape.scalar(mean);
}

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               double lr, double beta1, double beta2) {
  if (state.m.size() != params.size()) {
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
    state.step = 0;
  }
  ++state.step;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  params -= (lr / bc1) * state.m.cwiseQuotient(((state.v / bc2).cwiseSqrt().array() + 1e-8).matrix());
}

double lr_schedule(const TrainConfig& cfg, int iteration) {
  const int warmup = std::max(1, cfg.warmup);
  if (iteration < warmup) return cfg.learning_rate * (iteration + 1) / warmup;
  if (cfg.iters <= warmup) return cfg.learning_rate;
  const double frac = static_cast<double>(iteration - warmup) /
                      static_cast<double>(cfg.iters - warmup);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(kPi * frac));
}

TrainResult train(const std::vector<ManifoldPoint>& dataset, const NoisingProcess& process,
                  const LossSpec& loss, const NetworkSpec& spec, const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  process.schedule.validate();

  Rng init_rng(cfg.seed, 999);
  Rng rng(cfg.seed, 1);

  TrainResult result;
  result.params = init_params(spec, init_rng);
  result.loss_trace.reserve(cfg.iters);
  AdamState adam;

  const NoiseSchedule& sched = process.schedule;
  const bool is_dsm = loss.kind != LossKind::IsmExact && loss.kind != LossKind::IsmHutchinson;
  const double delta = loss.segment_delta > 0 ? loss.segment_delta : loss.hk.tau;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(result.params.size());
  for (int it = 0; it < cfg.iters; ++it) {
    std::vector<DsmItem> dsm_batch;
    std::vector<std::pair<ManifoldPoint, double>> ism_batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& x0 = dataset[rng.uniform_index(dataset.size())];
      const double t = rng.uniform(sched.eps, sched.horizon);
      if (loss.kind == LossKind::DsmVaradhanSegmented) {
        const double s = std::max(sched.eps, t - delta);
        ManifoldPoint xs = forward_sample(x0, s, cfg.forward_n, process, rng, &result.grw);
        // continue the noising bridge from time s to t
        auto path = grw_path(
            xs, [&](double tau, const ManifoldPoint& y) { return process.drift(s + tau, y); },
            [&](double tau) { return sched.g(s + tau); }, t - s, cfg.forward_n, rng,
            &result.grw);
        dsm_batch.push_back({xs, path.back(), t, sched.u(t) - sched.u(s)});
      } else {
        ManifoldPoint xt = forward_sample(x0, t, cfg.forward_n, process, rng, &result.grw);
        if (is_dsm) {
          dsm_batch.push_back({x0, std::move(xt), t, sched.u(t)});
        } else {
          ism_batch.push_back({std::move(xt), t});
        }
      }
    }

    grad.setZero();
    const double value =
        is_dsm ? dsm_loss(dsm_batch, result.params, spec, loss, process, &grad,
                          &result.cutlocus_dropped)
               : ism_loss(ism_batch, result.params, spec, loss, process, &grad, &rng);
    if (!std::isfinite(value)) {
      throw TrainingAbort(it, "non-finite loss at iteration " + std::to_string(it));
    }
    adam_step(adam, result.params, grad, lr_schedule(cfg, it), cfg.beta1, cfg.beta2);
    result.loss_trace.push_back(value);
  }
  return result;
}

}  // namespace rsgm
