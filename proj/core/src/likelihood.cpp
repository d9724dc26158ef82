#include "rsgm/likelihood.hpp"

#include <cmath>
#include <fstream>

namespace rsgm {

TangentVector ProbFlowField::value(double t, const ManifoldPoint& x) const {
  const double g2 = process->schedule.beta(t);
  TangentVector out = score->value(t, x);
  out.vec *= -0.5 * g2;
  if (process->kind != NoisingKind::BrownianCompact) {
    out.vec += process->drift(t, x).vec;
  }
  return out;
}

double ProbFlowField::divergence(double t, const ManifoldPoint& x) const {
  const double g2 = process->schedule.beta(t);
  double div = -0.5 * g2 * score->divergence(t, x);
  switch (process->kind) {
    case NoisingKind::BrownianCompact:
      break;
    case NoisingKind::EuclideanOU:
      div += -0.5 * g2 * x.manifold.dim;
      break;
    case NoisingKind::LangevinWrapped: {
      // central differences of the drift along the orthonormal basis
      const Eigen::MatrixXd basis = tangent_basis(x);
      const double h = 1e-6;
      for (int i = 0; i < basis.cols(); ++i) {
        const ManifoldPoint xp = retract(x.manifold, x.coords + h * basis.col(i));
        const ManifoldPoint xm = retract(x.manifold, x.coords - h * basis.col(i));
        const Eigen::VectorXd d =
            (process->drift(t, xp).vec - process->drift(t, xm).vec) / (2 * h);
        div += metric_inner(x.manifold, d, basis.col(i));
      }
      break;
    }
  }
  return div;
}

TangentVector prob_flow_field(double t, const ManifoldPoint& x, const TimeVectorField& score,
                              const NoisingProcess& process) {
  return ProbFlowField(score, process).value(t, x);
}

namespace {

// Dormand-Prince 5(4) tableau
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kB5[7] = {35.0 / 384,       0.0,        500.0 / 1113, 125.0 / 192,
                           -2187.0 / 6784,   11.0 / 84,  0.0};
constexpr double kB4[7] = {5179.0 / 57600, 0.0,          7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

std::vector<AugmentedState> rk45_integrate(const TimeVectorField& field,
                                           const ManifoldPoint& x0, double t0, double t1,
                                           const OdeConfig& cfg) {
  if (t0 == t1) throw std::invalid_argument("rk45: empty integration interval");
  if (!(cfg.rtol > 0 && cfg.atol > 0)) throw std::invalid_argument("rk45: tolerances must be > 0");
  const ManifoldId m = x0.manifold;
  const int p = m.ambient_dim();
  const double span = t1 - t0;
  const double direction = span > 0 ? 1.0 : -1.0;

  auto deriv = [&](double t, const Eigen::VectorXd& y, double& div_out) -> Eigen::VectorXd {
    const ManifoldPoint x = retract(m, y);
    div_out = field.divergence(t, x);
    return field.value(t, x).vec;
  };

  std::vector<AugmentedState> trajectory;
  AugmentedState state{x0, 0.0, t0, 0};
  trajectory.push_back(state);

  Eigen::VectorXd y = x0.coords;
  double logdet = 0.0;
  double t = t0;
  double h = span;  // optimistic start; shrinks under the error control
  long long accepted = 0;

  Eigen::MatrixXd k(p, 7);
  Eigen::VectorXd kdiv(7);

  while (direction * (t1 - t) > 1e-15 * std::abs(span)) {
    if (std::abs(h) > std::abs(t1 - t)) h = t1 - t;
    if (std::abs(h) < 1e-12 * std::abs(span)) {
      throw StiffnessDetected("rk45: step size collapsed at t = " + std::to_string(t));
    }

    for (int s = 0; s < 7; ++s) {
      Eigen::VectorXd ys = y;
      double ds = 0;
      for (int j = 0; j < s; ++j) {
        ys += h * kA[s][j] * k.col(j);
        ds += h * kA[s][j] * kdiv[j];
      }
      double div;
      k.col(s) = deriv(t + kC[s] * h, ys, div);
      kdiv[s] = div;
      (void)ds;
    }

    Eigen::VectorXd y5 = y;
    double l5 = 0, l4 = 0;
    Eigen::VectorXd y4 = y;
    for (int s = 0; s < 7; ++s) {
      y5 += h * kB5[s] * k.col(s);
      y4 += h * kB4[s] * k.col(s);
      l5 += h * kB5[s] * kdiv[s];
      l4 += h * kB4[s] * kdiv[s];
    }

    // candidate end point after the configured retraction
    Eigen::VectorXd y_ret;
    if (cfg.retraction == OdeConfig::Retraction::ProjectEachStep) {
      y_ret = retract(m, y5).coords;
    } else {
      const ManifoldPoint base = retract(m, y);
      y_ret = exp_map(base, project_to_tangent(base, y5 - base.coords)).coords;
    }

    // weighted RMS error over the augmented state; the retraction deviation
    // is part of the local error so the controller sees it (angle wrapping
    // on the torus is an identification, not a deviation)
    const bool flat_chart =
        m.kind == ManifoldKind::Torus || m.kind == ManifoldKind::Euclidean;
    double err = 0;
    for (int i = 0; i < p; ++i) {
      const double sc = cfg.atol + cfg.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      const double dev = flat_chart ? 0.0 : std::abs(y_ret[i] - y5[i]);
      const double e = (std::abs(y5[i] - y4[i]) + dev) / sc;
      err += e * e;
    }
    {
      const double sc =
          cfg.atol + cfg.rtol * std::max(std::abs(logdet), std::abs(logdet + l5));
      const double e = (l5 - l4) / sc;
      err += e * e;
    }
    err = std::sqrt(err / (p + 1));

    if (err <= 1.0) {
      t += h;
      logdet += l5;
      y = std::move(y_ret);
      ++accepted;
      state.point = ManifoldPoint{m, y};
      state.logdet = logdet;
      state.t = t;
      state.steps = accepted;
      trajectory.push_back(state);
      if (accepted >= cfg.max_steps) {
        if (direction * (t1 - t) > 1e-15 * std::abs(span)) {
          throw MaxStepsExceeded("rk45: exceeded max_steps before reaching t1");
        }
        break;
      }
    }
    const double factor =
        (err <= 1e-30) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h *= factor;
  }
  return trajectory;
}

PointLikelihood model_log_density(const ManifoldPoint& x, const TimeVectorField& score,
                                  const NoisingProcess& process, const OdeConfig& cfg) {
  PointLikelihood out;
  const ProbFlowField field(score, process);
  try {
    auto traj = rk45_integrate(field, x, process.schedule.eps, process.schedule.horizon, cfg);
    const AugmentedState& fin = traj.back();
    out.loglik = process.log_reference_density(fin.point) + fin.logdet;
    out.steps = fin.steps;
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  return out;
}

NllReport nll(const std::vector<ManifoldPoint>& data, const TimeVectorField& score,
              const NoisingProcess& process, const OdeConfig& cfg) {
  NllReport report;
  report.points.reserve(data.size());
  double sum = 0, sumsq = 0;
  int n = 0;
  for (const auto& x : data) {
    PointLikelihood pl = model_log_density(x, score, process, cfg);
    if (pl.ok) {
      sum += -pl.loglik;
      sumsq += pl.loglik * pl.loglik;
      ++n;
    } else {
      ++report.excluded;
    }
    report.points.push_back(std::move(pl));
  }
  if (n > 0) {
    report.mean_nll = sum / n;
    const double mean_ll = -report.mean_nll;
    const double var = (n > 1) ? std::max(0.0, (sumsq - n * mean_ll * mean_ll) / (n - 1)) : 0.0;
    report.se_nll = std::sqrt(var / n);
  }
  return report;
}

void write_nll_report(const std::string& path, const NllReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open nll report for writing: " + path);
  out << "# idx loglik_nats solver_steps\n";
  out.precision(12);
  for (size_t i = 0; i < report.points.size(); ++i) {
    const auto& p = report.points[i];
    if (p.ok) {
      out << i << ' ' << p.loglik << ' ' << p.steps << '\n';
    } else {
      out << i << " excluded " << p.error << '\n';
    }
  }
  out << "# summary mean_nll=" << report.mean_nll << " se=" << report.se_nll
      << " n=" << (report.points.size() - report.excluded) << " excluded=" << report.excluded
      << '\n';
}

}  // namespace rsgm
