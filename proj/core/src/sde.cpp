#include "rsgm/sde.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rsgm/heat_kernel.hpp"

namespace rsgm {

void NoiseSchedule::validate() const {
  if (!(eps > 0 && eps < horizon)) throw std::invalid_argument("schedule: need 0 < eps < T");
  if (!(beta_min > 0 && beta_min <= beta_max)) {
    throw std::invalid_argument("schedule: need 0 < beta_min <= beta_max");
  }
}

NoisingProcess NoisingProcess::brownian(const ManifoldId& m, const NoiseSchedule& s) {
  if (!m.is_compact()) {
    throw NonCompactError("Brownian noising targets the uniform law: compact manifolds only");
  }
  NoisingProcess p;
  p.kind = NoisingKind::BrownianCompact;
  p.manifold = m;
  p.schedule = s;
  return p;
}

NoisingProcess NoisingProcess::langevin(const ManifoldPoint& mean, double gamma,
                                        const NoiseSchedule& s) {
  NoisingProcess p;
  p.kind = NoisingKind::LangevinWrapped;
  p.manifold = mean.manifold;
  p.schedule = s;
  p.mu = mean;
  p.gamma = gamma;
  return p;
}

NoisingProcess NoisingProcess::ou(int dim, const NoiseSchedule& s) {
  NoisingProcess p;
  p.kind = NoisingKind::EuclideanOU;
  p.manifold = ManifoldId::euclidean(dim);
  p.schedule = s;
  return p;
}

TangentVector NoisingProcess::drift(double t, const ManifoldPoint& x) const {
  const double b = schedule.beta(t);
  switch (kind) {
    case NoisingKind::BrownianCompact:
      return {x, Eigen::VectorXd::Zero(x.coords.size())};
    case NoisingKind::LangevinWrapped: {
      TangentVector d = langevin_drift(x, *mu, gamma);
      d.vec *= b;
      return d;
    }
    case NoisingKind::EuclideanOU:
      return {x, -0.5 * b * x.coords};
  }
  throw GeometryError("unreachable");
}

ManifoldPoint NoisingProcess::sample_reference(Rng& rng) const {
  switch (kind) {
    case NoisingKind::BrownianCompact:
      return sample_uniform(manifold, rng);
    case NoisingKind::LangevinWrapped:
      return wrapped_gaussian_sample(*mu, gamma, rng);
    case NoisingKind::EuclideanOU: {
      Eigen::VectorXd c(manifold.dim);
      for (int i = 0; i < c.size(); ++i) c[i] = rng.normal();
      return {manifold, std::move(c)};
    }
  }
  throw GeometryError("unreachable");
}

double NoisingProcess::log_reference_density(const ManifoldPoint& x) const {
  constexpr double kLog2Pi = 1.837877066409345483560659;
  switch (kind) {
    case NoisingKind::BrownianCompact:
      return -manifold.log_volume();
    case NoisingKind::LangevinWrapped:
      if (manifold.kind == ManifoldKind::Hyperbolic) {
        return wrapped_gaussian_logpdf_h2(*mu, gamma, x);
      }
      if (manifold.kind == ManifoldKind::Torus) {
        return wrapped_gaussian_logpdf_torus(*mu, gamma, x);
      }
      throw UnsupportedManifoldError("wrapped reference density not available here");
    case NoisingKind::EuclideanOU:
      return -0.5 * x.coords.squaredNorm() - 0.5 * manifold.dim * kLog2Pi;
  }
  throw GeometryError("unreachable");
}

ManifoldPoint grw_step(const ManifoldPoint& x, const TangentVector& drift_val, double g_val,
                       double gamma, Rng& rng, GrwStats* stats) {
  if (gamma <= 0) throw std::invalid_argument("grw_step: gamma must be positive");
  TangentVector w{x, gamma * drift_val.vec};
  if (g_val != 0.0) {
    const TangentVector z = gaussian_tangent(x, rng);
    w.vec += std::sqrt(gamma) * g_val * z.vec;
  }
  if (stats) {
    ++stats->steps;
    const double inj = x.manifold.injectivity_radius();
    if (std::isfinite(inj) && tangent_norm(w) > 0.9 * inj) ++stats->step_too_large;
  }
  return exp_map(x, w);
}

std::vector<ManifoldPoint> grw_path(const ManifoldPoint& x0, const DriftFn& drift,
                                    const DiffusionFn& diffusion, double t_sim, int n_steps,
                                    Rng& rng, GrwStats* stats) {
  if (n_steps < 1) throw std::invalid_argument("grw_path: need at least one step");
  std::vector<ManifoldPoint> path;
  path.reserve(n_steps + 1);
  path.push_back(x0);
  if (t_sim == 0.0) {
    for (int k = 0; k < n_steps; ++k) path.push_back(x0);
    return path;
  }
  const double gamma = t_sim / n_steps;
  ManifoldPoint x = x0;
  for (int k = 0; k < n_steps; ++k) {
    const double t = k * gamma;
    x = grw_step(x, drift(t, x), diffusion(t), gamma, rng, stats);
    path.push_back(x);
  }
  return path;
}

ManifoldPoint forward_sample(const ManifoldPoint& x0, double t, int n_steps,
                             const NoisingProcess& process, Rng& rng, GrwStats* stats) {
  auto path = grw_path(
      x0, [&](double s, const ManifoldPoint& y) { return process.drift(s, y); },
      [&](double s) { return process.schedule.g(s); }, t, n_steps, rng, stats);
  return path.back();
}

TangentVector reverse_drift(double s, const ManifoldPoint& y, const TimeVectorField& score,
                            const NoisingProcess& process) {
  const double tf = process.schedule.horizon - s;  // forward time
  const double g2 = process.schedule.beta(tf);
  TangentVector out = process.drift(tf, y);
  out.vec = -out.vec + g2 * score.value(tf, y).vec;
  return out;
}

ManifoldPoint sample_reverse(const TimeVectorField& score, const NoisingProcess& process,
                             const ReverseSamplerConfig& cfg, Rng& rng,
                             std::vector<ManifoldPoint>* path, GrwStats* stats) {
  process.schedule.validate();
  const double span = process.schedule.horizon - process.schedule.eps;
  ManifoldPoint y = process.sample_reference(rng);
  if (path) {
    path->clear();
    path->push_back(y);
  }
  const double gamma = span / cfg.n_steps;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double s = k * gamma;
    y = grw_step(y, reverse_drift(s, y, score, process),
                 process.schedule.g(process.schedule.horizon - s), gamma, rng, stats);
    if (cfg.corrector && cfg.corrector_steps > 0) {
      const double tf = process.schedule.horizon - (k + 1) * gamma;
      y = corrector_sweep(y, tf, score, cfg.corrector_steps, process.schedule.g(tf), -1.0, rng,
                          cfg, stats);
    }
    if (path) path->push_back(y);
  }
  return y;
}

ManifoldPoint corrector_sweep(const ManifoldPoint& y, double t, const TimeVectorField& score,
                              int sweeps, double g_val, double gamma_s, Rng& rng,
                              const ReverseSamplerConfig& cfg, GrwStats* stats) {
  if (sweeps < 0) throw std::invalid_argument("corrector_sweep: sweeps must be >= 0");
  ManifoldPoint x = y;
  for (int s = 0; s < sweeps; ++s) {
    TangentVector sc = score.value(t, x);
    double step = gamma_s;
    if (step <= 0) {
      // r (2/g)^2 (|Z| / |score|)^2, capped
      const TangentVector probe = gaussian_tangent(x, rng);
      const double sn = tangent_norm(sc);
      const double zn = tangent_norm(probe);
      step = (sn > 1e-12) ? cfg.snr * (4.0 / (g_val * g_val)) * (zn * zn) / (sn * sn)
                          : cfg.corrector_cap;
      step = std::min(step, cfg.corrector_cap);
    }
    sc.vec *= 0.5 * g_val * g_val;
    x = grw_step(x, sc, g_val, step, rng, stats);
  }
  return x;
}

// --- sample dump --------------------------------------------------------------------

void write_sample_dump(const std::string& path, const ManifoldId& m, uint64_t seed,
                       const std::vector<ManifoldPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open sample dump for writing: " + path);
  out << "# manifold=" << m.name() << " seed=" << seed << "\n";
  out.precision(17);
  for (const auto& p : points) {
    for (int i = 0; i < p.coords.size(); ++i) {
      if (i) out << ' ';
      out << p.coords[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("sample dump write failed: " + path);
}

SampleDump read_sample_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample dump: " + path);
  std::string header;
  std::getline(in, header);
  SampleDump dump;
  {
    const auto mpos = header.find("manifold=");
    const auto spos = header.find("seed=");
    if (header.empty() || header[0] != '#' || mpos == std::string::npos ||
        spos == std::string::npos) {
      throw std::runtime_error("sample dump missing header: " + path);
    }
    std::string mname = header.substr(mpos + 9);
    mname = mname.substr(0, mname.find(' '));
    dump.manifold = ManifoldId::parse(mname);
    dump.seed = std::stoull(header.substr(spos + 5));
  }
  const int p = dump.manifold.ambient_dim();
  std::string line;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    Eigen::VectorXd c(p);
    for (int i = 0; i < p; ++i) {
      if (!(ss >> c[i])) {
        throw std::runtime_error("sample dump: malformed row at line " + std::to_string(lineno));
      }
    }
    dump.points.push_back(make_point(dump.manifold, std::move(c)));
  }
  return dump;
}

}  // namespace rsgm
