#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <fstream>

#include "rsgm/heat_kernel.hpp"
#include "rsgm/likelihood.hpp"
#include "rsgm/manifold.hpp"
#include "rsgm/quadrature.hpp"

using namespace rsgm;

namespace {
constexpr double kPi = 3.141592653589793238462643;

ManifoldPoint torus1_pt(double a) {
  Eigen::VectorXd c(1);
  c << wrap_angle_2pi(a);
  return {ManifoldId::torus(1), c};
}

struct ZeroField : TimeVectorField {
  TangentVector value(double, const ManifoldPoint& x) const override {
    return {x, Eigen::VectorXd::Zero(x.coords.size())};
  }
  double divergence(double, const ManifoldPoint&) const override { return 0.0; }
};

// analytic score of the noised wrapped-Gaussian marginal on T^1
struct WrappedMarginalScore : TimeVectorField {
  double mu, s0sq;
  const NoiseSchedule* sched;
  WrappedMarginalScore(double m, double s, const NoiseSchedule* sc)
      : mu(m), s0sq(s), sched(sc) {}
  TangentVector value(double t, const ManifoldPoint& x) const override {
    Eigen::VectorXd v(1);
    v << torus1_score(x.coords[0] - mu, s0sq + sched->u(t));
    return {x, v};
  }
};

// analytic score of the noised Gaussian marginal under the Euclidean OU flow
struct GaussianMarginalScore : TimeVectorField {
  double m0, v0;
  const NoiseSchedule* sched;
  GaussianMarginalScore(double m, double v, const NoiseSchedule* sc)
      : m0(m), v0(v), sched(sc) {}
  TangentVector value(double t, const ManifoldPoint& x) const override {
    const double u = sched->u(t);
    const double mt = m0 * std::exp(-0.5 * u);
    const double vt = 1.0 + (v0 - 1.0) * std::exp(-u);
    return {x, -(x.coords.array() - mt).matrix() / vt};
  }
};

}  // namespace

TEST_CASE("rk45: zero field is a single giant step") {
  ZeroField f;
  Eigen::VectorXd c(3);
  c << 0, 0.6, 0.8;
  ManifoldPoint x0 = make_point(ManifoldId::sphere(2), c);
  OdeConfig cfg;
  auto traj = rk45_integrate(f, x0, 0.0, 1.0, cfg);
  REQUIRE(traj.size() == 2);  // initial state + one accepted step
  CHECK((traj.back().point.coords - x0.coords).norm() < 1e-15);
  CHECK(traj.back().logdet == 0.0);
}

TEST_CASE("rk45: scalar exponential growth") {
  FunctionField f([](double, const ManifoldPoint& x) {
    return TangentVector{x, x.coords};
  });
  ManifoldPoint x0{ManifoldId::euclidean(1), Eigen::VectorXd::Ones(1)};
  OdeConfig cfg;
  cfg.rtol = cfg.atol = 1e-8;
  auto traj = rk45_integrate(f, x0, 0.0, 1.0, cfg);
  CHECK(std::abs(traj.back().point.coords[0] - std::exp(1.0)) < 1e-7);
  // d/dx (x) = 1, so the divergence integral is exactly the elapsed time
  CHECK(traj.back().logdet == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("rk45: killing field on the sphere") {
  // rotation flow: divergence-free isometry, one full revolution
  struct Killing : TimeVectorField {
    Eigen::Vector3d omega{0.0, 0.0, 2 * kPi};
    TangentVector value(double, const ManifoldPoint& x) const override {
      Eigen::Vector3d v = omega.cross(Eigen::Vector3d(x.coords));
      return {x, v};
    }
    Eigen::VectorXd jvp(double, const ManifoldPoint&, const TangentVector& v) const override {
      return omega.cross(Eigen::Vector3d(v.vec));
    }
  } f;
  Eigen::VectorXd c(3);
  c << 0.8, 0.0, 0.6;
  ManifoldPoint x0 = make_point(ManifoldId::sphere(2), c);
  OdeConfig cfg;
  cfg.rtol = cfg.atol = 1e-8;
  auto traj = rk45_integrate(f, x0, 0.0, 1.0, cfg);
  CHECK(std::abs(traj.back().logdet) < 1e-8);
  CHECK(std::abs(traj.back().point.coords.norm() - 1.0) < 1e-9);
  CHECK((traj.back().point.coords - x0.coords).norm() < 1e-6);  // full circle

  // the exp-based retraction is lower order (the controller still sees its
  // deviation, so accuracy degrades gracefully rather than silently)
  cfg.retraction = OdeConfig::Retraction::ExpFromTangent;
  auto traj2 = rk45_integrate(f, x0, 0.0, 1.0, cfg);
  CHECK((traj2.back().point.coords - x0.coords).norm() < 1e-4);
}

TEST_CASE("rk45: error paths") {
  FunctionField f([](double, const ManifoldPoint& x) {
    return TangentVector{x, x.coords};
  });
  ManifoldPoint x0{ManifoldId::euclidean(1), Eigen::VectorXd::Ones(1)};
  OdeConfig cfg;
  cfg.max_steps = 2;
  cfg.rtol = cfg.atol = 1e-12;
  CHECK_THROWS_AS(rk45_integrate(f, x0, 0.0, 1.0, cfg), MaxStepsExceeded);
  CHECK_THROWS_AS(rk45_integrate(f, x0, 0.5, 0.5, OdeConfig{}), std::invalid_argument);
}

TEST_CASE("uniform model: NLL equals log-volume") {
  ZeroField zf;
  OdeConfig cfg;
  Rng rng(3);

  NoiseSchedule sched;
  auto sp = NoisingProcess::brownian(ManifoldId::sphere(2), sched);
  std::vector<ManifoldPoint> pts;
  for (int i = 0; i < 25; ++i) pts.push_back(sample_uniform(ManifoldId::sphere(2), rng));
  auto report = nll(pts, zf, sp, cfg);
  CHECK(report.excluded == 0);
  CHECK(report.mean_nll == doctest::Approx(std::log(4 * kPi)).epsilon(1e-9));
  for (const auto& p : report.points) {
    CHECK(p.loglik == doctest::Approx(-std::log(4 * kPi)).epsilon(1e-9));
  }

  auto tp = NoisingProcess::brownian(ManifoldId::torus(2), sched);
  std::vector<ManifoldPoint> tpts;
  for (int i = 0; i < 25; ++i) tpts.push_back(sample_uniform(ManifoldId::torus(2), rng));
  CHECK(nll(tpts, zf, tp, cfg).mean_nll ==
        doctest::Approx(2 * std::log(2 * kPi)).epsilon(1e-9));
}

TEST_CASE("convention lock: T^1 analytic score reproduces the wrapped-Gaussian density") {
  NoiseSchedule sched;
  sched.beta_min = 0.001;
  sched.beta_max = 25.0;  // u(T) ~ 12.5 so p_T is uniform to ~4e-3
  auto proc = NoisingProcess::brownian(ManifoldId::torus(1), sched);
  const double mu = 1.0, sigma = 0.2;
  WrappedMarginalScore score(mu, sigma * sigma, &sched);
  OdeConfig cfg;

  auto mupt = torus1_pt(mu);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    // points within ~3 sigma of the mode, where the density is non-negligible
    const double x = mu + (i - 49.5) / 49.5 * 3.0 * sigma;
    auto pt = torus1_pt(x);
    auto pl = model_log_density(pt, score, proc, cfg);
    REQUIRE(pl.ok);
    const double analytic = wrapped_gaussian_logpdf_torus(mupt, sigma, pt);
    worst = std::max(worst, std::abs(pl.loglik - analytic));
  }
  CHECK(worst < 1e-2);
}

TEST_CASE("Euclidean OU with the exact Gaussian score recovers the data density") {
  NoiseSchedule sched;
  sched.beta_min = 0.001;
  // the OU mean only decays like e^{-u/2}, so u(T) = 15 keeps the
  // p_T ~ p_ref substitution error below the 1e-3 gate
  sched.beta_max = 30.0;
  auto proc = NoisingProcess::ou(1, sched);
  const double m0 = 0.3, s0 = 0.7;
  GaussianMarginalScore score(m0, s0 * s0, &sched);
  OdeConfig cfg;
  double worst = 0;
  for (double x : {-1.0, -0.2, 0.3, 0.9, 1.6}) {
    ManifoldPoint pt{ManifoldId::euclidean(1), Eigen::VectorXd::Constant(1, x)};
    auto pl = model_log_density(pt, score, proc, cfg);
    REQUIRE(pl.ok);
    const double analytic = -0.5 * (x - m0) * (x - m0) / (s0 * s0) -
                            0.5 * std::log(2 * kPi * s0 * s0);
    worst = std::max(worst, std::abs(pl.loglik - analytic));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("flow reversibility") {
  NoiseSchedule sched;
  sched.beta_max = 5.0;
  auto proc = NoisingProcess::brownian(ManifoldId::torus(1), sched);
  WrappedMarginalScore score(2.0, 0.25, &sched);
  ProbFlowField field(score, proc);

  OdeConfig cfg;
  cfg.rtol = cfg.atol = 1e-8;
  auto start = torus1_pt(2.4);
  auto fwd = rk45_integrate(field, start, sched.eps, sched.horizon, cfg);
  // retrace: same field integrated with the bounds swapped (equivalently,
  // the negated field in reflected time)
  auto back =
      rk45_integrate(field, fwd.back().point, sched.horizon, sched.eps, cfg);
  CHECK(dist(back.back().point, start) < 1e-5);
}

TEST_CASE("nll: solver failures are excluded and counted") {
  NoiseSchedule sched;
  auto proc = NoisingProcess::brownian(ManifoldId::torus(1), sched);
  WrappedMarginalScore score(2.0, 0.04, &sched);
  OdeConfig cfg;
  cfg.max_steps = 1;  // force MaxStepsExceeded for non-trivial flows
  std::vector<ManifoldPoint> pts{torus1_pt(2.0), torus1_pt(2.3)};
  auto report = nll(pts, score, proc, cfg);
  CHECK(report.excluded == 2);

  const std::string path = "/tmp/rsgm_nll_report.txt";
  write_nll_report(path, report);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find("excluded=2") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("model normalization: any score field yields a probability density") {
  // flow conservation: even an untrained random network integrates to ~1
  Rng rng(9);
  NetworkSpec spec;
  spec.manifold = ManifoldId::sphere(2);
  spec.scheme = FrameScheme::Projected;
  spec.hidden_layers = 2;
  spec.hidden_width = 8;
  Eigen::VectorXd params = init_params(spec, rng);
  for (int i = 0; i < params.size(); ++i) params[i] += 0.5 * rng.normal();
  ScoreNetworkField score(spec, params);

  NoiseSchedule sched;
  sched.beta_max = 5.0;
  auto proc = NoisingProcess::brownian(ManifoldId::sphere(2), sched);
  OdeConfig cfg;
  auto grid = sphere2_quadrature(32, 64);
  double mass = 0;
  for (size_t i = 0; i < grid.points.size(); ++i) {
    auto pl = model_log_density(grid.points[i], score, proc, cfg);
    REQUIRE(pl.ok);
    // weights integrate the probability measure; convert to Hausdorff
    mass += grid.weights[i] * std::exp(pl.loglik + std::log(4 * kPi));
  }
  CHECK(mass > 0.97);
  CHECK(mass < 1.03);
}
