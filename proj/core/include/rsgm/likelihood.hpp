#pragma once

#include <vector>

#include "rsgm/manifold.hpp"
#include "rsgm/score_model.hpp"
#include "rsgm/sde.hpp"

namespace rsgm {

struct OdeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MaxStepsExceeded : OdeError {
  using OdeError::OdeError;
};
struct StiffnessDetected : OdeError {
  using OdeError::OdeError;
};

struct OdeConfig {
  double rtol = 1e-5;
  double atol = 1e-5;
  int max_steps = 100000;
  enum class Retraction { ProjectEachStep, ExpFromTangent } retraction =
      Retraction::ProjectEachStep;
};

struct AugmentedState {
  ManifoldPoint point;
  double logdet = 0.0;
  double t = 0.0;
  long long steps = 0;  // accepted steps so far
};

// Deterministic probability-flow field sharing the noising marginals:
// b(t, x) - (1/2) g(t)^2 score(t, x), with b the forward drift (zero on
// compact manifolds). Divergence splits into the analytic drift part and the
// score field's own divergence.
struct ProbFlowField : TimeVectorField {
  const TimeVectorField* score;
  const NoisingProcess* process;

  ProbFlowField(const TimeVectorField& s, const NoisingProcess& p)
      : score(&s), process(&p) {}
  TangentVector value(double t, const ManifoldPoint& x) const override;
  double divergence(double t, const ManifoldPoint& x) const override;
};

TangentVector prob_flow_field(double t, const ManifoldPoint& x, const TimeVectorField& score,
                              const NoisingProcess& process);

// Dormand-Prince 5(4) with PI-free standard step control; the point component
// is retracted after every accepted step and the divergence of the field is
// accumulated into logdet along the way. Returns the accepted-step trajectory
// (first entry is the initial state, last is t1).
std::vector<AugmentedState> rk45_integrate(const TimeVectorField& field,
                                           const ManifoldPoint& x0, double t0, double t1,
                                           const OdeConfig& cfg);

// log model density of one point under the volume (Hausdorff) measure:
// log p_ref(x_T) + int_eps^T div(field) dt along the data-to-noise flow
struct PointLikelihood {
  double loglik = 0.0;
  long long steps = 0;
  bool ok = false;
  std::string error;
};
PointLikelihood model_log_density(const ManifoldPoint& x, const TimeVectorField& score,
                                  const NoisingProcess& process, const OdeConfig& cfg);

struct NllReport {
  std::vector<PointLikelihood> points;
  double mean_nll = 0.0;   // nats, volume-measure convention
  double se_nll = 0.0;
  int excluded = 0;
};

NllReport nll(const std::vector<ManifoldPoint>& data, const TimeVectorField& score,
              const NoisingProcess& process, const OdeConfig& cfg);

void write_nll_report(const std::string& path, const NllReport& report);

}  // namespace rsgm
