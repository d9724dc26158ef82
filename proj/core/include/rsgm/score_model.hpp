#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "rsgm/autodiff.hpp"
#include "rsgm/manifold.hpp"
#include "rsgm/rng.hpp"

namespace rsgm {

// MLP score field s(t, x) = sum_i c_i(t, x) E_i(x): sinusoidal activations,
// frame coefficients on the output.
struct NetworkSpec {
  ManifoldId manifold;
  FrameScheme scheme = FrameScheme::Projected;
  int hidden_layers = 3;
  int hidden_width = 512;
  double horizon = 1.0;  // scales the sinusoidal time features

  int output_dim() const;    // frame size n for (manifold, scheme)
  int position_dim() const;  // torus uses (cos, sin) pairs, others raw ambient
  static constexpr int time_feature_dim() { return 9; }  // t plus 8 sinusoids
  int input_dim() const { return time_feature_dim() + position_dim(); }
  uint64_t hash() const;
};

struct ParamLayout {
  struct Layer {
    int w_offset, b_offset, rows, cols;
  };
  std::vector<Layer> layers;
  int total = 0;
};

ParamLayout make_layout(const NetworkSpec& spec);

// hidden layers uniform +-sqrt(6/fan_in), zero final layer (score starts at 0)
Eigen::VectorXd init_params(const NetworkSpec& spec, Rng& rng);

Eigen::VectorXd feature_vector(const NetworkSpec& spec, double t, const ManifoldPoint& x);
// directional derivative of the features w.r.t. x along tangent v (t fixed)
Eigen::VectorXd feature_tangent(const NetworkSpec& spec, const ManifoldPoint& x,
                                const Eigen::VectorXd& v);

// d/de [ Frame(x_e) coeff ] along tangent direction v, closed form per scheme
Eigen::VectorXd frame_jvp(const ManifoldPoint& x, FrameScheme scheme,
                          const Eigen::VectorXd& v, const Eigen::VectorXd& coeff);

// G v such that metric_inner(u, v) = u.dot(G v)
Eigen::VectorXd metric_dual(const ManifoldId& m, const Eigen::VectorXd& v);

// --- plain evaluation (no tape) -------------------------------------------------

Eigen::VectorXd mlp_coefficients(const Eigen::VectorXd& params, const NetworkSpec& spec,
                                 double t, const ManifoldPoint& x);

TangentVector score_eval(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                         const ManifoldPoint& x);

// forward-mode directional derivative of the ambient score along tangent v
Eigen::VectorXd score_jvp(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                          const ManifoldPoint& x, const TangentVector& v);

// Riemannian divergence via d JVPs against the canonical orthonormal basis
double divergence_exact(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                        const ManifoldPoint& x);

// Hutchinson estimator with Rademacher probes in the orthonormal tangent basis
double divergence_hutchinson(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                             const ManifoldPoint& x, Rng& rng, int probes);

// --- tape graph builders (training path) ------------------------------------------

struct ScoreGraph {
  int features = -1;
  std::vector<int> preacts;      // affine outputs before each sin
  std::vector<int> activations;  // sin outputs
  int coeffs = -1;               // network output
  int score = -1;                // ambient score vector
};

ScoreGraph build_score_graph(ad::Tape& tape, const NetworkSpec& spec, double t,
                             const ManifoldPoint& x);

// JVP along a fixed tangent direction, sharing the primal graph
int build_jvp_node(ad::Tape& tape, const ScoreGraph& g, const NetworkSpec& spec,
                   const ManifoldPoint& x, const Eigen::VectorXd& tangent_dir);

// scalar node: Riemannian divergence of the score field at x
int build_divergence_node(ad::Tape& tape, const ScoreGraph& g, const NetworkSpec& spec,
                          const ManifoldPoint& x);

// scalar node: squared Riemannian norm of an ambient tangent-vector node
int build_metric_sqnorm_node(ad::Tape& tape, const ManifoldId& m, int vec_node);

// --- checkpoint io ------------------------------------------------------------------

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const Eigen::VectorXd& params);
struct CheckpointMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
Eigen::VectorXd load_checkpoint(const std::string& path, const NetworkSpec& expected);

// --- time-indexed vector fields -------------------------------------------------------

// Interface shared by learned score networks and analytic fields. Default jvp
// is a central difference through the retraction; default divergence sums
// metric inner products of basis JVPs.
struct TimeVectorField {
  virtual ~TimeVectorField() = default;
  virtual TangentVector value(double t, const ManifoldPoint& x) const = 0;
  virtual Eigen::VectorXd jvp(double t, const ManifoldPoint& x, const TangentVector& v) const;
  virtual double divergence(double t, const ManifoldPoint& x) const;
};

struct ScoreNetworkField : TimeVectorField {
  NetworkSpec spec;
  Eigen::VectorXd params;

  ScoreNetworkField(NetworkSpec s, Eigen::VectorXd p) : spec(std::move(s)), params(std::move(p)) {}
  TangentVector value(double t, const ManifoldPoint& x) const override {
    return score_eval(params, spec, t, x);
  }
  Eigen::VectorXd jvp(double t, const ManifoldPoint& x, const TangentVector& v) const override {
    return score_jvp(params, spec, t, x, v);
  }
  double divergence(double t, const ManifoldPoint& x) const override {
    return divergence_exact(params, spec, t, x);
  }
};

struct FunctionField : TimeVectorField {
  std::function<TangentVector(double, const ManifoldPoint&)> fn;
  explicit FunctionField(std::function<TangentVector(double, const ManifoldPoint&)> f)
      : fn(std::move(f)) {}
  TangentVector value(double t, const ManifoldPoint& x) const override { return fn(t, x); }
};

}  // namespace rsgm
