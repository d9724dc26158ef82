#include "rsgm/score_model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace rsgm {

namespace {
constexpr double kPi = 3.141592653589793238462643;

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Eigen::Matrix3d unflatten(const Eigen::VectorXd& c) { return so3_unflatten(c); }
}  // namespace

int NetworkSpec::output_dim() const {
  switch (scheme) {
    case FrameScheme::Projected: return manifold.ambient_dim();
    case FrameScheme::LieFrame:
    case FrameScheme::Coordinates: return manifold.dim;
  }
  return manifold.ambient_dim();
}

int NetworkSpec::position_dim() const {
  if (manifold.kind == ManifoldKind::Torus) return 2 * manifold.dim;
  return manifold.ambient_dim();
}

uint64_t NetworkSpec::hash() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s|scheme%d|L%d|W%d|out%d|T%.17g", manifold.name().c_str(),
                static_cast<int>(scheme), hidden_layers, hidden_width, output_dim(), horizon);
  return fnv1a(buf);
}

ParamLayout make_layout(const NetworkSpec& spec) {
  ParamLayout layout;
  int offset = 0;
  int in = spec.input_dim();
  for (int l = 0; l < spec.hidden_layers; ++l) {
    ParamLayout::Layer lay{offset, offset + spec.hidden_width * in, spec.hidden_width, in};
    offset += spec.hidden_width * in + spec.hidden_width;
    layout.layers.push_back(lay);
    in = spec.hidden_width;
  }
  ParamLayout::Layer out{offset, offset + spec.output_dim() * in, spec.output_dim(), in};
  offset += spec.output_dim() * in + spec.output_dim();
  layout.layers.push_back(out);
  layout.total = offset;
  return layout;
}

Eigen::VectorXd init_params(const NetworkSpec& spec, Rng& rng) {
  const ParamLayout layout = make_layout(spec);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(layout.total);
  for (size_t l = 0; l + 1 < layout.layers.size(); ++l) {
    const auto& lay = layout.layers[l];
    const double bound = std::sqrt(6.0 / lay.cols);
    for (int i = 0; i < lay.rows * lay.cols; ++i) {
      p[lay.w_offset + i] = rng.uniform(-bound, bound);
    }
    for (int i = 0; i < lay.rows; ++i) {
      p[lay.b_offset + i] = rng.uniform(-bound, bound);
    }
  }
  // final layer stays zero: the field starts at the uniform-target fixed point
  return p;
}

Eigen::VectorXd feature_vector(const NetworkSpec& spec, double t, const ManifoldPoint& x) {
  Eigen::VectorXd f(spec.input_dim());
  f[0] = t;
  for (int k = 0; k < 4; ++k) {
    const double w = std::pow(2.0, k) * kPi * t / spec.horizon;
    f[1 + 2 * k] = std::sin(w);
    f[2 + 2 * k] = std::cos(w);
  }
  const int base = NetworkSpec::time_feature_dim();
  if (spec.manifold.kind == ManifoldKind::Torus) {
    for (int i = 0; i < spec.manifold.dim; ++i) {
      f[base + 2 * i] = std::cos(x.coords[i]);
      f[base + 2 * i + 1] = std::sin(x.coords[i]);
    }
  } else {
    f.segment(base, spec.manifold.ambient_dim()) = x.coords;
  }
  return f;
}

Eigen::VectorXd feature_tangent(const NetworkSpec& spec, const ManifoldPoint& x,
                                const Eigen::VectorXd& v) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(spec.input_dim());
  const int base = NetworkSpec::time_feature_dim();
  if (spec.manifold.kind == ManifoldKind::Torus) {
    for (int i = 0; i < spec.manifold.dim; ++i) {
      f[base + 2 * i] = -std::sin(x.coords[i]) * v[i];
      f[base + 2 * i + 1] = std::cos(x.coords[i]) * v[i];
    }
  } else {
    f.segment(base, spec.manifold.ambient_dim()) = v;
  }
  return f;
}

Eigen::VectorXd frame_jvp(const ManifoldPoint& x, FrameScheme scheme, const Eigen::VectorXd& v,
                          const Eigen::VectorXd& coeff) {
  const ManifoldId& m = x.manifold;
  switch (m.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Torus:
      return Eigen::VectorXd::Zero(m.ambient_dim());
    case ManifoldKind::Sphere: {
      // Projected frame P(x) = I - x x^T
      const double xc = x.coords.dot(coeff);
      const double vc = v.dot(coeff);
      return -(vc * x.coords + xc * v);
    }
    case ManifoldKind::SpecialOrthogonal: {
      const Eigen::Matrix3d q = unflatten(x.coords);
      const Eigen::Matrix3d a = q.transpose() * unflatten(v);  // skew
      if (scheme == FrameScheme::LieFrame) {
        Eigen::Vector3d c3(coeff[0], coeff[1], coeff[2]);
        return so3_flatten(q * a * so3_hat(c3));
      }
      // Projected: d/de [ Q_e skew(Q_e^T Wexpandir) ]
      const Eigen::Matrix3d w = unflatten(coeff);
      const Eigen::Matrix3d s = 0.5 * ((q.transpose() * w) - (q.transpose() * w).transpose());
      const Eigen::Matrix3d ds_arg = -a * (q.transpose() * w);
      const Eigen::Matrix3d ds = 0.5 * (ds_arg - ds_arg.transpose());
      return so3_flatten(q * a * s + q * ds);
    }
    case ManifoldKind::Hyperbolic: {
      if (scheme == FrameScheme::Coordinates) {
        // E_i = (x_i / x0) e0 + e_i, i = 1, 2
        const double x0 = x.coords[0];
        const double num = coeff[0] * (v[1] * x0 - x.coords[1] * v[0]) +
                           coeff[1] * (v[2] * x0 - x.coords[2] * v[0]);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(3);
        out[0] = num / (x0 * x0);
        return out;
      }
      // Projected: P(x) w = w + <w, x>_L x
      Eigen::VectorXd out = Eigen::VectorXd::Zero(3);
      out += minkowski_inner(coeff, v) * x.coords;
      out += minkowski_inner(coeff, x.coords) * v;
      return out;
    }
  }
  throw GeometryError("unreachable");
}

Eigen::VectorXd metric_dual(const ManifoldId& m, const Eigen::VectorXd& v) {
  switch (m.kind) {
    case ManifoldKind::SpecialOrthogonal: return 0.5 * v;
    case ManifoldKind::Hyperbolic: {
      Eigen::VectorXd g = v;
      g[0] = -g[0];
      return g;
    }
    default: return v;
  }
}

// --- plain evaluation -----------------------------------------------------------

namespace {

// shared forward pass; optionally carries one or more tangent streams
struct ForwardResult {
  Eigen::VectorXd coeffs;
  std::vector<Eigen::VectorXd> coeff_tangents;
};

ForwardResult mlp_forward(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                          const ManifoldPoint& x,
                          const std::vector<Eigen::VectorXd>* tangent_dirs) {
  const ParamLayout layout = make_layout(spec);
  Eigen::VectorXd h = feature_vector(spec, t, x);
  std::vector<Eigen::VectorXd> hdot;
  if (tangent_dirs) {
    for (const auto& dir : *tangent_dirs) hdot.push_back(feature_tangent(spec, x, dir));
  }
  for (size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& lay = layout.layers[l];
    Eigen::Map<const Eigen::MatrixXd> w(params.data() + lay.w_offset, lay.rows, lay.cols);
    Eigen::VectorXd z = w * h + params.segment(lay.b_offset, lay.rows);
    for (auto& hd : hdot) hd = (w * hd).eval();
    if (l + 1 < layout.layers.size()) {
      const Eigen::ArrayXd cz = z.array().cos();
      for (auto& hd : hdot) hd = (cz * hd.array()).matrix();
      h = z.array().sin().matrix();
    } else {
      h = std::move(z);
    }
  }
  if (!h.allFinite()) {
    throw std::runtime_error("score network produced non-finite activations");
  }
  return {std::move(h), std::move(hdot)};
}

}  // namespace

Eigen::VectorXd mlp_coefficients(const Eigen::VectorXd& params, const NetworkSpec& spec,
                                 double t, const ManifoldPoint& x) {
  return mlp_forward(params, spec, t, x, nullptr).coeffs;
}

TangentVector score_eval(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                         const ManifoldPoint& x) {
  const Eigen::VectorXd c = mlp_coefficients(params, spec, t, x);
  const Frame frame = frame_at(x, spec.scheme);
  return {x, frame.vectors * c};
}

Eigen::VectorXd score_jvp(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                          const ManifoldPoint& x, const TangentVector& v) {
  std::vector<Eigen::VectorXd> dirs{v.vec};
  ForwardResult r = mlp_forward(params, spec, t, x, &dirs);
  const Frame frame = frame_at(x, spec.scheme);
  return frame.vectors * r.coeff_tangents[0] + frame_jvp(x, spec.scheme, v.vec, r.coeffs);
}

double divergence_exact(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                        const ManifoldPoint& x) {
  const Eigen::MatrixXd basis = tangent_basis(x);
  std::vector<Eigen::VectorXd> dirs;
  for (int i = 0; i < basis.cols(); ++i) dirs.push_back(basis.col(i));
  ForwardResult r = mlp_forward(params, spec, t, x, &dirs);
  const Frame frame = frame_at(x, spec.scheme);
  double div = 0;
  for (int i = 0; i < basis.cols(); ++i) {
    const Eigen::VectorXd jv =
        frame.vectors * r.coeff_tangents[i] + frame_jvp(x, spec.scheme, basis.col(i), r.coeffs);
    div += metric_inner(x.manifold, jv, basis.col(i));
  }
  return div;
}

double divergence_hutchinson(const Eigen::VectorXd& params, const NetworkSpec& spec, double t,
                             const ManifoldPoint& x, Rng& rng, int probes) {
  if (probes < 1) throw std::invalid_argument("hutchinson: probes must be >= 1");
  const Eigen::MatrixXd basis = tangent_basis(x);
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(probes);
  for (int k = 0; k < probes; ++k) {
    Eigen::VectorXd eps = Eigen::VectorXd::Zero(x.coords.size());
    for (int i = 0; i < basis.cols(); ++i) eps += rng.rademacher() * basis.col(i);
    dirs.push_back(std::move(eps));
  }
  ForwardResult r = mlp_forward(params, spec, t, x, &dirs);
  const Frame frame = frame_at(x, spec.scheme);
  double acc = 0;
  for (int k = 0; k < probes; ++k) {
    const Eigen::VectorXd jv =
        frame.vectors * r.coeff_tangents[k] + frame_jvp(x, spec.scheme, dirs[k], r.coeffs);
    acc += metric_inner(x.manifold, jv, dirs[k]);
  }
  return acc / probes;
}

// --- tape builders ---------------------------------------------------------------

ScoreGraph build_score_graph(ad::Tape& tape, const NetworkSpec& spec, double t,
                             const ManifoldPoint& x) {
  const ParamLayout layout = make_layout(spec);
  ScoreGraph g;
  g.features = tape.constant(feature_vector(spec, t, x));
  int h = g.features;
  for (size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& lay = layout.layers[l];
    const int z = tape.affine(lay.w_offset, lay.rows, lay.cols, lay.b_offset, h);
    if (l + 1 < layout.layers.size()) {
      g.preacts.push_back(z);
      h = tape.sin(z);
      g.activations.push_back(h);
    } else {
      h = z;
    }
  }
  g.coeffs = h;
  g.score = tape.const_matvec(frame_at(x, spec.scheme).vectors, g.coeffs);
  return g;
}

int build_jvp_node(ad::Tape& tape, const ScoreGraph& g, const NetworkSpec& spec,
                   const ManifoldPoint& x, const Eigen::VectorXd& tangent_dir) {
  const ParamLayout layout = make_layout(spec);
  int hd = tape.constant(feature_tangent(spec, x, tangent_dir));
  for (size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& lay = layout.layers[l];
    hd = tape.matvec(lay.w_offset, lay.rows, lay.cols, hd);
    if (l + 1 < layout.layers.size()) {
      hd = tape.hadamard(tape.cos(g.preacts[l]), hd);
    }
  }
  // frame term: E(x) cdot + dE(x)[dir] c. The frame derivative is linear in
  // the coefficients, so build its matrix column by column.
  const int n = spec.output_dim();
  const int p = x.manifold.ambient_dim();
  Eigen::MatrixXd dframe(p, n);
  for (int j = 0; j < n; ++j) {
    dframe.col(j) = frame_jvp(x, spec.scheme, tangent_dir, Eigen::VectorXd::Unit(n, j));
  }
  const int a = tape.const_matvec(frame_at(x, spec.scheme).vectors, hd);
  const int b = tape.const_matvec(dframe, g.coeffs);
  return tape.add(a, b);
}

int build_divergence_node(ad::Tape& tape, const ScoreGraph& g, const NetworkSpec& spec,
                          const ManifoldPoint& x) {
  const Eigen::MatrixXd basis = tangent_basis(x);
  int acc = -1;
  for (int i = 0; i < basis.cols(); ++i) {
    const int jv = build_jvp_node(tape, g, spec, x, basis.col(i));
    const int term = tape.dot(jv, tape.constant(metric_dual(x.manifold, basis.col(i))));
    acc = (acc < 0) ? term : tape.add(acc, term);
  }
  return acc;
}

int build_metric_sqnorm_node(ad::Tape& tape, const ManifoldId& m, int vec_node) {
  switch (m.kind) {
    case ManifoldKind::SpecialOrthogonal:
      return tape.scale(tape.squared_norm(vec_node), 0.5);
    case ManifoldKind::Hyperbolic: {
      Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
      g(0, 0) = -1.0;
      return tape.dot(vec_node, tape.const_matvec(g, vec_node));
    }
    default:
      return tape.squared_norm(vec_node);
  }
}

// --- checkpoint io -----------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'R', 'S', 'G', 'M', 'C', 'K', 'P', '1'};

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_raw(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const Eigen::VectorXd& params) {
  const ParamLayout layout = make_layout(spec);
  if (params.size() != layout.total) throw std::invalid_argument("checkpoint: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 8);
  write_raw<uint64_t>(out, spec.hash());
  write_raw<uint32_t>(out, static_cast<uint32_t>(layout.layers.size()));
  for (const auto& l : layout.layers) {
    write_raw<uint32_t>(out, static_cast<uint32_t>(l.rows));
    write_raw<uint32_t>(out, static_cast<uint32_t>(l.cols));
  }
  write_raw<uint64_t>(out, static_cast<uint64_t>(params.size()));
  out.write(reinterpret_cast<const char*>(params.data()),
            static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Eigen::VectorXd load_checkpoint(const std::string& path, const NetworkSpec& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const uint64_t hash = read_raw<uint64_t>(in);
  if (hash != expected.hash()) {
    throw CheckpointMismatch("checkpoint was written for a different network spec");
  }
  const ParamLayout layout = make_layout(expected);
  const uint32_t n_layers = read_raw<uint32_t>(in);
  if (n_layers != layout.layers.size()) throw CheckpointMismatch("layer table mismatch");
  for (const auto& l : layout.layers) {
    if (read_raw<uint32_t>(in) != static_cast<uint32_t>(l.rows) ||
        read_raw<uint32_t>(in) != static_cast<uint32_t>(l.cols)) {
      throw CheckpointMismatch("layer shape mismatch");
    }
  }
  const uint64_t count = read_raw<uint64_t>(in);
  if (count != static_cast<uint64_t>(layout.total)) throw CheckpointMismatch("size mismatch");
  Eigen::VectorXd params(layout.total);
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated: " + path);
  return params;
}

// --- vector field defaults -----------------------------------------------------------

Eigen::VectorXd TimeVectorField::jvp(double t, const ManifoldPoint& x,
                                     const TangentVector& v) const {
  const double h = 1e-6;
  const ManifoldPoint xp = retract(x.manifold, x.coords + h * v.vec);
  const ManifoldPoint xm = retract(x.manifold, x.coords - h * v.vec);
  return (value(t, xp).vec - value(t, xm).vec) / (2 * h);
}

double TimeVectorField::divergence(double t, const ManifoldPoint& x) const {
  const Eigen::MatrixXd basis = tangent_basis(x);
  double div = 0;
  for (int i = 0; i < basis.cols(); ++i) {
    TangentVector dir{x, basis.col(i)};
    div += metric_inner(x.manifold, jvp(t, x, dir), basis.col(i));
  }
  return div;
}

}  // namespace rsgm
