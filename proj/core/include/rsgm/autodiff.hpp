#pragma once

#include <Eigen/Core>
#include <vector>

namespace rsgm::ad {

// Minimal eager reverse-mode tape over vector values. Covers exactly what the
// score losses need: dense affine maps with parameters, sinusoids, elementwise
// arithmetic, dot products and constant linear maps (frame assembly). Scalars
// are 1-vectors. Parameters live in one flat vector owned by the caller;
// backward() accumulates into a flat gradient of the same length.
class Tape {
 public:
  explicit Tape(const Eigen::VectorXd* params) : params_(params) {}

  int constant(Eigen::VectorXd v);
  // W x + b with W (rows x cols, column-major) at w_offset and b at b_offset
  // in the parameter vector; b_offset < 0 means no bias
  int affine(int w_offset, int rows, int cols, int b_offset, int x);
  // W x for the same parameter block as an existing affine (used by JVPs)
  int matvec(int w_offset, int rows, int cols, int x);
  int const_matvec(const Eigen::MatrixXd& m, int x);
  int sin(int x);
  int cos(int x);
  int add(int a, int b);
  int sub(int a, int b);
  int hadamard(int a, int b);
  int scale(int a, double c);
  int dot(int a, int b);           // 1-vector result
  int squared_norm(int a);         // 1-vector result
  int mul_scalar(int a, int s);    // vector a times 1-vector s

  const Eigen::VectorXd& value(int id) const { return nodes_[id].val; }
  double scalar(int id) const { return nodes_[id].val[0]; }

  // reverse sweep from a scalar node; adds into param_grad (sized like params)
  void backward(int scalar_node, Eigen::VectorXd& param_grad, double seed = 1.0);

  // adjoint of any node after backward(); zero vector if it never received one
  Eigen::VectorXd adjoint(int id) const;

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  enum class Op {
    Constant,
    Affine,
    Matvec,
    ConstMatvec,
    Sin,
    Cos,
    Add,
    Sub,
    Hadamard,
    Scale,
    Dot,
    SquaredNorm,
    MulScalar,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    int w_offset = -1, b_offset = -1;
    int rows = 0, cols = 0;
    double c = 0.0;
    Eigen::VectorXd val;
    Eigen::VectorXd adj;  // lazily sized in backward
  };

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  const Eigen::VectorXd* params_;
  std::vector<Node> nodes_;
};

}  // namespace rsgm::ad
