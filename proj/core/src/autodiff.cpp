#include "rsgm/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace rsgm::ad {

namespace {
using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;
}  // namespace

int Tape::constant(VectorXd v) {
  Node n;
  n.op = Op::Constant;
  n.val = std::move(v);
  return push(n);
}

int Tape::affine(int w_offset, int rows, int cols, int b_offset, int x) {
  Node n;
  n.op = Op::Affine;
  n.a = x;
  n.w_offset = w_offset;
  n.b_offset = b_offset;
  n.rows = rows;
  n.cols = cols;
  Map<const MatrixXd> w(params_->data() + w_offset, rows, cols);
  n.val = w * nodes_[x].val;
  if (b_offset >= 0) n.val += params_->segment(b_offset, rows);
  return push(n);
}

int Tape::matvec(int w_offset, int rows, int cols, int x) {
  Node n;
  n.op = Op::Matvec;
  n.a = x;
  n.w_offset = w_offset;
  n.rows = rows;
  n.cols = cols;
  Map<const MatrixXd> w(params_->data() + w_offset, rows, cols);
  n.val = w * nodes_[x].val;
  return push(n);
}

int Tape::const_matvec(const MatrixXd& m, int x) {
  // stash the matrix as a constant node so backward can reuse it
  Node mc;
  mc.op = Op::Constant;
  mc.val = Map<const VectorXd>(m.data(), m.size());
  mc.rows = static_cast<int>(m.rows());
  mc.cols = static_cast<int>(m.cols());
  const int mid = push(mc);
  Node n;
  n.op = Op::ConstMatvec;
  n.a = x;
  n.b = mid;
  n.rows = mc.rows;
  n.cols = mc.cols;
  n.val = m * nodes_[x].val;
  return push(n);
}

int Tape::sin(int x) {
  Node n;
  n.op = Op::Sin;
  n.a = x;
  n.val = nodes_[x].val.array().sin();
  return push(n);
}

int Tape::cos(int x) {
  Node n;
  n.op = Op::Cos;
  n.a = x;
  n.val = nodes_[x].val.array().cos();
  return push(n);
}

int Tape::add(int a, int b) {
  Node n;
  n.op = Op::Add;
  n.a = a;
  n.b = b;
  n.val = nodes_[a].val + nodes_[b].val;
  return push(n);
}

int Tape::sub(int a, int b) {
  Node n;
  n.op = Op::Sub;
  n.a = a;
  n.b = b;
  n.val = nodes_[a].val - nodes_[b].val;
  return push(n);
}

int Tape::hadamard(int a, int b) {
  Node n;
  n.op = Op::Hadamard;
  n.a = a;
  n.b = b;
  n.val = nodes_[a].val.cwiseProduct(nodes_[b].val);
  return push(n);
}

int Tape::scale(int a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = a;
  n.c = c;
  n.val = c * nodes_[a].val;
  return push(n);
}

int Tape::dot(int a, int b) {
  Node n;
  n.op = Op::Dot;
  n.a = a;
  n.b = b;
  n.val = VectorXd::Constant(1, nodes_[a].val.dot(nodes_[b].val));
  return push(n);
}

int Tape::squared_norm(int a) {
  Node n;
  n.op = Op::SquaredNorm;
  n.a = a;
  n.val = VectorXd::Constant(1, nodes_[a].val.squaredNorm());
  return push(n);
}

int Tape::mul_scalar(int a, int s) {
  Node n;
  n.op = Op::MulScalar;
  n.a = a;
  n.b = s;
  n.val = nodes_[s].val[0] * nodes_[a].val;
  return push(n);
}

void Tape::backward(int scalar_node, VectorXd& param_grad, double seed) {
  if (nodes_[scalar_node].val.size() != 1) {
    throw std::invalid_argument("backward: root must be a scalar node");
  }
  if (param_grad.size() != params_->size()) {
    throw std::invalid_argument("backward: gradient buffer size mismatch");
  }
  for (auto& n : nodes_) n.adj.setZero(0);
  nodes_[scalar_node].adj = VectorXd::Constant(1, seed);

  auto acc = [&](int id, const VectorXd& g) {
    Node& n = nodes_[id];
    if (n.adj.size() == 0) {
      n.adj = g;
    } else {
      n.adj += g;
    }
  };

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.adj.size() == 0) continue;
    const VectorXd& d = n.adj;
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Affine:
      case Op::Matvec: {
        Map<const MatrixXd> w(params_->data() + n.w_offset, n.rows, n.cols);
        acc(n.a, w.transpose() * d);
        Map<MatrixXd> gw(param_grad.data() + n.w_offset, n.rows, n.cols);
        gw.noalias() += d * nodes_[n.a].val.transpose();
        if (n.op == Op::Affine && n.b_offset >= 0) {
          param_grad.segment(n.b_offset, n.rows) += d;
        }
        break;
      }
      case Op::ConstMatvec: {
        const Node& mc = nodes_[n.b];
        Map<const MatrixXd> m(mc.val.data(), mc.rows, mc.cols);
        acc(n.a, m.transpose() * d);
        break;
      }
      case Op::Sin:
        acc(n.a, nodes_[n.a].val.array().cos().matrix().cwiseProduct(d));
        break;
      case Op::Cos:
        acc(n.a, (-nodes_[n.a].val.array().sin()).matrix().cwiseProduct(d));
        break;
      case Op::Add:
        acc(n.a, d);
        acc(n.b, d);
        break;
      case Op::Sub:
        acc(n.a, d);
        acc(n.b, -d);
        break;
      case Op::Hadamard:
        acc(n.a, nodes_[n.b].val.cwiseProduct(d));
        acc(n.b, nodes_[n.a].val.cwiseProduct(d));
        break;
      case Op::Scale:
        acc(n.a, n.c * d);
        break;
      case Op::Dot:
        acc(n.a, d[0] * nodes_[n.b].val);
        acc(n.b, d[0] * nodes_[n.a].val);
        break;
      case Op::SquaredNorm:
        acc(n.a, 2.0 * d[0] * nodes_[n.a].val);
        break;
      case Op::MulScalar: {
        acc(n.a, nodes_[n.b].val[0] * d);
        VectorXd gs(1);
        gs[0] = nodes_[n.a].val.dot(d);
        acc(n.b, gs);
        break;
      }
    }
  }
}

Eigen::VectorXd Tape::adjoint(int id) const {
  if (nodes_[id].adj.size() == 0) return VectorXd::Zero(nodes_[id].val.size());
  return nodes_[id].adj;
}

}  // namespace rsgm::ad
