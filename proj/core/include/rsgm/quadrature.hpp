#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "rsgm/manifold.hpp"

namespace rsgm {

// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n);

// Quadrature grid against the uniform probability measure: weights sum to 1.
struct QuadratureGrid {
  std::vector<ManifoldPoint> points;
  Eigen::VectorXd weights;
};

// Gauss grid in latitude (n_mu nodes) x uniform longitude (n_phi nodes) on S^2.
QuadratureGrid sphere2_quadrature(int n_mu, int n_phi);

// Uniform n-point grid on the circle [0, 2pi).
QuadratureGrid torus1_quadrature(int n);

}  // namespace rsgm
