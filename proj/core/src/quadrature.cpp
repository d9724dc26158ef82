#include "rsgm/quadrature.hpp"

#include <cmath>

namespace rsgm {

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n) {
  Eigen::VectorXd nodes(n), weights(n);
  const double pi = 3.141592653589793238462643;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Chebyshev-based initial guess, then Newton on P_n
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
  return {nodes, weights};
}

QuadratureGrid sphere2_quadrature(int n_mu, int n_phi) {
  auto [mu, w] = gauss_legendre(n_mu);
  QuadratureGrid grid;
  grid.points.reserve(static_cast<size_t>(n_mu) * n_phi);
  grid.weights.resize(static_cast<Eigen::Index>(n_mu) * n_phi);
  const ManifoldId m = ManifoldId::sphere(2);
  const double pi = 3.141592653589793238462643;
  Eigen::Index idx = 0;
  for (int i = 0; i < n_mu; ++i) {
    const double s = std::sqrt(std::max(0.0, 1.0 - mu[i] * mu[i]));
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * pi * j / n_phi;
      Eigen::VectorXd c(3);
      c << s * std::cos(phi), s * std::sin(phi), mu[i];
      grid.points.push_back({m, std::move(c)});
      // d(prob) = dmu dphi / (4 pi)
      grid.weights[idx++] = w[i] * (2.0 * pi / n_phi) / (4.0 * pi);
    }
  }
  return grid;
}

QuadratureGrid torus1_quadrature(int n) {
  QuadratureGrid grid;
  grid.points.reserve(n);
  grid.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  const ManifoldId m = ManifoldId::torus(1);
  const double pi = 3.141592653589793238462643;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd c(1);
    c << 2.0 * pi * (i + 0.5) / n;
    grid.points.push_back({m, std::move(c)});
  }
  return grid;
}

}  // namespace rsgm
