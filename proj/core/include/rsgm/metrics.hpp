#pragma once

#include <functional>
#include <vector>

#include "rsgm/manifold.hpp"
#include "rsgm/rng.hpp"

namespace rsgm {

// Geodesic Gaussian kernel k(x, y) = exp(-d(x, y)^2 / (2 h^2)); bandwidth from
// the median heuristic on the pooled sample unless fixed.
struct MmdConfig {
  double bandwidth = 0.0;  // <= 0: median heuristic
  enum class Estimator { Unbiased, Biased } estimator = Estimator::Unbiased;
};

// the U-statistic may be slightly negative; the V-statistic is >= 0
double mmd2(const std::vector<ManifoldPoint>& a, const std::vector<ManifoldPoint>& b,
            const MmdConfig& cfg = {});

// median pairwise geodesic distance of the pooled sample
double median_bandwidth(const std::vector<ManifoldPoint>& a,
                        const std::vector<ManifoldPoint>& b);

// Monte Carlo permutation null for the two-sample MMD^2: returns the
// level-`quantile` order statistic over `permutations` random relabelings.
// The pooled kernel matrix is materialized in float32, so memory is
// 4 (m + n)^2 bytes.
double mmd2_permutation_quantile(const std::vector<ManifoldPoint>& a,
                                 const std::vector<ManifoldPoint>& b, const MmdConfig& cfg,
                                 int permutations, double quantile, Rng& rng);

// one-sample Kolmogorov-Smirnov statistic against a cdf
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace rsgm
