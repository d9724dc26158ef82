#include "rsgm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rsgm {

namespace {

void require_two_sample(const std::vector<ManifoldPoint>& a,
                        const std::vector<ManifoldPoint>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("mmd: need at least 2 points");
  if (a[0].manifold != b[0].manifold) throw DimensionError("mmd: manifold mismatch");
}

double resolve_bandwidth(const std::vector<ManifoldPoint>& a,
                         const std::vector<ManifoldPoint>& b, const MmdConfig& cfg) {
  return cfg.bandwidth > 0 ? cfg.bandwidth : median_bandwidth(a, b);
}

}  // namespace

double median_bandwidth(const std::vector<ManifoldPoint>& a,
                        const std::vector<ManifoldPoint>& b) {
  std::vector<const ManifoldPoint*> pool;
  pool.reserve(a.size() + b.size());
  for (const auto& p : a) pool.push_back(&p);
  for (const auto& p : b) pool.push_back(&p);
  // subsample the pool when the full pairwise set would be excessive
  const size_t cap = 2000;
  const size_t stride = std::max<size_t>(1, pool.size() / cap);
  std::vector<double> dists;
  for (size_t i = 0; i < pool.size(); i += stride) {
    for (size_t j = i + stride; j < pool.size(); j += stride) {
      dists.push_back(dist(*pool[i], *pool[j]));
    }
  }
  if (dists.empty()) throw std::invalid_argument("mmd: empty pooled sample");
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  const double med = dists[dists.size() / 2];
  return med > 1e-12 ? med : 1.0;
}

double mmd2(const std::vector<ManifoldPoint>& a, const std::vector<ManifoldPoint>& b,
            const MmdConfig& cfg) {
  require_two_sample(a, b);
  const double h = resolve_bandwidth(a, b, cfg);
  const double inv = 1.0 / (2.0 * h * h);
  auto kern = [&](const ManifoldPoint& x, const ManifoldPoint& y) {
    const double d = dist(x, y);
    return std::exp(-d * d * inv);
  };
  const size_t m = a.size(), n = b.size();
  double kaa = 0, kbb = 0, kab = 0;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = i + 1; j < m; ++j) kaa += kern(a[i], a[j]);
  }
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) kbb += kern(b[i], b[j]);
  }
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) kab += kern(a[i], b[j]);
  }
  if (cfg.estimator == MmdConfig::Estimator::Unbiased) {
    return 2.0 * kaa / (double(m) * (m - 1)) + 2.0 * kbb / (double(n) * (n - 1)) -
           2.0 * kab / (double(m) * n);
  }
  // V-statistic: diagonal terms k(x, x) = 1 included
  return (2.0 * kaa + m) / (double(m) * m) + (2.0 * kbb + n) / (double(n) * n) -
         2.0 * kab / (double(m) * n);
}

double mmd2_permutation_quantile(const std::vector<ManifoldPoint>& a,
                                 const std::vector<ManifoldPoint>& b, const MmdConfig& cfg,
                                 int permutations, double quantile, Rng& rng) {
  require_two_sample(a, b);
  if (permutations < 1) throw std::invalid_argument("permutation count must be >= 1");
  const double h = resolve_bandwidth(a, b, cfg);
  const double inv = 1.0 / (2.0 * h * h);
  const size_t m = a.size(), n = b.size(), total = m + n;

  std::vector<const ManifoldPoint*> pool;
  pool.reserve(total);
  for (const auto& p : a) pool.push_back(&p);
  for (const auto& p : b) pool.push_back(&p);

  // pooled kernel matrix in float32 (the permutation statistic only needs
  // sums of entries, float accumulated in double is ample)
  std::vector<float> k(total * total);
  double total_sum = 0;  // off-diagonal sum
  for (size_t i = 0; i < total; ++i) {
    k[i * total + i] = 1.0f;
    for (size_t j = i + 1; j < total; ++j) {
      const double d = dist(*pool[i], *pool[j]);
      const float v = static_cast<float>(std::exp(-d * d * inv));
      k[i * total + j] = v;
      k[j * total + i] = v;
      total_sum += 2.0 * v;
    }
  }

  std::vector<size_t> idx(total);
  for (size_t i = 0; i < total; ++i) idx[i] = i;

  std::vector<double> stats;
  stats.reserve(permutations);
  for (int p = 0; p < permutations; ++p) {
    // Fisher-Yates relabeling
    for (size_t i = total - 1; i > 0; --i) {
      std::swap(idx[i], idx[rng.uniform_index(i + 1)]);
    }
    // within-A and within-B off-diagonal sums under the permuted labels
    double saa = 0, sbb = 0;
    for (size_t i = 0; i < m; ++i) {
      const float* row = k.data() + idx[i] * total;
      for (size_t j = i + 1; j < m; ++j) saa += row[idx[j]];
    }
    for (size_t i = m; i < total; ++i) {
      const float* row = k.data() + idx[i] * total;
      for (size_t j = i + 1; j < total; ++j) sbb += row[idx[j]];
    }
    const double sab = 0.5 * (total_sum - 2.0 * saa - 2.0 * sbb);
    double stat;
    if (cfg.estimator == MmdConfig::Estimator::Unbiased) {
      stat = 2.0 * saa / (double(m) * (m - 1)) + 2.0 * sbb / (double(n) * (n - 1)) -
             2.0 * sab / (double(m) * n);
    } else {
      stat = (2.0 * saa + m) / (double(m) * m) + (2.0 * sbb + n) / (double(n) * n) -
             2.0 * sab / (double(m) * n);
    }
    stats.push_back(stat);
  }
  std::sort(stats.begin(), stats.end());
  const size_t rank = std::min(
      stats.size() - 1, static_cast<size_t>(std::ceil(quantile * (stats.size() + 1))) - 1);
  return stats[std::max<size_t>(rank, 0)];
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double ks = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const double u = cdf(samples[i]);
    ks = std::max(ks, std::max(std::abs(u - i / n), std::abs(u - (i + 1) / n)));
  }
  return ks;
}

}  // namespace rsgm
