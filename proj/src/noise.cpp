#include "synlungs/noise.hpp"

#include <cmath>

#include "synlungs/errors.hpp"
#include "synlungs/rng.hpp"
#include "synlungs/threading.hpp"

namespace synlungs {

std::vector<double> estimate_scatter(const Sinogram& s, double spr) {
  if (spr < 0.0) throw ValidationError("spr must be >= 0");
  const std::size_t total = static_cast<std::size_t>(s.n_views) * s.n_cols;
  if (spr == 0.0) return std::vector<double>(total, 0.0);

  const double i0 = s.geometry.i0;
  // View-averaged primary counts per column.
  std::vector<double> mean_counts(s.n_cols, 0.0);
  for (int v = 0; v < s.n_views; ++v) {
    for (int m = 0; m < s.n_cols; ++m) {
      mean_counts[m] += i0 * std::exp(-static_cast<double>(s.at(v, m)));
    }
  }
  for (double& c : mean_counts) c /= s.n_views;

  // Wide triangular smoothing across columns; weights renormalized at the
  // edges so a constant profile stays constant.
  const int hw = std::max(1, s.n_cols / 4);
  std::vector<double> smooth(s.n_cols, 0.0);
  for (int m = 0; m < s.n_cols; ++m) {
    double acc = 0.0, wsum = 0.0;
    const int lo = std::max(0, m - hw), hi = std::min(s.n_cols - 1, m + hw);
    for (int t = lo; t <= hi; ++t) {
      const double w = 1.0 - std::abs(t - m) / static_cast<double>(hw + 1);
      acc += w * mean_counts[t];
      wsum += w;
    }
    smooth[m] = acc / wsum;
  }

  std::vector<double> scatter(total);
  for (int v = 0; v < s.n_views; ++v) {
    for (int m = 0; m < s.n_cols; ++m) {
      scatter[s.index(v, m)] = spr * smooth[m];
    }
  }
  return scatter;
}

Sinogram apply_quantum_noise(const Sinogram& s, const ScannerConfig& cfg,
                             std::uint64_t seed, double spr, int n_threads) {
  s.validate();
  const double i0 = cfg.i0;
  const std::vector<double> scatter = estimate_scatter(s, spr);

  Sinogram out = s;
  parallel_for(
      s.n_views,
      [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t v = begin; v < end; ++v) {
          for (int m = 0; m < s.n_cols; ++m) {
            const std::size_t idx = s.index(static_cast<int>(v), m);
            const double lambda = i0 * std::exp(-static_cast<double>(s.data[idx])) +
                                  scatter[idx];
            RandomStream elem(mix_seed(seed, kStageAcquisition,
                                       static_cast<std::uint64_t>(v),
                                       static_cast<std::uint64_t>(m)));
            const double counts =
                static_cast<double>(elem.poisson(lambda));
            out.data[idx] =
                static_cast<float>(-std::log(std::max(counts, 1.0) / i0));
          }
        }
      },
      n_threads);
  return out;
}

}  // namespace synlungs
