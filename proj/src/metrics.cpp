#include "synlungs/metrics.hpp"

#include <algorithm>

#include "synlungs/errors.hpp"

namespace synlungs {

OverlapReport dice(const VoxelVolume& a, const VoxelVolume& b) {
  if (!a.same_grid(b)) throw ValidationError("dice requires identical grids");
  OverlapReport r;
  for (std::size_t n = 0; n < a.values.size(); ++n) {
    const bool in_a = a.values[n] != 0.0f;
    const bool in_b = b.values[n] != 0.0f;
    r.a_voxels += in_a;
    r.b_voxels += in_b;
    r.intersection_voxels += in_a && in_b;
  }
  r.dice = (r.a_voxels + r.b_voxels) == 0
               ? 1.0
               : 2.0 * r.intersection_voxels /
                     static_cast<double>(r.a_voxels + r.b_voxels);
  return r;
}

double auc(const std::vector<std::pair<double, bool>>& scored) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& [score, truth] : scored) {
    (truth ? n_pos : n_neg) += 1;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw DegenerateData("AUC needs both classes present");
  }

  // Rank-sum formulation with midranks for ties.
  std::vector<std::pair<double, bool>> sorted = scored;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t) {
      if (sorted[t].second) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * n_pos * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace synlungs
