#pragma once

// Independent reference implementations used to check the library. They
// share no code with the paths they check.

#include <cstdint>
#include <vector>

#include "ctprep/volume.hpp"

namespace ctprep::testing {

/// Breadth-first flood fill. Two voxels are adjacent when they differ by at
/// most one in every coordinate and the number of differing coordinates is
/// at most 1 (6), 2 (18) or 3 (26). Labels are 1..K in discovery order.
std::vector<std::int32_t> flood_fill_labels(const BinaryMask3D& mask, int connectivity, std::int32_t& count);

/// True when the two labelings induce the same partition of the true voxels
/// (label numbering may differ).
bool same_partition(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b);

/// Largest number of one-to-one (pred, gt) pairs where each pair overlaps in
/// at least `min_overlap` voxels, by exhaustive search.
std::int64_t exhaustive_max_matching(const std::vector<std::int32_t>& pred_labels, std::int32_t n_pred,
                                     const std::vector<std::int32_t>& gt_labels, std::int32_t n_gt,
                                     std::int64_t min_overlap);

}  // namespace ctprep::testing
