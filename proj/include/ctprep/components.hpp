#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ctprep/volume.hpp"

namespace ctprep {

enum class Connectivity : int { Six = 6, Eighteen = 18, TwentySix = 26 };

/// Throws InvalidConfig for anything other than 6, 18 or 26.
Connectivity connectivity_from_int(int n);

/// Dense component labels 1..K (0 = background). Labels are numbered in the
/// scan order (x fastest) of each component's first voxel.
struct LabelMap3D {
  Dims dims{1, 1, 1};
  Eigen::ArrayXi labels;
  /// component_sizes[k - 1] is the voxel count of label k.
  std::vector<std::int64_t> component_sizes;
  Connectivity connectivity = Connectivity::TwentySix;

  std::int32_t component_count() const { return static_cast<std::int32_t>(component_sizes.size()); }
  std::int64_t size_of(std::int32_t label) const { return component_sizes.at(static_cast<std::size_t>(label - 1)); }
};

LabelMap3D label_components(const BinaryMask3D& mask, Connectivity connectivity = Connectivity::TwentySix);

/// Union of components with at least `s_min` voxels. `geometry` supplies the
/// header of the returned mask.
BinaryMask3D filter_by_size(const LabelMap3D& lm, std::int64_t s_min, const NiftiHeader& geometry);

std::int32_t count_components(const BinaryMask3D& mask, Connectivity connectivity = Connectivity::TwentySix);

}  // namespace ctprep
