#pragma once

// Element-wise volume arithmetic and mask algebra. Every function is pure and
// returns a new object; geometry is carried over from the first argument.

#include <Eigen/Dense>

#include "ctprep/nifti.hpp"

namespace ctprep {

using MaskArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Boolean grid sharing a volume's geometry. `header` is copied from the
/// volume the mask was derived from so that masks can be written back out.
struct BinaryMask3D {
  NiftiHeader header;
  MaskArray bits;

  const Dims& dims() const { return header.dims; }
  Eigen::Index size() const { return bits.size(); }
  Eigen::Index index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<Eigen::Index>(x + header.dims[0] * (y + header.dims[1] * z));
  }
  std::int64_t count() const { return static_cast<std::int64_t>(bits.count()); }
};

BinaryMask3D make_mask(const NiftiHeader& header, MaskArray bits);
BinaryMask3D empty_mask_like(const NiftiHeader& header);

/// Reads a mask file; any finite nonzero voxel is true.
BinaryMask3D mask_from_volume(const Volume3D& vol);

/// min(max(v, lo), hi); NaN passes through.
Volume3D clip(const Volume3D& vol, double lo, double hi);

/// v where mask is true, 0 elsewhere.
Volume3D apply_mask(const Volume3D& vol, const BinaryMask3D& mask);

Volume3D subtract(const Volume3D& a, const Volume3D& b);

/// Zeroes v < tau_low and v > tau_high (strict); voxels equal to a threshold survive.
Volume3D band_suppress(const Volume3D& vol, double tau_low, double tau_high);

/// True where the voxel is finite and nonzero.
BinaryMask3D nonzero_mask(const Volume3D& vol);

/// Replaces non-finite voxels by 0.
Volume3D zero_non_finite(const Volume3D& vol);

BinaryMask3D mask_and(const BinaryMask3D& a, const BinaryMask3D& b);
BinaryMask3D mask_or(const BinaryMask3D& a, const BinaryMask3D& b);

/// True iff every true voxel of `inner` is true in `outer`.
bool mask_subset(const BinaryMask3D& inner, const BinaryMask3D& outer);

void require_compatible(const NiftiHeader& a, const NiftiHeader& b, const char* what);

}  // namespace ctprep
