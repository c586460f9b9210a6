#include "ctprep/volume.hpp"

#include <cmath>
#include <string>

#include "ctprep/error.hpp"

namespace ctprep {
namespace {

void require_window(double lo, double hi) {
  if (!(lo < hi))
    throw Error(ErrorCode::InvalidWindow, "lower bound " + std::to_string(lo) + " must be below " + std::to_string(hi));
}

Volume3D with_voxels(const Volume3D& like, Eigen::ArrayXd voxels) {
  return Volume3D{like.header, std::move(voxels), like.modality};
}

}  // namespace

void require_compatible(const NiftiHeader& a, const NiftiHeader& b, const char* what) {
  if (!geometry_compatible(a, b)) throw Error(ErrorCode::GeometryMismatch, std::string(what) + ": geometries differ");
}

BinaryMask3D make_mask(const NiftiHeader& header, MaskArray bits) {
  if (bits.size() != header.voxel_count()) throw Error(ErrorCode::DimMismatch, "mask size != product of dims");
  return BinaryMask3D{header, std::move(bits)};
}

BinaryMask3D empty_mask_like(const NiftiHeader& header) {
  return BinaryMask3D{header, MaskArray::Constant(header.voxel_count(), false)};
}

BinaryMask3D mask_from_volume(const Volume3D& vol) { return nonzero_mask(vol); }

Volume3D clip(const Volume3D& vol, double lo, double hi) {
  require_window(lo, hi);
  // Eigen's max/min would turn NaN into a bound, so select on the comparisons instead.
  const auto& v = vol.voxels;
  Eigen::ArrayXd out = (v < lo).select(lo, (v > hi).select(hi, v));
  return with_voxels(vol, std::move(out));
}

Volume3D apply_mask(const Volume3D& vol, const BinaryMask3D& mask) {
  require_compatible(vol.header, mask.header, "apply_mask");
  Eigen::ArrayXd out = mask.bits.select(vol.voxels, 0.0);
  return with_voxels(vol, std::move(out));
}

Volume3D subtract(const Volume3D& a, const Volume3D& b) {
  require_compatible(a.header, b.header, "subtract");
  return with_voxels(a, a.voxels - b.voxels);
}

Volume3D band_suppress(const Volume3D& vol, double tau_low, double tau_high) {
  require_window(tau_low, tau_high);
  const auto& v = vol.voxels;
  Eigen::ArrayXd out = (v < tau_low || v > tau_high).select(0.0, v);
  return with_voxels(vol, std::move(out));
}

BinaryMask3D nonzero_mask(const Volume3D& vol) {
  MaskArray bits = vol.voxels.isFinite() && (vol.voxels != 0.0);
  return BinaryMask3D{vol.header, std::move(bits)};
}

Volume3D zero_non_finite(const Volume3D& vol) {
  Eigen::ArrayXd out = vol.voxels.isFinite().select(vol.voxels, 0.0);
  return with_voxels(vol, std::move(out));
}

BinaryMask3D mask_and(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_compatible(a.header, b.header, "mask_and");
  return BinaryMask3D{a.header, a.bits && b.bits};
}

BinaryMask3D mask_or(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_compatible(a.header, b.header, "mask_or");
  return BinaryMask3D{a.header, a.bits || b.bits};
}

bool mask_subset(const BinaryMask3D& inner, const BinaryMask3D& outer) {
  if (inner.size() != outer.size()) return false;
  return !(inner.bits && !outer.bits).any();
}

}  // namespace ctprep
