#pragma once

#include <cstdint>

#include "ctprep/components.hpp"
#include "ctprep/volume.hpp"

namespace ctprep {

struct VesselSegParams {
  double hu_lo = 0.0;
  double hu_hi = 400.0;
  double tau_low = 50.0;
  double tau_high = 400.0;
  std::int64_t s_min = 25;
  Connectivity connectivity = Connectivity::TwentySix;

  /// Throws InvalidConfig unless 0 <= tau_low < tau_high <= hu_hi, hu_lo < hu_hi, s_min >= 1.
  void validate() const;
};

/// CTA minus NCCT digital subtraction inside the brain:
/// clip both to the HU window, mask both, subtract, suppress differences
/// outside [tau_low, tau_high], binarise, keep components of >= s_min voxels.
/// Inputs must be co-registered; no resampling is attempted.
BinaryMask3D segment_vessels(const Volume3D& cta, const Volume3D& ncct, const BinaryMask3D& brain,
                             const VesselSegParams& params = {});

/// 0/1 volume for use as a model input channel.
Volume3D vessel_channel(const BinaryMask3D& vessels);

}  // namespace ctprep
