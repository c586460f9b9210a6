#include "ctprep/vessel.hpp"

#include <string>

#include "ctprep/error.hpp"

namespace ctprep {

void VesselSegParams::validate() const {
  if (!(hu_lo < hu_hi)) throw Error(ErrorCode::InvalidConfig, "vessel HU window must satisfy lo < hi");
  if (!(0.0 <= tau_low && tau_low < tau_high && tau_high <= hu_hi))
    throw Error(ErrorCode::InvalidConfig, "vessel thresholds must satisfy 0 <= tau_low < tau_high <= hu_window.hi");
  if (s_min < 1) throw Error(ErrorCode::InvalidConfig, "s_min must be >= 1");
}

BinaryMask3D segment_vessels(const Volume3D& cta, const Volume3D& ncct, const BinaryMask3D& brain,
                             const VesselSegParams& params) {
  params.validate();
  if (cta.modality != Modality::CTA)
    throw Error(ErrorCode::ModalityMismatch, "first input must be CTA, got " + std::string(to_string(cta.modality)));
  if (ncct.modality != Modality::NCCT)
    throw Error(ErrorCode::ModalityMismatch, "second input must be NCCT, got " + std::string(to_string(ncct.modality)));
  require_compatible(cta.header, ncct.header, "segment_vessels (CTA vs NCCT)");
  require_compatible(cta.header, brain.header, "segment_vessels (CTA vs brain mask)");

  const Volume3D cta_masked = apply_mask(clip(cta, params.hu_lo, params.hu_hi), brain);
  const Volume3D ncct_masked = apply_mask(clip(ncct, params.hu_lo, params.hu_hi), brain);
  const Volume3D difference = band_suppress(subtract(cta_masked, ncct_masked), params.tau_low, params.tau_high);
  const BinaryMask3D candidates = nonzero_mask(difference);
  const LabelMap3D components = label_components(candidates, params.connectivity);
  return filter_by_size(components, params.s_min, cta.header);
}

Volume3D vessel_channel(const BinaryMask3D& vessels) {
  return Volume3D{vessels.header, vessels.bits.cast<double>(), Modality::MASK};
}

}  // namespace ctprep
