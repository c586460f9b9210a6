#pragma once

// Segmentation metrics: Dice, absolute volume difference (mL), lesion-wise
// F1 and absolute lesion count difference.

#include <cstdint>
#include <utility>
#include <vector>

#include "ctprep/components.hpp"
#include "ctprep/volume.hpp"

namespace ctprep {

struct MetricsOptions {
  Connectivity connectivity = Connectivity::TwentySix;
  /// A GT lesion counts as detected when a predicted component shares at
  /// least this many voxels with it.
  std::int64_t min_overlap = 1;
};

struct LesionMatch {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double f1 = 1.0;
  /// (predicted label, GT label) of each matched pair.
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
};

struct MetricsReport {
  double dice = 1.0;
  double avd_ml = 0.0;
  double f1_lesionwise = 1.0;
  std::int64_t alcd = 0;
  std::int64_t n_pred_lesions = 0;
  std::int64_t n_gt_lesions = 0;
};

/// 2|P∩G| / (|P|+|G|); 1.0 when both are empty.
double dice(const BinaryMask3D& pred, const BinaryMask3D& gt);

/// |(|P| - |G|) * voxel volume| in millilitres.
double avd(const BinaryMask3D& pred, const BinaryMask3D& gt);

/// One-to-one matching of predicted components to GT lesions. Pairs are
/// first taken greedily by decreasing overlap, then augmenting paths extend
/// the matching to maximum cardinality, so TP is the largest achievable.
LesionMatch match_lesions(const LabelMap3D& pred, const LabelMap3D& gt, std::int64_t min_overlap = 1);

LesionMatch lesionwise_f1(const BinaryMask3D& pred, const BinaryMask3D& gt, const MetricsOptions& options = {});

std::int64_t alcd(const BinaryMask3D& pred, const BinaryMask3D& gt, Connectivity connectivity = Connectivity::TwentySix);

/// All four metrics; component labelings are computed once and shared.
MetricsReport evaluate(const BinaryMask3D& pred, const BinaryMask3D& gt, const MetricsOptions& options = {});

}  // namespace ctprep
