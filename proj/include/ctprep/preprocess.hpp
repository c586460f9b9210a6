#pragma once

// Clinically windowed intensity pipeline and the nnU-Net style CT
// normalisation used as the comparison baseline.

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "ctprep/volume.hpp"

namespace ctprep {

struct WindowSpec {
  Modality modality = Modality::OTHER;
  double lo = 0.0;
  double hi = 1.0;
};

using WindowTable = std::map<Modality, WindowSpec>;

/// CTA (0,90) HU, CBF (0,35), CBV (0,10), MTT (0,20), Tmax (0,7).
WindowTable default_windows();

/// Foreground intensity ranges (0.5th..99.5th percentile) that nnU-Net
/// reported for the five input channels of the stroke dataset.
std::map<Modality, std::pair<double, double>> published_nnunet_ranges();

struct ForegroundStats {
  double p_low = 0.0;
  double p_high = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::int64_t n_voxels = 0;
};

inline constexpr int kDefaultEqualizeBins = 256;

/// Inside the brain: (clip(v, lo, hi) - lo) / (hi - lo). Outside (and at NaN): 0.
Volume3D clinical_window(const Volume3D& vol, const WindowSpec& spec, const BinaryMask3D& brain);

/// Maps each foreground voxel to the empirical CDF of its histogram bucket
/// (`bins` equal-width buckets over [0,1]); background becomes 0.
Volume3D equalize_foreground(const Volume3D& vol, const BinaryMask3D& brain, int bins = kDefaultEqualizeBins);

/// Nearest-rank percentiles over the pooled foreground of every volume.
/// mean and std (population) are taken over the pooled values after clipping
/// them to [p_low, p_high], so that baseline_normalize maps the same
/// foreground to zero mean and unit variance.
ForegroundStats compute_foreground_stats(std::span<const Volume3D> dataset,
                                         std::span<const BinaryMask3D> foreground);

/// Streams foreground values from many volumes so callers need not hold
/// the whole dataset in memory; `finish` yields the same result as
/// compute_foreground_stats over the same inputs.
class ForegroundPool {
 public:
  void add(const Volume3D& vol, const BinaryMask3D& foreground);
  std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
  ForegroundStats finish() &&;

 private:
  std::vector<double> values_;
};

/// (clip(v, p_low, p_high) - mean) / std on every voxel; NaN becomes 0.
Volume3D baseline_normalize(const Volume3D& vol, const ForegroundStats& stats);

/// 100 * window width / nnU-Net range width, rounded to one decimal.
double range_kept_percent(const WindowSpec& clinical, std::pair<double, double> nnunet_range);

/// Test-only stand-in for a real skull stripper: band [0,100] HU, one 3x3x3
/// erosion and dilation, largest 26-connected component. Not clinically valid.
BinaryMask3D fallback_skull_strip(const Volume3D& ncct);

/// Nearest-rank percentile of an ascending-sorted, non-empty sample.
double nearest_rank(std::span<const double> sorted, double percent);

/// Pairwise (cascade) summation; order-deterministic.
double pairwise_sum(std::span<const double> values);

BinaryMask3D erode(const BinaryMask3D& mask);
BinaryMask3D dilate(const BinaryMask3D& mask);

}  // namespace ctprep
