#include "ctprep/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctprep/components.hpp"
#include "ctprep/error.hpp"

namespace ctprep {
namespace {

void require_window(double lo, double hi) {
  if (!(lo < hi)) throw Error(ErrorCode::InvalidWindow, "window (" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
}

// One separable pass of a 3-wide box filter along `axis`. Out-of-bounds
// neighbours count as false for both erosion (all) and dilation (any).
MaskArray box_pass(const MaskArray& in, const Dims& dims, int axis, bool all) {
  const std::int64_t stride = axis == 0 ? 1 : axis == 1 ? dims[0] : dims[0] * dims[1];
  const std::int64_t extent = dims[axis];
  MaskArray out(in.size());
  for (Eigen::Index i = 0; i < in.size(); ++i) {
    const std::int64_t coord = (i / stride) % extent;
    const bool prev = coord > 0 && in[i - stride];
    const bool next = coord + 1 < extent && in[i + stride];
    out[i] = all ? (in[i] && prev && next) : (in[i] || prev || next);
  }
  return out;
}

BinaryMask3D box_filter(const BinaryMask3D& mask, bool all) {
  MaskArray bits = mask.bits;
  for (int axis = 0; axis < 3; ++axis) bits = box_pass(bits, mask.dims(), axis, all);
  return BinaryMask3D{mask.header, std::move(bits)};
}

}  // namespace

WindowTable default_windows() {
  return {
      {Modality::CTA, {Modality::CTA, 0.0, 90.0}},
      {Modality::CBF, {Modality::CBF, 0.0, 35.0}},
      {Modality::CBV, {Modality::CBV, 0.0, 10.0}},
      {Modality::MTT, {Modality::MTT, 0.0, 20.0}},
      {Modality::TMAX, {Modality::TMAX, 0.0, 7.0}},
  };
}

std::map<Modality, std::pair<double, double>> published_nnunet_ranges() {
  return {
      {Modality::CTA, {-3.25, 342.48}},  {Modality::CBF, {1.42, 72.64}},   {Modality::CBV, {-10.31, 19.35}},
      {Modality::MTT, {-96.91, 28.50}}, {Modality::TMAX, {-20.76, 20.29}},
  };
}

Volume3D clinical_window(const Volume3D& vol, const WindowSpec& spec, const BinaryMask3D& brain) {
  if (spec.modality != vol.modality)
    throw Error(ErrorCode::ModalityMismatch, "window for " + std::string(to_string(spec.modality)) +
                                                 " applied to " + std::string(to_string(vol.modality)));
  require_window(spec.lo, spec.hi);
  require_compatible(vol.header, brain.header, "clinical_window");

  const auto& v = vol.voxels;
  Eigen::ArrayXd scaled = (v.max(spec.lo).min(spec.hi) - spec.lo) / (spec.hi - spec.lo);
  Eigen::ArrayXd out = (brain.bits && v.isFinite()).select(scaled, 0.0);
  return Volume3D{vol.header, std::move(out), vol.modality};
}

Volume3D equalize_foreground(const Volume3D& vol, const BinaryMask3D& brain, int bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidConfig, "equalize bins must be >= 2");
  require_compatible(vol.header, brain.header, "equalize_foreground");
  constexpr double kSlack = 1e-9;

  const auto& v = vol.voxels;
  const MaskArray fg = brain.bits && v.isFinite();
  auto bucket = [bins](double x) {
    const double c = std::clamp(x, 0.0, 1.0);
    return std::min(static_cast<int>(c * bins), bins - 1);
  };

  std::vector<std::int64_t> hist(static_cast<std::size_t>(bins), 0);
  std::int64_t n = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!fg[i]) continue;
    if (v[i] < -kSlack || v[i] > 1.0 + kSlack)
      throw Error(ErrorCode::OutOfRangeInput, "foreground value " + std::to_string(v[i]) + " outside [0,1]");
    ++hist[bucket(v[i])];
    ++n;
  }

  std::vector<double> cdf(hist.size(), 0.0);
  std::int64_t running = 0;
  for (std::size_t b = 0; b < hist.size(); ++b) {
    running += hist[b];
    cdf[b] = n > 0 ? static_cast<double>(running) / static_cast<double>(n) : 0.0;
  }

  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (fg[i]) out[i] = cdf[bucket(v[i])];
  }
  return Volume3D{vol.header, std::move(out), vol.modality};
}

double nearest_rank(std::span<const double> sorted, double percent) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyForeground, "percentile of an empty sample");
  const double n = static_cast<double>(sorted.size());
  // The small slack keeps exact products such as 0.5% of 1000 from rounding up.
  auto rank = static_cast<std::int64_t>(std::ceil(percent / 100.0 * n - 1e-9));
  rank = std::clamp<std::int64_t>(rank, 1, static_cast<std::int64_t>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 64;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double x : values) s += x;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

void ForegroundPool::add(const Volume3D& vol, const BinaryMask3D& foreground) {
  require_compatible(vol.header, foreground.header, "foreground statistics");
  const auto& v = vol.voxels;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (foreground.bits[i] && std::isfinite(v[i])) values_.push_back(v[i]);
  }
}

ForegroundStats ForegroundPool::finish() && {
  if (values_.empty()) throw Error(ErrorCode::EmptyForeground, "no finite foreground voxels");
  std::vector<double> pooled = std::move(values_);
  std::sort(pooled.begin(), pooled.end());

  ForegroundStats s;
  s.n_voxels = static_cast<std::int64_t>(pooled.size());
  s.p_low = nearest_rank(pooled, 0.5);
  s.p_high = nearest_rank(pooled, 99.5);

  for (double& x : pooled) x = std::clamp(x, s.p_low, s.p_high);
  const double n = static_cast<double>(pooled.size());
  s.mean = pairwise_sum(pooled) / n;
  for (double& x : pooled) x = (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(pairwise_sum(pooled) / n);
  return s;
}

ForegroundStats compute_foreground_stats(std::span<const Volume3D> dataset, std::span<const BinaryMask3D> foreground) {
  if (dataset.size() != foreground.size())
    throw Error(ErrorCode::DimMismatch, "volume and mask lists differ in length");
  ForegroundPool pool;
  for (std::size_t k = 0; k < dataset.size(); ++k) pool.add(dataset[k], foreground[k]);
  return std::move(pool).finish();
}

Volume3D baseline_normalize(const Volume3D& vol, const ForegroundStats& stats) {
  if (!(stats.std > 0.0) || !std::isfinite(stats.std))
    throw Error(ErrorCode::DegenerateStats, "foreground std must be positive");
  const auto& v = vol.voxels;
  Eigen::ArrayXd z = (v.max(stats.p_low).min(stats.p_high) - stats.mean) / stats.std;
  Eigen::ArrayXd out = v.isFinite().select(z, 0.0);
  return Volume3D{vol.header, std::move(out), vol.modality};
}

double range_kept_percent(const WindowSpec& clinical, std::pair<double, double> nnunet_range) {
  require_window(clinical.lo, clinical.hi);
  require_window(nnunet_range.first, nnunet_range.second);
  const double percent = 100.0 * (clinical.hi - clinical.lo) / (nnunet_range.second - nnunet_range.first);
  return std::round(percent * 10.0) / 10.0;
}

BinaryMask3D erode(const BinaryMask3D& mask) { return box_filter(mask, true); }

BinaryMask3D dilate(const BinaryMask3D& mask) { return box_filter(mask, false); }

BinaryMask3D fallback_skull_strip(const Volume3D& ncct) {
  if (ncct.modality != Modality::NCCT)
    throw Error(ErrorCode::ModalityMismatch, "fallback skull strip expects NCCT, got " + std::string(to_string(ncct.modality)));

  const auto& v = ncct.voxels;
  BinaryMask3D tissue{ncct.header, v.isFinite() && v >= 0.0 && v <= 100.0};
  if (!tissue.bits.any()) throw Error(ErrorCode::EmptyForeground, "no voxels in the [0,100] HU band");

  const BinaryMask3D opened = dilate(erode(tissue));
  const LabelMap3D lm = label_components(opened, Connectivity::TwentySix);
  if (lm.component_count() == 0) throw Error(ErrorCode::EmptyForeground, "tissue band vanished after opening");

  const auto largest = std::max_element(lm.component_sizes.begin(), lm.component_sizes.end());
  const std::int32_t keep = static_cast<std::int32_t>(largest - lm.component_sizes.begin()) + 1;
  return BinaryMask3D{ncct.header, lm.labels == keep};
}

}  // namespace ctprep
