#pragma once

// Slice rasteriser for visual QC. Slices are drawn in voxel order (no
// anatomical reorientation) and written as binary PPM.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctprep/volume.hpp"

namespace ctprep {

enum class Plane { Axial, Coronal, Sagittal };

std::string_view to_string(Plane p);
std::optional<Plane> parse_plane(std::string_view name);

struct RenderSpec {
  Plane plane = Plane::Axial;
  /// Empty means "auto": the slice with the largest overlay area.
  std::optional<std::int64_t> slice_index;
  std::array<std::uint8_t, 3> overlay_color{0, 255, 0};
  double overlay_alpha = 0.5;
  double value_lo = 0.0;
  double value_hi = 1.0;
};

struct RgbImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::int64_t slice_index = 0;
  /// Row-major RGB triples.
  std::vector<std::uint8_t> pixels;
};

/// Axial slices fix z (image is x by y), coronal fix y (x by z), sagittal fix x (y by z).
RgbImage render_slice(const Volume3D& vol, const BinaryMask3D* overlay, const RenderSpec& spec);

/// Slice along the plane's normal axis with the most overlay voxels; ties go
/// to the lowest index. Without an overlay the middle slice is used.
std::int64_t auto_slice(const Dims& dims, const BinaryMask3D* overlay, Plane plane);

std::vector<std::uint8_t> encode_ppm(const RgbImage& image);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

/// `<subject>_<modality>_<plane><index>[_overlay].ppm`
std::string qc_filename(std::string_view subject, std::string_view modality, Plane plane, std::int64_t index,
                        bool with_overlay);

}  // namespace ctprep
