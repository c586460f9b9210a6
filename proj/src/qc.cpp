#include "ctprep/qc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ctprep/error.hpp"

namespace ctprep {
namespace {

int normal_axis(Plane p) {
  switch (p) {
    case Plane::Axial: return 2;
    case Plane::Coronal: return 1;
    case Plane::Sagittal: return 0;
  }
  return 2;
}

// In-plane (column, row) axes for each plane.
std::pair<int, int> in_plane_axes(Plane p) {
  switch (p) {
    case Plane::Axial: return {0, 1};
    case Plane::Coronal: return {0, 2};
    case Plane::Sagittal: return {1, 2};
  }
  return {0, 1};
}

std::uint8_t to_byte(double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 255.0))); }

}  // namespace

std::string_view to_string(Plane p) {
  switch (p) {
    case Plane::Axial: return "axial";
    case Plane::Coronal: return "coronal";
    case Plane::Sagittal: return "sagittal";
  }
  return "axial";
}

std::optional<Plane> parse_plane(std::string_view name) {
  for (Plane p : {Plane::Axial, Plane::Coronal, Plane::Sagittal}) {
    if (name == to_string(p)) return p;
  }
  return std::nullopt;
}

std::int64_t auto_slice(const Dims& dims, const BinaryMask3D* overlay, Plane plane) {
  const int axis = normal_axis(plane);
  if (overlay == nullptr) return dims[axis] / 2;

  std::vector<std::int64_t> area(static_cast<std::size_t>(dims[axis]), 0);
  for (std::int64_t z = 0; z < dims[2]; ++z)
    for (std::int64_t y = 0; y < dims[1]; ++y)
      for (std::int64_t x = 0; x < dims[0]; ++x) {
        if (!overlay->bits[overlay->index(x, y, z)]) continue;
        const std::array<std::int64_t, 3> c{x, y, z};
        ++area[static_cast<std::size_t>(c[axis])];
      }
  return std::max_element(area.begin(), area.end()) - area.begin();
}

RgbImage render_slice(const Volume3D& vol, const BinaryMask3D* overlay, const RenderSpec& spec) {
  if (overlay != nullptr) require_compatible(vol.header, overlay->header, "render_slice");
  if (!(spec.overlay_alpha >= 0.0 && spec.overlay_alpha <= 1.0))
    throw Error(ErrorCode::InvalidConfig, "overlay alpha must lie in [0,1]");
  if (!(spec.value_lo < spec.value_hi)) throw Error(ErrorCode::InvalidWindow, "render value range must satisfy lo < hi");

  const Dims& dims = vol.dims();
  const int axis = normal_axis(spec.plane);
  const auto [col_axis, row_axis] = in_plane_axes(spec.plane);
  const std::int64_t slice = spec.slice_index ? *spec.slice_index : auto_slice(dims, overlay, spec.plane);
  if (slice < 0 || slice >= dims[axis])
    throw Error(ErrorCode::SliceOutOfRange,
                "slice " + std::to_string(slice) + " outside [0, " + std::to_string(dims[axis]) + ")");

  RgbImage img;
  img.width = dims[col_axis];
  img.height = dims[row_axis];
  img.slice_index = slice;
  img.pixels.resize(static_cast<std::size_t>(img.width * img.height * 3));

  const double width = spec.value_hi - spec.value_lo;
  for (std::int64_t row = 0; row < img.height; ++row) {
    for (std::int64_t col = 0; col < img.width; ++col) {
      std::array<std::int64_t, 3> c{};
      c[axis] = slice;
      c[col_axis] = col;
      c[row_axis] = row;
      const auto idx = vol.index(c[0], c[1], c[2]);
      const double v = vol.voxels[idx];
      const double gray = std::isfinite(v) ? std::clamp((v - spec.value_lo) * 255.0 / width, 0.0, 255.0) : 0.0;
      const bool covered = overlay != nullptr && overlay->bits[idx];
      const auto px = static_cast<std::size_t>((row * img.width + col) * 3);
      for (int ch = 0; ch < 3; ++ch) {
        const double blended =
            covered ? (1.0 - spec.overlay_alpha) * gray + spec.overlay_alpha * spec.overlay_color[ch] : gray;
        img.pixels[px + ch] = to_byte(blended);
      }
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void write_ppm(const RgbImage& image, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::string qc_filename(std::string_view subject, std::string_view modality, Plane plane, std::int64_t index,
                        bool with_overlay) {
  std::string name;
  name.append(subject).append("_").append(modality).append("_").append(to_string(plane)).append(std::to_string(index));
  if (with_overlay) name += "_overlay";
  return name + ".ppm";
}

}  // namespace ctprep
