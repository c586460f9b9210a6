#pragma once

// NIfTI-1 single-file ("n+1") reader and writer, plain or gzip-wrapped.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctprep/modality.hpp"

namespace ctprep {

using Dims = std::array<std::int64_t, 3>;

/// On-disk scalar types understood by the reader and writer.
enum class DataType : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

std::size_t bytes_per_voxel(DataType t);

struct NiftiHeader {
  Dims dims{1, 1, 1};
  DataType datatype = DataType::Float32;
  Eigen::Vector3d pixdim = Eigen::Vector3d::Ones();
  double scl_slope = 1.0;
  double scl_inter = 0.0;
  /// Voxel (i, j, k, 1) to world (mm).
  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
  std::int64_t vox_offset = 352;

  // Native-endian copy of the 348 header bytes and of everything between the
  // header and the payload (extender + extensions, uninterpreted). The writer
  // starts from these and patches the geometry fields above into them.
  std::array<std::uint8_t, 348> raw{};
  std::vector<std::uint8_t> extensions;

  std::int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  double voxel_volume_mm3() const { return pixdim.prod(); }
};

/// Fresh header for a volume created in memory: sform = diag(spacing).
NiftiHeader make_header(const Dims& dims,
                        const Eigen::Vector3d& spacing = Eigen::Vector3d::Ones());

/// A scalar volume. Voxels are stored x-fastest as doubles with the on-disk
/// scl_slope / scl_inter already applied; NaNs are kept as read.
struct Volume3D {
  NiftiHeader header;
  Eigen::ArrayXd voxels;
  Modality modality = Modality::OTHER;

  const Dims& dims() const { return header.dims; }
  Eigen::Index size() const { return voxels.size(); }
  Eigen::Index index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<Eigen::Index>(x + header.dims[0] * (y + header.dims[1] * z));
  }
  double at(std::int64_t x, std::int64_t y, std::int64_t z) const { return voxels[index(x, y, z)]; }
  std::int64_t non_finite_count() const;
};

/// Builds a volume, checking that the voxel count matches the header dims.
Volume3D make_volume(NiftiHeader header, Eigen::ArrayXd voxels, Modality modality = Modality::OTHER);

Volume3D decode_volume(std::span<const std::uint8_t> bytes, Modality modality = Modality::OTHER);
std::vector<std::uint8_t> encode_volume(const Volume3D& vol, DataType datatype, bool gzip);

Volume3D read_volume(const std::filesystem::path& path, Modality modality = Modality::OTHER);

/// Gzip is used when the path ends in ".gz". Returns the bytes written so
/// callers can checksum exactly what landed on disk.
std::vector<std::uint8_t> write_volume(const Volume3D& vol, const std::filesystem::path& path,
                                       DataType datatype);

bool geometry_compatible(const NiftiHeader& a, const NiftiHeader& b);

template <class A, class B>
  requires requires(const A& a, const B& b) {
    a.header;
    b.header;
  }
bool geometry_compatible(const A& a, const B& b) {
  return geometry_compatible(a.header, b.header);
}

}  // namespace ctprep
