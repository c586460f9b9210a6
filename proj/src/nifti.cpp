#include "ctprep/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "ctprep/error.hpp"
#include "ctprep/gzip.hpp"

namespace ctprep {
namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::int64_t kMinVoxOffset = 352;

// Byte offsets into the 348-byte NIfTI-1 header.
namespace off {
constexpr std::size_t sizeof_hdr = 0;
constexpr std::size_t dim = 40;
constexpr std::size_t datatype = 70;
constexpr std::size_t bitpix = 72;
constexpr std::size_t pixdim = 76;
constexpr std::size_t vox_offset = 108;
constexpr std::size_t scl_slope = 112;
constexpr std::size_t scl_inter = 116;
constexpr std::size_t cal_max = 124;
constexpr std::size_t cal_min = 128;
constexpr std::size_t qform_code = 252;
constexpr std::size_t sform_code = 254;
constexpr std::size_t quatern_b = 256;
constexpr std::size_t srow_x = 280;
constexpr std::size_t magic = 344;
}  // namespace off

struct NumericField {
  std::size_t offset;
  std::size_t width;
  std::size_t count;
};

// Every numeric field of the header; used to convert a byte-swapped header to
// native order in one pass.
constexpr NumericField kNumericFields[] = {
    {0, 4, 1},     // sizeof_hdr
    {32, 4, 1},    // extents
    {36, 2, 1},    // session_error
    {40, 2, 8},    // dim
    {56, 4, 3},    // intent_p1..3
    {68, 2, 4},    // intent_code, datatype, bitpix, slice_start
    {76, 4, 8},    // pixdim
    {108, 4, 3},   // vox_offset, scl_slope, scl_inter
    {120, 2, 1},   // slice_end
    {124, 4, 4},   // cal_max, cal_min, slice_duration, toffset
    {140, 4, 2},   // glmax, glmin
    {252, 2, 2},   // qform_code, sform_code
    {256, 4, 6},   // quatern_b..qoffset_z
    {280, 4, 12},  // srow_x, srow_y, srow_z
};

void swap_bytes(std::uint8_t* p, std::size_t width) { std::reverse(p, p + width); }

template <class T>
T load(const std::uint8_t* base, std::size_t offset) {
  T v;
  std::memcpy(&v, base + offset, sizeof(T));
  return v;
}

template <class T>
void store(std::uint8_t* base, std::size_t offset, T v) {
  std::memcpy(base + offset, &v, sizeof(T));
}

bool supported(std::int16_t code) {
  switch (static_cast<DataType>(code)) {
    case DataType::UInt8:
    case DataType::Int16:
    case DataType::Int32:
    case DataType::Float32:
    case DataType::Float64:
      return true;
  }
  return false;
}

Eigen::Matrix4d quaternion_affine(const std::uint8_t* raw, const Eigen::Vector3d& spacing,
                                  double qfac) {
  const double b = load<float>(raw, off::quatern_b);
  const double c = load<float>(raw, off::quatern_b + 4);
  const double d = load<float>(raw, off::quatern_b + 8);
  const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));

  Eigen::Matrix3d rot;
  rot << a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
      2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
      2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b;

  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
  affine.topLeftCorner<3, 3>() = rot * Eigen::Vector3d(spacing.x(), spacing.y(), qfac * spacing.z()).asDiagonal();
  for (int i = 0; i < 3; ++i) affine(i, 3) = load<float>(raw, off::quatern_b + 12 + 4 * i);
  return affine;
}

// Extension chain: 4-byte extender, then (esize, ecode, payload) records.
// Only the two int32 framing fields are swapped; payloads stay opaque.
void swap_extensions(std::vector<std::uint8_t>& ext) {
  if (ext.size() < 4 || ext[0] == 0) return;
  std::size_t pos = 4;
  while (pos + 8 <= ext.size()) {
    swap_bytes(ext.data() + pos, 4);
    swap_bytes(ext.data() + pos + 4, 4);
    const auto esize = load<std::int32_t>(ext.data(), pos);
    if (esize < 8) return;
    pos += static_cast<std::size_t>(esize);
  }
}

template <class T>
void decode_payload(const std::uint8_t* src, Eigen::ArrayXd& out, bool swapped, double slope,
                    double inter) {
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, src + static_cast<std::size_t>(i) * sizeof(T), sizeof(T));
    if (swapped) swap_bytes(buf, sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    out[i] = static_cast<double>(v) * slope + inter;
  }
}

template <class T>
void encode_payload(const Eigen::ArrayXd& voxels, std::uint8_t* dst) {
  for (Eigen::Index i = 0; i < voxels.size(); ++i) {
    const double v = voxels[i];
    T stored;
    if constexpr (std::is_integral_v<T>) {
      const double r = std::nearbyint(v);
      if (!std::isfinite(v) || r < static_cast<double>(std::numeric_limits<T>::min()) ||
          r > static_cast<double>(std::numeric_limits<T>::max())) {
        throw Error(ErrorCode::RangeOverflow,
                    "value " + std::to_string(v) + " at voxel " + std::to_string(i) +
                        " does not fit the requested integer datatype");
      }
      stored = static_cast<T>(r);
    } else {
      if (std::isfinite(v) && std::abs(v) > static_cast<double>(std::numeric_limits<T>::max())) {
        throw Error(ErrorCode::RangeOverflow,
                    "value " + std::to_string(v) + " exceeds the floating-point datatype range");
      }
      stored = static_cast<T>(v);
    }
    std::memcpy(dst + static_cast<std::size_t>(i) * sizeof(T), &stored, sizeof(T));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
  return bytes;
}

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

std::size_t bytes_per_voxel(DataType t) {
  switch (t) {
    case DataType::UInt8: return 1;
    case DataType::Int16: return 2;
    case DataType::Int32: return 4;
    case DataType::Float32: return 4;
    case DataType::Float64: return 8;
  }
  throw Error(ErrorCode::UnsupportedDatatype, "unknown datatype");
}

NiftiHeader make_header(const Dims& dims, const Eigen::Vector3d& spacing) {
  NiftiHeader h;
  h.dims = dims;
  h.pixdim = spacing;
  h.affine = Eigen::Matrix4d::Identity();
  h.affine.topLeftCorner<3, 3>() = spacing.asDiagonal();
  h.extensions.assign(4, 0);

  std::uint8_t* raw = h.raw.data();
  store<std::int32_t>(raw, off::sizeof_hdr, 348);
  store<float>(raw, off::pixdim, 1.0f);  // qfac
  store<std::uint8_t>(raw, 123, 2);       // xyzt_units: mm
  store<std::int16_t>(raw, off::sform_code, 2);
  std::memcpy(raw + off::magic, "n+1\0", 4);
  return h;
}

std::int64_t Volume3D::non_finite_count() const {
  return static_cast<std::int64_t>((!voxels.isFinite()).count());
}

Volume3D make_volume(NiftiHeader header, Eigen::ArrayXd voxels, Modality modality) {
  for (auto d : header.dims) {
    if (d < 1) throw Error(ErrorCode::DimMismatch, "dims must be positive");
  }
  if (voxels.size() != header.voxel_count())
    throw Error(ErrorCode::DimMismatch, "voxel count " + std::to_string(voxels.size()) +
                                            " != product of dims " + std::to_string(header.voxel_count()));
  return Volume3D{std::move(header), std::move(voxels), modality};
}

Volume3D decode_volume(std::span<const std::uint8_t> input, Modality modality) {
  std::vector<std::uint8_t> inflated;
  std::span<const std::uint8_t> bytes = input;
  if (gzip::is_gzip(input)) {
    inflated = gzip::decompress(input);
    bytes = inflated;
  }
  if (bytes.size() < kHeaderSize) throw Error(ErrorCode::MalformedHeader, "file shorter than 348-byte header");

  NiftiHeader h;
  std::copy_n(bytes.begin(), kHeaderSize, h.raw.begin());
  std::uint8_t* raw = h.raw.data();

  const auto sizeof_hdr = load<std::int32_t>(raw, off::sizeof_hdr);
  bool swapped = false;
  if (sizeof_hdr != 348) {
    std::int32_t flipped = sizeof_hdr;
    swap_bytes(reinterpret_cast<std::uint8_t*>(&flipped), 4);
    if (flipped == 540 || sizeof_hdr == 540) throw Error(ErrorCode::MalformedHeader, "NIfTI-2 is not supported");
    if (flipped != 348) throw Error(ErrorCode::MalformedHeader, "sizeof_hdr is not 348");
    swapped = true;
    for (const auto& f : kNumericFields) {
      for (std::size_t k = 0; k < f.count; ++k) swap_bytes(raw + f.offset + k * f.width, f.width);
    }
  }

  if (std::memcmp(raw + off::magic, "ni1\0", 4) == 0)
    throw Error(ErrorCode::MalformedHeader, "two-file NIfTI (ni1) is not supported");
  if (std::memcmp(raw + off::magic, "n+1\0", 4) != 0)
    throw Error(ErrorCode::MalformedHeader, "bad magic, expected n+1");

  const auto ndim = load<std::int16_t>(raw, off::dim);
  if (ndim < 1 || ndim > 7) throw Error(ErrorCode::MalformedHeader, "dim[0] out of range");
  for (int i = 0; i < 3; ++i) {
    const std::int16_t d = i < ndim ? load<std::int16_t>(raw, off::dim + 2 * (i + 1)) : 1;
    if (d < 1) throw Error(ErrorCode::MalformedHeader, "non-positive dimension");
    h.dims[i] = d;
  }
  for (int i = 3; i < ndim; ++i) {
    const auto d = load<std::int16_t>(raw, off::dim + 2 * (i + 1));
    if (d > 1) throw Error(ErrorCode::MalformedHeader, "only 3-D volumes are supported (trailing dim > 1)");
  }

  const auto code = load<std::int16_t>(raw, off::datatype);
  if (!supported(code)) throw Error(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(code));
  h.datatype = static_cast<DataType>(code);

  for (int i = 0; i < 3; ++i) h.pixdim[i] = load<float>(raw, off::pixdim + 4 * (i + 1));

  const double vox_offset = load<float>(raw, off::vox_offset);
  if (!(vox_offset >= kMinVoxOffset) || vox_offset != std::floor(vox_offset))
    throw Error(ErrorCode::MalformedHeader, "vox_offset must be an integer >= 352");
  h.vox_offset = static_cast<std::int64_t>(vox_offset);
  if (bytes.size() < static_cast<std::size_t>(h.vox_offset))
    throw Error(ErrorCode::MalformedHeader, "file truncated before vox_offset");

  h.scl_slope = load<float>(raw, off::scl_slope);
  h.scl_inter = load<float>(raw, off::scl_inter);
  if (h.scl_slope == 0.0 || !std::isfinite(h.scl_slope)) {
    h.scl_slope = 1.0;
    h.scl_inter = 0.0;
  }
  if (!std::isfinite(h.scl_inter)) h.scl_inter = 0.0;

  const auto qform_code = load<std::int16_t>(raw, off::qform_code);
  const auto sform_code = load<std::int16_t>(raw, off::sform_code);
  if (sform_code > 0) {
    h.affine = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) h.affine(r, c) = load<float>(raw, off::srow_x + 16 * r + 4 * c);
  } else if (qform_code > 0) {
    const double qfac = load<float>(raw, off::pixdim) < 0 ? -1.0 : 1.0;
    h.affine = quaternion_affine(raw, h.pixdim, qfac);
  } else {
    h.affine = Eigen::Matrix4d::Identity();
    h.affine.topLeftCorner<3, 3>() = h.pixdim.asDiagonal();
  }

  h.extensions.assign(bytes.begin() + kHeaderSize, bytes.begin() + h.vox_offset);
  if (swapped) swap_extensions(h.extensions);

  const auto count = h.voxel_count();
  const std::size_t payload = static_cast<std::size_t>(count) * bytes_per_voxel(h.datatype);
  if (bytes.size() - static_cast<std::size_t>(h.vox_offset) < payload)
    throw Error(ErrorCode::DimMismatch, "payload has " + std::to_string(bytes.size() - h.vox_offset) +
                                            " bytes, dims imply " + std::to_string(payload));

  Eigen::ArrayXd voxels(count);
  const std::uint8_t* src = bytes.data() + h.vox_offset;
  switch (h.datatype) {
    case DataType::UInt8: decode_payload<std::uint8_t>(src, voxels, swapped, h.scl_slope, h.scl_inter); break;
    case DataType::Int16: decode_payload<std::int16_t>(src, voxels, swapped, h.scl_slope, h.scl_inter); break;
    case DataType::Int32: decode_payload<std::int32_t>(src, voxels, swapped, h.scl_slope, h.scl_inter); break;
    case DataType::Float32: decode_payload<float>(src, voxels, swapped, h.scl_slope, h.scl_inter); break;
    case DataType::Float64: decode_payload<double>(src, voxels, swapped, h.scl_slope, h.scl_inter); break;
  }
  return Volume3D{std::move(h), std::move(voxels), modality};
}

std::vector<std::uint8_t> encode_volume(const Volume3D& vol, DataType datatype, bool compress) {
  static_assert(std::endian::native == std::endian::little, "writer assumes a little-endian host");
  const auto& h = vol.header;
  if (vol.voxels.size() != h.voxel_count()) throw Error(ErrorCode::DimMismatch, "voxel count != dims");
  for (auto d : h.dims) {
    if (d < 1 || d > std::numeric_limits<std::int16_t>::max())
      throw Error(ErrorCode::DimMismatch, "dimension not representable in NIfTI-1");
  }

  std::vector<std::uint8_t> ext = h.extensions;
  if (ext.size() < 4) ext.resize(4, 0);
  const std::size_t vox_offset = kHeaderSize + ext.size();

  std::vector<std::uint8_t> out(vox_offset + static_cast<std::size_t>(h.voxel_count()) * bytes_per_voxel(datatype));
  std::array<std::uint8_t, 348> raw = h.raw;
  std::uint8_t* r = raw.data();

  store<std::int32_t>(r, off::sizeof_hdr, 348);
  store<std::int16_t>(r, off::dim, 3);
  for (int i = 0; i < 3; ++i) store<std::int16_t>(r, off::dim + 2 * (i + 1), static_cast<std::int16_t>(h.dims[i]));
  for (int i = 4; i <= 7; ++i) store<std::int16_t>(r, off::dim + 2 * i, 1);
  store<std::int16_t>(r, off::datatype, static_cast<std::int16_t>(datatype));
  store<std::int16_t>(r, off::bitpix, static_cast<std::int16_t>(8 * bytes_per_voxel(datatype)));
  if (load<float>(r, off::pixdim) == 0.0f) store<float>(r, off::pixdim, 1.0f);
  for (int i = 0; i < 3; ++i) store<float>(r, off::pixdim + 4 * (i + 1), static_cast<float>(h.pixdim[i]));
  store<float>(r, off::vox_offset, static_cast<float>(vox_offset));
  // Voxels are held already scaled.
  store<float>(r, off::scl_slope, 1.0f);
  store<float>(r, off::scl_inter, 0.0f);
  store<float>(r, off::cal_max, 0.0f);
  store<float>(r, off::cal_min, 0.0f);
  if (load<std::int16_t>(r, off::sform_code) <= 0) store<std::int16_t>(r, off::sform_code, 2);
  for (int row = 0; row < 3; ++row)
    for (int c = 0; c < 4; ++c) store<float>(r, off::srow_x + 16 * row + 4 * c, static_cast<float>(h.affine(row, c)));
  std::memcpy(r + off::magic, "n+1\0", 4);

  std::copy(raw.begin(), raw.end(), out.begin());
  std::copy(ext.begin(), ext.end(), out.begin() + kHeaderSize);

  std::uint8_t* dst = out.data() + vox_offset;
  switch (datatype) {
    case DataType::UInt8: encode_payload<std::uint8_t>(vol.voxels, dst); break;
    case DataType::Int16: encode_payload<std::int16_t>(vol.voxels, dst); break;
    case DataType::Int32: encode_payload<std::int32_t>(vol.voxels, dst); break;
    case DataType::Float32: encode_payload<float>(vol.voxels, dst); break;
    case DataType::Float64: encode_payload<double>(vol.voxels, dst); break;
    default: throw Error(ErrorCode::UnsupportedDatatype, "cannot write datatype");
  }
  return compress ? gzip::compress(out) : out;
}

Volume3D read_volume(const std::filesystem::path& path, Modality modality) {
  const auto bytes = read_file(path);
  return decode_volume(bytes, modality);
}

std::vector<std::uint8_t> write_volume(const Volume3D& vol, const std::filesystem::path& path, DataType datatype) {
  auto bytes = encode_volume(vol, datatype, path.extension() == ".gz");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
  return bytes;
}

bool geometry_compatible(const NiftiHeader& a, const NiftiHeader& b) {
  if (a.dims != b.dims) return false;
  constexpr double kRel = 1e-4;
  for (int i = 0; i < 3; ++i) {
    if (!close_rel(a.pixdim[i], b.pixdim[i], kRel)) return false;
  }
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!close_rel(a.affine(r, c), b.affine(r, c), kRel)) return false;
  return true;
}

}  // namespace ctprep
