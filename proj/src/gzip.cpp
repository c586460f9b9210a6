#include "ctprep/gzip.hpp"

#include <array>

#include <zlib.h>

#include "ctprep/error.hpp"

namespace ctprep::gzip {

bool is_gzip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<std::uint8_t> decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw Error(ErrorCode::IoFailure, "inflateInit2 failed");

  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());

  int rc = Z_OK;
  while (true) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) break;
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_STREAM_END) {
      // Concatenated members are legal gzip; keep going if more input remains.
      if (zs.avail_in == 0) break;
      if (inflateReset(&zs) != Z_OK) break;
      continue;
    }
    if (rc == Z_BUF_ERROR && (zs.avail_in == 0 || zs.avail_out == chunk.size())) break;
  }
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::MalformedHeader, "corrupt or truncated gzip stream");
  return out;
}

std::vector<std::uint8_t> compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error(ErrorCode::IoFailure, "deflateInit2 failed");

  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::IoFailure, "gzip compression failed");
  return out;
}

}  // namespace ctprep::gzip
