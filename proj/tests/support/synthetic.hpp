#pragma once

// Synthetic volumes and datasets for tests. Everything is seeded so runs
// are reproducible.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ctprep/nifti.hpp"
#include "ctprep/pipeline.hpp"
#include "ctprep/volume.hpp"

namespace ctprep::testing {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Volume3D constant_volume(const Dims& dims, double value, Modality m = Modality::OTHER,
                         const Eigen::Vector3d& spacing = Eigen::Vector3d::Ones());
Volume3D uniform_volume(const Dims& dims, double lo, double hi, std::mt19937_64& rng, Modality m = Modality::OTHER);
BinaryMask3D random_mask(const Dims& dims, double density, std::mt19937_64& rng);
BinaryMask3D box_mask(const NiftiHeader& h, const Dims& lo, const Dims& hi_exclusive);

/// Tube phantom for vessel extraction: NCCT is -1000 HU air with a 40 HU
/// brain box; CTA adds +300 HU along a radius-3 tube running in x through
/// the brain, optionally plus isolated 10-voxel +200 HU speckles.
struct TubePhantom {
  Volume3D ncct;
  Volume3D cta;
  BinaryMask3D brain;
  BinaryMask3D tube;
  BinaryMask3D speckles;
};
TubePhantom make_tube_phantom(std::int64_t n, int speckle_count);

/// Writes one complete synthetic subject (six channels, brain mask, lesion)
/// as .nii.gz and returns its manifest entry.
SubjectManifest write_synthetic_subject(const fs::path& dir, const std::string& id, const Dims& dims,
                                        std::uint64_t seed);

}  // namespace ctprep::testing
