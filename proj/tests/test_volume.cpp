#include <cmath>
#include <limits>
#include <random>

#include "ctprep/error.hpp"
#include "ctprep/volume.hpp"
#include "doctest.h"
#include "support/synthetic.hpp"

using namespace ctprep;
using namespace ctprep::testing;

namespace {

Volume3D line(std::initializer_list<double> values) {
  const NiftiHeader h = make_header({static_cast<std::int64_t>(values.size()), 1, 1});
  Eigen::ArrayXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return make_volume(h, v);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("clip") {
  const Volume3D out = clip(line({-100, 50, 700}), 0, 400);
  CHECK(out.voxels[0] == 0);
  CHECK(out.voxels[1] == 50);
  CHECK(out.voxels[2] == 400);

  const Volume3D inside = line({1, 200, 399});
  CHECK((clip(inside, 0, 400).voxels == inside.voxels).all());

  CHECK(code_of([] { clip(line({1}), 5, 5); }) == ErrorCode::InvalidWindow);

  const Volume3D with_nan = clip(line({std::numeric_limits<double>::quiet_NaN(), 1000}), 0, 400);
  CHECK(std::isnan(with_nan.voxels[0]));
  CHECK(with_nan.voxels[1] == 400);
}

TEST_CASE("apply_mask") {
  const Volume3D five = constant_volume({4, 4, 4}, 5.0);
  BinaryMask3D all = empty_mask_like(five.header);
  all.bits.setConstant(true);
  CHECK((apply_mask(five, all).voxels == five.voxels).all());
  CHECK((apply_mask(five, empty_mask_like(five.header)).voxels == 0.0).all());

  BinaryMask3D checker = empty_mask_like(five.header);
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 4; ++x) checker.bits[checker.index(x, y, z)] = (x + y + z) % 2 == 0;
  const Volume3D out = apply_mask(five, checker);
  for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out.voxels[i] == (checker.bits[i] ? 5.0 : 0.0));

  const BinaryMask3D wrong = empty_mask_like(make_header({4, 4, 3}));
  CHECK(code_of([&] { apply_mask(five, wrong); }) == ErrorCode::GeometryMismatch);
}

TEST_CASE("subtract") {
  std::mt19937_64 rng(1);
  const Volume3D a = uniform_volume({3, 3, 3}, -50, 50, rng);
  CHECK((subtract(a, a).voxels == 0.0).all());

  const TubePhantom p = make_tube_phantom(32, 0);
  const Volume3D d = subtract(p.cta, p.ncct);
  for (Eigen::Index i = 0; i < d.size(); ++i) CHECK(d.voxels[i] == (p.tube.bits[i] ? 300.0 : 0.0));

  CHECK(code_of([&] { subtract(a, constant_volume({3, 3, 2}, 0)); }) == ErrorCode::GeometryMismatch);
}

TEST_CASE("band_suppress keeps values on the thresholds") {
  const Volume3D out = band_suppress(line({10, 60, 450, 50, 400}), 50, 400);
  CHECK(out.voxels[0] == 0);
  CHECK(out.voxels[1] == 60);
  CHECK(out.voxels[2] == 0);
  CHECK(out.voxels[3] == 50);
  CHECK(out.voxels[4] == 400);

  const Volume3D mid = line({51, 100, 399});
  CHECK((band_suppress(mid, 50, 400).voxels == mid.voxels).all());
  CHECK((band_suppress(line({1, 2, 49}), 50, 400).voxels == 0.0).all());
  CHECK(code_of([] { band_suppress(line({1}), 400, 50); }) == ErrorCode::InvalidWindow);
}

TEST_CASE("nonzero_mask excludes zeros and NaN") {
  CHECK(nonzero_mask(constant_volume({3, 3, 3}, 0.0)).count() == 0);
  Volume3D v = constant_volume({3, 3, 3}, 0.0);
  v.voxels[13] = 120;
  const BinaryMask3D m = nonzero_mask(v);
  CHECK(m.count() == 1);
  CHECK(m.bits[13]);
  v.voxels[5] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(nonzero_mask(v).bits[5]);
}

TEST_CASE("volume_core properties on random inputs") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const Dims dims{5, 4, 3};
    const Volume3D a = uniform_volume(dims, -500, 900, rng);
    const Volume3D b = uniform_volume(dims, -500, 900, rng);
    const BinaryMask3D m = random_mask(dims, 0.4, rng);

    const Volume3D c = clip(a, 0, 400);
    CHECK((clip(c, 0, 400).voxels == c.voxels).all());

    const Volume3D am = apply_mask(a, m);
    CHECK((apply_mask(am, m).voxels == am.voxels).all());
    CHECK((apply_mask(subtract(a, b), m).voxels == subtract(apply_mask(a, m), apply_mask(b, m)).voxels).all());

    const Volume3D s = band_suppress(a, 50, 400);
    CHECK((s.voxels == 0.0 || (s.voxels >= 50.0 && s.voxels <= 400.0)).all());

    CHECK(mask_subset(nonzero_mask(am), m));
  }
}
