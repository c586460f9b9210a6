#include <random>

#include "ctprep/components.hpp"
#include "doctest.h"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace ctprep;
using namespace ctprep::testing;

namespace {

std::vector<std::int32_t> as_vector(const LabelMap3D& lm) { return {lm.labels.begin(), lm.labels.end()}; }

BinaryMask3D two_voxels(std::array<std::int64_t, 3> a, std::array<std::int64_t, 3> b) {
  BinaryMask3D m = empty_mask_like(make_header({3, 3, 3}));
  m.bits[m.index(a[0], a[1], a[2])] = true;
  m.bits[m.index(b[0], b[1], b[2])] = true;
  return m;
}

}  // namespace

TEST_CASE("empty mask has no components") {
  const LabelMap3D lm = label_components(empty_mask_like(make_header({4, 4, 4})));
  CHECK(lm.component_count() == 0);
  CHECK((lm.labels == 0).all());
}

TEST_CASE("adjacency depends on connectivity") {
  const BinaryMask3D corner = two_voxels({0, 0, 0}, {1, 1, 1});
  CHECK(count_components(corner, Connectivity::TwentySix) == 1);
  CHECK(count_components(corner, Connectivity::Eighteen) == 2);
  CHECK(count_components(corner, Connectivity::Six) == 2);

  const BinaryMask3D edge = two_voxels({0, 0, 0}, {1, 1, 0});
  CHECK(count_components(edge, Connectivity::Eighteen) == 1);
  CHECK(count_components(edge, Connectivity::Six) == 2);

  const BinaryMask3D face = two_voxels({0, 0, 0}, {0, 0, 1});
  CHECK(count_components(face, Connectivity::Six) == 1);
}

TEST_CASE("labels are dense and ordered by first voxel in scan order") {
  BinaryMask3D m = empty_mask_like(make_header({6, 1, 1}));
  m.bits << false, true, false, true, true, false;
  const LabelMap3D lm = label_components(m, Connectivity::Six);
  CHECK(lm.component_count() == 2);
  CHECK(lm.labels[1] == 1);
  CHECK(lm.labels[3] == 2);
  CHECK(lm.labels[4] == 2);
  CHECK(lm.size_of(1) == 1);
  CHECK(lm.size_of(2) == 2);
}

TEST_CASE("a U-shaped component merges late and still gets one label") {
  // Two prongs joined only on the last row: the raster scan sees two
  // provisional labels before the union.
  BinaryMask3D m = empty_mask_like(make_header({3, 3, 1}));
  for (std::int64_t y = 0; y < 3; ++y) {
    m.bits[m.index(0, y, 0)] = true;
    m.bits[m.index(2, y, 0)] = true;
  }
  m.bits[m.index(1, 2, 0)] = true;
  const LabelMap3D lm = label_components(m, Connectivity::Six);
  CHECK(lm.component_count() == 1);
  CHECK(lm.size_of(1) == 7);
}

TEST_CASE("count_components on cubes") {
  const NiftiHeader h = make_header({10, 10, 10});
  CHECK(count_components(box_mask(h, {2, 2, 2}, {6, 6, 6})) == 1);
  const BinaryMask3D two = mask_or(box_mask(h, {0, 0, 0}, {3, 3, 3}), box_mask(h, {5, 5, 5}, {8, 8, 8}));
  CHECK(count_components(two) == 2);
}

TEST_CASE("filter_by_size keeps components at or above the floor") {
  // Rows of 30, 25 and 24 voxels, separated by empty rows.
  BinaryMask3D m = empty_mask_like(make_header({30, 5, 1}));
  for (std::int64_t x = 0; x < 30; ++x) m.bits[m.index(x, 0, 0)] = true;
  for (std::int64_t x = 0; x < 25; ++x) m.bits[m.index(x, 2, 0)] = true;
  for (std::int64_t x = 0; x < 24; ++x) m.bits[m.index(x, 4, 0)] = true;
  const LabelMap3D lm = label_components(m);
  REQUIRE(lm.component_count() == 3);

  const BinaryMask3D kept = filter_by_size(lm, 25, m.header);
  CHECK(kept.count() == 55);
  CHECK_FALSE(kept.bits[m.index(0, 4, 0)]);

  CHECK((filter_by_size(lm, 1, m.header).bits == m.bits).all());
  CHECK(filter_by_size(lm, 31, m.header).count() == 0);
}

TEST_CASE("labeling matches the flood-fill oracle on random masks") {
  std::mt19937_64 rng(99);
  for (int conn : {6, 18, 26}) {
    for (int seed = 0; seed < 30; ++seed) {
      const BinaryMask3D m = random_mask({12, 12, 12}, 0.3, rng);
      const LabelMap3D lm = label_components(m, connectivity_from_int(conn));
      std::int32_t k = 0;
      const auto oracle = flood_fill_labels(m, conn, k);
      CHECK(lm.component_count() == k);
      CHECK(same_partition(as_vector(lm), oracle));
    }
  }
}

TEST_CASE("label map invariants") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask3D m = random_mask({9, 7, 5}, 0.35, rng);
    const LabelMap3D lm = label_components(m);
    std::int64_t total = 0;
    for (auto s : lm.component_sizes) total += s;
    CHECK(total == m.count());
    CHECK(((lm.labels != 0) == m.bits).all());
    CHECK(lm.labels.maxCoeff() == lm.component_count());

    // Monotone in s_min.
    BinaryMask3D prev = filter_by_size(lm, 1, m.header);
    for (std::int64_t s = 2; s < 12; ++s) {
      const BinaryMask3D next = filter_by_size(lm, s, m.header);
      CHECK(mask_subset(next, prev));
      prev = next;
    }
    // Deterministic.
    CHECK((label_components(m).labels == lm.labels).all());
  }
}
