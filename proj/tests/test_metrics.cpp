#include <random>

#include "ctprep/error.hpp"
#include "ctprep/metrics.hpp"
#include "doctest.h"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace ctprep;
using namespace ctprep::testing;

namespace {

// 1-D masks on a 20-voxel line: each pair is a half-open [lo, hi) run.
BinaryMask3D runs(std::initializer_list<std::pair<int, int>> spans) {
  BinaryMask3D m = empty_mask_like(make_header({20, 1, 1}));
  for (auto [lo, hi] : spans)
    for (int x = lo; x < hi; ++x) m.bits[x] = true;
  return m;
}

std::vector<std::int32_t> labels_of(const LabelMap3D& lm) { return {lm.labels.begin(), lm.labels.end()}; }

BinaryMask3D shifted(const BinaryMask3D& m, const NiftiHeader& target, Dims offset) {
  BinaryMask3D out = empty_mask_like(target);
  const Dims d = m.dims();
  for (std::int64_t z = 0; z < d[2]; ++z)
    for (std::int64_t y = 0; y < d[1]; ++y)
      for (std::int64_t x = 0; x < d[0]; ++x)
        if (m.bits[m.index(x, y, z)]) out.bits[out.index(x + offset[0], y + offset[1], z + offset[2])] = true;
  return out;
}

}  // namespace

TEST_CASE("dice examples") {
  const NiftiHeader h = make_header({10, 10, 10});
  const BinaryMask3D a = box_mask(h, {0, 0, 0}, {10, 10, 1});  // 100 voxels
  const BinaryMask3D b = box_mask(h, {5, 0, 0}, {10, 10, 2});  // 100 voxels, 50 shared with a
  CHECK(dice(a, a) == 1.0);
  CHECK(dice(a, b) == doctest::Approx(0.5));
  CHECK(dice(a, box_mask(h, {0, 0, 5}, {10, 10, 6})) == 0.0);
  CHECK(dice(empty_mask_like(h), empty_mask_like(h)) == 1.0);
  CHECK_THROWS_AS(dice(a, empty_mask_like(make_header({10, 10, 9}))), Error);
}

TEST_CASE("avd examples") {
  const NiftiHeader unit = make_header({20, 10, 10});
  CHECK(avd(box_mask(unit, {0, 0, 0}, {20, 10, 10}), box_mask(unit, {0, 0, 0}, {10, 10, 10})) == doctest::Approx(1.0));
  CHECK(avd(box_mask(unit, {0, 0, 0}, {5, 5, 5}), box_mask(unit, {5, 5, 5}, {10, 10, 10})) == 0.0);

  const NiftiHeader coarse = make_header({10, 10, 10}, Eigen::Vector3d(2, 2, 2));
  const BinaryMask3D gt = box_mask(coarse, {0, 0, 0}, {10, 10, 10});
  CHECK(avd(empty_mask_like(coarse), gt) == doctest::Approx(8.0));
  CHECK(avd(gt, empty_mask_like(coarse)) == doctest::Approx(8.0));
}

TEST_CASE("lesion-wise F1 examples") {
  const BinaryMask3D gt_one = runs({{2, 6}});
  CHECK(lesionwise_f1(gt_one, gt_one).f1 == 1.0);
  CHECK(lesionwise_f1(runs({}), gt_one).f1 == 0.0);
  CHECK(lesionwise_f1(runs({}), runs({})).f1 == 1.0);

  // Two predictions on the first GT lesion, one prediction on nothing.
  const LesionMatch m = lesionwise_f1(runs({{0, 2}, {3, 5}, {14, 16}}), runs({{0, 6}, {10, 12}}));
  CHECK(m.tp == 1);
  CHECK(m.fp == 2);
  CHECK(m.fn == 1);
  CHECK(m.f1 == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("matching reaches maximum cardinality where greedy alone would not") {
  // P1 = [3,9) overlaps G1 = [0,6) by 3 and G2 = [8,10) by 1; P2 = [0,2)
  // overlaps only G1, by 2. Taking P1-G1 first strands P2 and G2.
  const BinaryMask3D pred = runs({{0, 2}, {3, 9}});
  const BinaryMask3D gt = runs({{0, 6}, {8, 10}});
  const LesionMatch m = lesionwise_f1(pred, gt, {.connectivity = Connectivity::Six});
  CHECK(m.tp == 2);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
  const LabelMap3D pl = label_components(pred, Connectivity::Six), gl = label_components(gt, Connectivity::Six);
  CHECK(exhaustive_max_matching(labels_of(pl), pl.component_count(), labels_of(gl), gl.component_count(), 1) == 2);
}

TEST_CASE("min_overlap raises the detection bar") {
  const BinaryMask3D pred = runs({{4, 8}});
  const BinaryMask3D gt = runs({{0, 5}});
  CHECK(lesionwise_f1(pred, gt).tp == 1);
  CHECK(lesionwise_f1(pred, gt, {.min_overlap = 2}).tp == 0);
  CHECK_THROWS_AS(lesionwise_f1(pred, gt, {.min_overlap = 0}), Error);
}

TEST_CASE("alcd examples") {
  const BinaryMask3D gt = runs({{0, 2}});
  CHECK(alcd(gt, gt) == 0);
  CHECK(alcd(runs({{0, 2}, {4, 5}, {8, 9}}), gt) == 2);
  CHECK(alcd(runs({}), runs({{0, 1}, {3, 4}, {6, 7}, {9, 12}})) == 4);
}

TEST_CASE("evaluate examples") {
  const BinaryMask3D gt = runs({{0, 3}, {6, 8}});
  const MetricsReport same = evaluate(gt, gt);
  CHECK(same.dice == 1.0);
  CHECK(same.avd_ml == 0.0);
  CHECK(same.f1_lesionwise == 1.0);
  CHECK(same.alcd == 0);

  const MetricsReport none = evaluate(runs({}), gt);
  CHECK(none.dice == 0.0);
  CHECK(none.f1_lesionwise == 0.0);
  CHECK(none.alcd == 2);
  CHECK(none.n_gt_lesions == 2);
}

TEST_CASE("TP/FP/FN match exhaustive matching on small random masks") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 150; ++trial) {
    const double density = 0.03 + 0.04 * (trial % 4);
    const BinaryMask3D pred = random_mask({8, 8, 8}, density, rng);
    const BinaryMask3D gt = random_mask({8, 8, 8}, density, rng);
    const LabelMap3D pl = label_components(pred, Connectivity::Six);
    const LabelMap3D gl = label_components(gt, Connectivity::Six);
    if (pl.component_count() > 60 || gl.component_count() > 60) continue;
    const LesionMatch m = match_lesions(pl, gl);
    const auto best = exhaustive_max_matching(labels_of(pl), pl.component_count(), labels_of(gl), gl.component_count(), 1);
    CHECK(m.tp == best);
    CHECK(m.fp == pl.component_count() - best);
    CHECK(m.fn == gl.component_count() - best);
  }
}

TEST_CASE("metric properties on random pairs") {
  std::mt19937_64 rng(505);
  const NiftiHeader big = make_header({14, 14, 14});
  for (int trial = 0; trial < 40; ++trial) {
    const BinaryMask3D p = random_mask({10, 10, 10}, 0.15, rng);
    const BinaryMask3D g = random_mask({10, 10, 10}, 0.15, rng);

    CHECK(dice(p, g) == dice(g, p));
    CHECK(avd(p, g) == avd(g, p));
    if (p.count() > 0) CHECK(dice(p, p) == 1.0);

    const LesionMatch m = lesionwise_f1(p, g);
    CHECK(m.f1 >= 0.0);
    CHECK(m.f1 <= 1.0);

    // Same offset applied to both masks.
    const Dims off{static_cast<std::int64_t>(trial % 4), 2, static_cast<std::int64_t>(trial % 3)};
    const MetricsReport a = evaluate(p, g);
    const MetricsReport b = evaluate(shifted(p, big, off), shifted(g, big, off));
    CHECK(a.dice == b.dice);
    CHECK(a.avd_ml == b.avd_ml);
    CHECK(a.f1_lesionwise == b.f1_lesionwise);
    CHECK(a.alcd == b.alcd);
  }
}

TEST_CASE("an extra isolated prediction never increases F1") {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask3D p = random_mask({10, 10, 10}, 0.1, rng);
    BinaryMask3D g = random_mask({10, 10, 10}, 0.1, rng);
    // Clear a corner and give the prediction one more component there.
    const BinaryMask3D corner = box_mask(p.header, {7, 7, 7}, {10, 10, 10});
    p.bits = p.bits && !corner.bits;
    g.bits = g.bits && !corner.bits;
    BinaryMask3D extra = p;
    extra.bits[extra.index(9, 9, 9)] = true;
    CHECK(lesionwise_f1(extra, g).f1 <= lesionwise_f1(p, g).f1);
  }
}

TEST_CASE("evaluate agrees with the individual metrics") {
  std::mt19937_64 rng(707);
  for (int trial = 0; trial < 30; ++trial) {
    const BinaryMask3D p = random_mask({16, 16, 16}, 0.08, rng);
    const BinaryMask3D g = random_mask({16, 16, 16}, 0.08, rng);
    const MetricsReport r = evaluate(p, g);
    CHECK(r.dice == dice(p, g));
    CHECK(r.avd_ml == avd(p, g));
    CHECK(r.f1_lesionwise == lesionwise_f1(p, g).f1);
    CHECK(r.alcd == alcd(p, g));
  }
}
