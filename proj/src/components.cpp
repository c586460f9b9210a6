#include "ctprep/components.hpp"

#include <array>
#include <numeric>
#include <string>

#include "ctprep/error.hpp"

namespace ctprep {
namespace {

struct Offset {
  int dx, dy, dz;
};

// Neighbours already visited by an x-fastest raster scan: exactly half of the
// full neighbourhood, those with (dz, dy, dx) lexicographically negative.
std::vector<Offset> backward_neighbours(Connectivity c) {
  std::vector<Offset> out;
  for (int dz = -1; dz <= 0; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (c == Connectivity::Six && manhattan > 1) continue;
        if (c == Connectivity::Eighteen && manhattan > 2) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

class DisjointSet {
 public:
  std::int32_t make() {
    parent_.push_back(static_cast<std::int32_t>(parent_.size()));
    return parent_.back();
  }

  std::int32_t find(std::int32_t x) {
    std::int32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::int32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Smaller id becomes the root; keeps roots stable and results reproducible.
    if (a < b) parent_[b] = a;
    else parent_[a] = b;
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace

Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 6: return Connectivity::Six;
    case 18: return Connectivity::Eighteen;
    case 26: return Connectivity::TwentySix;
    default: throw Error(ErrorCode::InvalidConfig, "connectivity must be 6, 18 or 26, got " + std::to_string(n));
  }
}

LabelMap3D label_components(const BinaryMask3D& mask, Connectivity connectivity) {
  const auto [nx, ny, nz] = mask.dims();
  LabelMap3D lm;
  lm.dims = mask.dims();
  lm.connectivity = connectivity;
  lm.labels = Eigen::ArrayXi::Zero(mask.size());

  const auto neighbours = backward_neighbours(connectivity);
  DisjointSet sets;
  sets.make();  // provisional label 0 is background

  // First pass: provisional labels and equivalences.
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        const auto idx = mask.index(x, y, z);
        if (!mask.bits[idx]) continue;
        std::int32_t current = 0;
        for (const auto& o : neighbours) {
          const std::int64_t xx = x + o.dx, yy = y + o.dy, zz = z + o.dz;
          if (xx < 0 || yy < 0 || zz < 0 || xx >= nx || yy >= ny) continue;
          const std::int32_t other = lm.labels[mask.index(xx, yy, zz)];
          if (other == 0) continue;
          if (current == 0) current = other;
          else sets.unite(current, other);
        }
        lm.labels[idx] = current != 0 ? current : sets.make();
      }
    }
  }

  // Second pass: resolve to roots and renumber densely in scan order.
  std::vector<std::int32_t> final_label;
  for (Eigen::Index i = 0; i < lm.labels.size(); ++i) {
    const std::int32_t provisional = lm.labels[i];
    if (provisional == 0) continue;
    const std::int32_t root = sets.find(provisional);
    if (static_cast<std::size_t>(root) >= final_label.size()) final_label.resize(root + 1, 0);
    if (final_label[root] == 0) {
      lm.component_sizes.push_back(0);
      final_label[root] = static_cast<std::int32_t>(lm.component_sizes.size());
    }
    const std::int32_t label = final_label[root];
    lm.labels[i] = label;
    ++lm.component_sizes[label - 1];
  }
  return lm;
}

BinaryMask3D filter_by_size(const LabelMap3D& lm, std::int64_t s_min, const NiftiHeader& geometry) {
  if (s_min < 1) throw Error(ErrorCode::InvalidConfig, "s_min must be >= 1");
  if (geometry.dims != lm.dims) throw Error(ErrorCode::GeometryMismatch, "label map dims differ from geometry");
  std::vector<bool> keep(lm.component_sizes.size() + 1, false);
  for (std::size_t k = 0; k < lm.component_sizes.size(); ++k) keep[k + 1] = lm.component_sizes[k] >= s_min;

  MaskArray bits(lm.labels.size());
  for (Eigen::Index i = 0; i < lm.labels.size(); ++i) bits[i] = keep[lm.labels[i]];
  return BinaryMask3D{geometry, std::move(bits)};
}

std::int32_t count_components(const BinaryMask3D& mask, Connectivity connectivity) {
  return label_components(mask, connectivity).component_count();
}

}  // namespace ctprep
