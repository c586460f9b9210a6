#include "ctprep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "ctprep/error.hpp"

namespace ctprep {
namespace {

struct Edge {
  std::int32_t pred;
  std::int32_t gt;
  std::int64_t overlap;
};

class Matcher {
 public:
  Matcher(std::int32_t n_pred, std::int32_t n_gt, std::vector<Edge> edges)
      : adjacency_(static_cast<std::size_t>(n_gt) + 1),
        pred_of_gt_(static_cast<std::size_t>(n_gt) + 1, 0),
        gt_of_pred_(static_cast<std::size_t>(n_pred) + 1, 0),
        edges_(std::move(edges)) {
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
      return std::tie(b.overlap, a.gt, a.pred) < std::tie(a.overlap, b.gt, b.pred);
    });
    for (const auto& e : edges_) adjacency_[e.gt].push_back(e.pred);
  }

  void run() {
    for (const auto& e : edges_) {
      if (pred_of_gt_[e.gt] == 0 && gt_of_pred_[e.pred] == 0) link(e.pred, e.gt);
    }
    for (std::int32_t g = 1; g < static_cast<std::int32_t>(pred_of_gt_.size()); ++g) {
      if (pred_of_gt_[g] != 0) continue;
      std::vector<bool> visited(gt_of_pred_.size(), false);
      augment(g, visited);
    }
  }

  std::vector<std::pair<std::int32_t, std::int32_t>> pairs() const {
    std::vector<std::pair<std::int32_t, std::int32_t>> out;
    for (std::int32_t g = 1; g < static_cast<std::int32_t>(pred_of_gt_.size()); ++g) {
      if (pred_of_gt_[g] != 0) out.emplace_back(pred_of_gt_[g], g);
    }
    return out;
  }

 private:
  void link(std::int32_t p, std::int32_t g) {
    pred_of_gt_[g] = p;
    gt_of_pred_[p] = g;
  }

  bool augment(std::int32_t g, std::vector<bool>& visited) {
    for (std::int32_t p : adjacency_[g]) {
      if (visited[p]) continue;
      visited[p] = true;
      if (gt_of_pred_[p] == 0 || augment(gt_of_pred_[p], visited)) {
        link(p, g);
        return true;
      }
    }
    return false;
  }

  std::vector<std::vector<std::int32_t>> adjacency_;
  std::vector<std::int32_t> pred_of_gt_;
  std::vector<std::int32_t> gt_of_pred_;
  std::vector<Edge> edges_;
};

double f1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  const std::int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

}  // namespace

double dice(const BinaryMask3D& pred, const BinaryMask3D& gt) {
  require_compatible(pred.header, gt.header, "dice");
  const auto p = pred.count();
  const auto g = gt.count();
  if (p + g == 0) return 1.0;
  const auto both = static_cast<std::int64_t>((pred.bits && gt.bits).count());
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

double avd(const BinaryMask3D& pred, const BinaryMask3D& gt) {
  require_compatible(pred.header, gt.header, "avd");
  const double diff = static_cast<double>(pred.count() - gt.count());
  return std::abs(diff * pred.header.voxel_volume_mm3()) / 1000.0;
}

LesionMatch match_lesions(const LabelMap3D& pred, const LabelMap3D& gt, std::int64_t min_overlap) {
  if (pred.dims != gt.dims) throw Error(ErrorCode::GeometryMismatch, "label maps differ in dims");
  if (min_overlap < 1) throw Error(ErrorCode::InvalidConfig, "min_overlap must be >= 1");

  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> overlap;
  for (Eigen::Index i = 0; i < pred.labels.size(); ++i) {
    const std::int32_t p = pred.labels[i];
    const std::int32_t g = gt.labels[i];
    if (p != 0 && g != 0) ++overlap[{p, g}];
  }
  std::vector<Edge> edges;
  for (const auto& [key, count] : overlap) {
    if (count >= min_overlap) edges.push_back({key.first, key.second, count});
  }

  Matcher matcher(pred.component_count(), gt.component_count(), std::move(edges));
  matcher.run();

  LesionMatch m;
  m.pairs = matcher.pairs();
  m.tp = static_cast<std::int64_t>(m.pairs.size());
  m.fp = pred.component_count() - m.tp;
  m.fn = gt.component_count() - m.tp;
  m.f1 = f1_from_counts(m.tp, m.fp, m.fn);
  return m;
}

LesionMatch lesionwise_f1(const BinaryMask3D& pred, const BinaryMask3D& gt, const MetricsOptions& options) {
  require_compatible(pred.header, gt.header, "lesionwise_f1");
  return match_lesions(label_components(pred, options.connectivity), label_components(gt, options.connectivity),
                       options.min_overlap);
}

std::int64_t alcd(const BinaryMask3D& pred, const BinaryMask3D& gt, Connectivity connectivity) {
  require_compatible(pred.header, gt.header, "alcd");
  return std::abs(static_cast<std::int64_t>(count_components(pred, connectivity)) -
                  static_cast<std::int64_t>(count_components(gt, connectivity)));
}

MetricsReport evaluate(const BinaryMask3D& pred, const BinaryMask3D& gt, const MetricsOptions& options) {
  require_compatible(pred.header, gt.header, "evaluate");
  const LabelMap3D pred_labels = label_components(pred, options.connectivity);
  const LabelMap3D gt_labels = label_components(gt, options.connectivity);

  MetricsReport r;
  r.dice = dice(pred, gt);
  r.avd_ml = avd(pred, gt);
  r.f1_lesionwise = match_lesions(pred_labels, gt_labels, options.min_overlap).f1;
  r.n_pred_lesions = pred_labels.component_count();
  r.n_gt_lesions = gt_labels.component_count();
  r.alcd = std::abs(r.n_pred_lesions - r.n_gt_lesions);
  return r;
}

}  // namespace ctprep
