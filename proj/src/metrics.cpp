#include "vsynth/metrics.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "vsynth/errors.hpp"

namespace vsynth {

namespace {

std::optional<double> ratio(double num, double den) {
  if (den == 0) return std::nullopt;
  return num / den;
}

class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;  // smaller id is the representative
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

// Offsets to already-visited neighbours in raster order (z, y, x ascending).
std::vector<std::array<int, 3>> backward_offsets(Connectivity c) {
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 0; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (c == Connectivity::Face && manhattan > 1) continue;
        if (c == Connectivity::Edge && manhattan > 2) continue;
        out.push_back({dx, dy, dz});
      }
    }
  }
  return out;
}

}  // namespace

ConfusionCounts confusion(const LabelVolume& pred, const LabelVolume& truth, const LabelVolume* mask) {
  require_same_shape(pred, truth, "confusion");
  if (mask != nullptr) require_same_shape(pred, *mask, "confusion mask");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask != nullptr && mask->voxels[i] <= 0) continue;
    const bool p = pred.voxels[i] > 0;
    const bool t = truth.voxels[i] > 0;
    if (p && t) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (t) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

std::optional<double> dsc(const ConfusionCounts& c) {
  return ratio(2.0 * static_cast<double>(c.tp), 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp + c.fn));
}

std::optional<double> fpr(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.fp), static_cast<double>(c.tn + c.fp));
}

std::optional<double> fnr(const ConfusionCounts& c) {
  return ratio(static_cast<double>(c.fn), static_cast<double>(c.tp + c.fn));
}

std::optional<double> cohens_kappa(const ConfusionCounts& c) {
  const auto n = static_cast<double>(c.total());
  if (n == 0) return std::nullopt;
  const double p_o = static_cast<double>(c.tp + c.tn) / n;
  const double a_pos = static_cast<double>(c.tp + c.fp) / n;
  const double b_pos = static_cast<double>(c.tp + c.fn) / n;
  const double p_e = a_pos * b_pos + (1.0 - a_pos) * (1.0 - b_pos);
  if (p_e >= 1.0) return std::nullopt;
  return (p_o - p_e) / (1.0 - p_e);
}

std::optional<double> cohens_kappa(const LabelVolume& a, const LabelVolume& b, const LabelVolume* mask) {
  return cohens_kappa(confusion(a, b, mask));
}

double dice_loss(const IntensityVolume& pred_prob, const LabelVolume& truth, std::optional<double> epsilon) {
  require_same_shape(pred_prob, truth, "dice_loss");
  const double eps = epsilon.value_or(static_cast<double>(pred_prob.size()));
  double yp = 0;
  double yy = 0;
  double pp = 0;
  for (std::size_t i = 0; i < pred_prob.size(); ++i) {
    const double p = pred_prob.voxels[i];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("dice_loss: probability outside [0, 1]");
    const double y = truth.voxels[i] > 0 ? 1.0 : 0.0;
    yp += y * p;
    yy += y;
    pp += p * p;
  }
  const double den = yy + pp + eps;
  if (den == 0) return 0.0;  // only reachable with eps = 0 and empty inputs
  return 1.0 - (2.0 * yp + eps) / den;
}

MetricsReport evaluate(const LabelVolume& pred, const LabelVolume& truth, const LabelVolume* mask, bool with_kappa) {
  MetricsReport r;
  r.counts = confusion(pred, truth, mask);
  r.dsc = dsc(r.counts);
  r.fpr = fpr(r.counts);
  r.fnr = fnr(r.counts);
  if (with_kappa) r.kappa = cohens_kappa(r.counts);
  return r;
}

std::optional<Connectivity> connectivity_from_int(int n) {
  switch (n) {
    case 6:
      return Connectivity::Face;
    case 18:
      return Connectivity::Edge;
    case 26:
      return Connectivity::Corner;
    default:
      return std::nullopt;
  }
}

ComponentLabeling connected_components(const LabelVolume& mask, Connectivity connectivity) {
  const auto [nx, ny, nz] = mask.shape;
  const auto offsets = backward_offsets(connectivity);
  std::vector<std::uint32_t> provisional(mask.size(), 0);  // 0 = background, else set index + 1
  DisjointSets sets;

  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t idx = mask.index(x, y, z);
        if (mask.voxels[idx] <= 0) continue;
        std::uint32_t label = 0;
        for (const auto& [dx, dy, dz] : offsets) {
          const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
          const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
          const auto zz = static_cast<std::ptrdiff_t>(z) + dz;
          if (xx < 0 || yy < 0 || zz < 0 || xx >= static_cast<std::ptrdiff_t>(nx) ||
              yy >= static_cast<std::ptrdiff_t>(ny)) {
            continue;
          }
          const std::uint32_t n =
              provisional[mask.index(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy), static_cast<std::size_t>(zz))];
          if (n == 0) continue;
          if (label == 0) {
            label = n;
          } else if (n != label) {
            sets.unite(label - 1, n - 1);
          }
        }
        if (label == 0) label = sets.make() + 1;
        provisional[idx] = label;
      }
    }
  }

  // Resolve roots; roots are numbered in order of first appearance because
  // unite keeps the smaller (earlier) id as representative.
  std::vector<std::uint32_t> root_slot(sets.size(), UINT32_MAX);
  std::vector<std::uint64_t> sizes;
  for (std::uint32_t& v : provisional) {
    if (v == 0) continue;
    const std::uint32_t root = sets.find(v - 1);
    if (root_slot[root] == UINT32_MAX) {
      root_slot[root] = static_cast<std::uint32_t>(sizes.size());
      sizes.push_back(0);
    }
    v = root_slot[root];
    ++sizes[v];
  }

  std::vector<std::uint32_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return sizes[a] > sizes[b]; });
  std::vector<std::int32_t> rank(sizes.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = static_cast<std::int32_t>(r + 1);

  ComponentLabeling out;
  out.labels = LabelVolume(mask.shape, mask.voxel_size_um, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.voxels[i] > 0) out.labels.voxels[i] = rank[provisional[i]];
  }
  out.sizes.resize(sizes.size());
  for (std::size_t r = 0; r < order.size(); ++r) out.sizes[r] = sizes[order[r]];
  return out;
}

LabelVolume largest_components(const ComponentLabeling& cc, std::size_t k) {
  LabelVolume out(cc.labels.shape, cc.labels.voxel_size_um, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int32_t l = cc.labels.voxels[i];
    out.voxels[i] = (l > 0 && static_cast<std::size_t>(l) <= k) ? 1 : 0;
  }
  return out;
}

}  // namespace vsynth
