#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vsynth/volume.hpp"

namespace vsynth {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Voxelwise counts of pred vs truth (both binarized as value > 0), restricted
/// to mask > 0 when a mask is given.
ConfusionCounts confusion(const LabelVolume& pred, const LabelVolume& truth,
                          const LabelVolume* mask = nullptr);

// Metrics return nullopt when the denominator vanishes.
std::optional<double> dsc(const ConfusionCounts& c);
std::optional<double> fpr(const ConfusionCounts& c);
std::optional<double> fnr(const ConfusionCounts& c);

/// Chance-corrected agreement; counts are read as rater A = pred, rater B = truth.
std::optional<double> cohens_kappa(const ConfusionCounts& c);
std::optional<double> cohens_kappa(const LabelVolume& a, const LabelVolume& b,
                                   const LabelVolume* mask = nullptr);

/// Soft Dice loss 1 - (2 y.p + eps) / (y.y + p.p + eps). eps defaults to the
/// voxel count. Throws DomainError for probabilities outside [0, 1].
double dice_loss(const IntensityVolume& pred_prob, const LabelVolume& truth,
                 std::optional<double> epsilon = std::nullopt);

struct MetricsReport {
  ConfusionCounts counts;
  std::optional<double> dsc;
  std::optional<double> fpr;
  std::optional<double> fnr;
  std::optional<double> kappa;
};

MetricsReport evaluate(const LabelVolume& pred, const LabelVolume& truth, const LabelVolume* mask = nullptr,
                       bool with_kappa = false);

enum class Connectivity { Face = 6, Edge = 18, Corner = 26 };

/// Parses 6, 18 or 26.
std::optional<Connectivity> connectivity_from_int(int n);

struct ComponentLabeling {
  LabelVolume labels;               // 0 background, 1 = largest component
  std::vector<std::uint64_t> sizes;  // sizes[i] is the size of component i + 1
};

/// Labels foreground components; ids are ordered by size (descending), ties
/// by first voxel in raster order. Two-pass union-find.
ComponentLabeling connected_components(const LabelVolume& mask, Connectivity connectivity = Connectivity::Corner);

/// Binary mask of the k largest components.
LabelVolume largest_components(const ComponentLabeling& cc, std::size_t k);

}  // namespace vsynth
