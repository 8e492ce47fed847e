#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <vector>

#include "vsynth/metrics.hpp"
#include "vsynth/sampling.hpp"
#include "vsynth/vesselsynth.hpp"

using namespace vsynth;

namespace {

LabelVolume from(std::vector<std::int32_t> v) {
  LabelVolume out({v.size(), 1, 1}, 20.0, 0);
  out.voxels = std::move(v);
  return out;
}

LabelVolume random_mask(Rng& rng, Shape3 shape, double p) {
  LabelVolume v(shape, 20.0, 0);
  for (std::int32_t& x : v.voxels) x = rng.uniform01() < p ? 1 : 0;
  return v;
}

// Breadth-first flood fill; returns component id per voxel (0 background)
// in order of first appearance.
std::vector<int> flood_fill(const LabelVolume& m, int connectivity) {
  const auto [nx, ny, nz] = m.shape;
  std::vector<int> comp(m.size(), 0);
  int next = 0;
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (m.voxels[start] <= 0 || comp[start] != 0) continue;
    comp[start] = ++next;
    std::queue<std::size_t> q;
    q.push(start);
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop();
      const long x = static_cast<long>(i % nx);
      const long y = static_cast<long>((i / nx) % ny);
      const long z = static_cast<long>(i / (nx * ny));
      for (long dz = -1; dz <= 1; ++dz) {
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            const int order = std::abs(dx) + std::abs(dy) + std::abs(dz);
            if (order == 0) continue;
            if (connectivity == 6 && order > 1) continue;
            if (connectivity == 18 && order > 2) continue;
            const long X = x + dx;
            const long Y = y + dy;
            const long Z = z + dz;
            if (X < 0 || Y < 0 || Z < 0 || X >= static_cast<long>(nx) || Y >= static_cast<long>(ny) ||
                Z >= static_cast<long>(nz)) {
              continue;
            }
            const std::size_t j = m.index(static_cast<std::size_t>(X), static_cast<std::size_t>(Y), static_cast<std::size_t>(Z));
            if (m.voxels[j] > 0 && comp[j] == 0) {
              comp[j] = next;
              q.push(j);
            }
          }
        }
      }
    }
  }
  return comp;
}

}  // namespace

TEST_CASE("confusion counts on the four-voxel example") {
  const ConfusionCounts c = confusion(from({1, 1, 0, 0}), from({1, 0, 1, 0}));
  CHECK(c == ConfusionCounts{1, 1, 1, 1});
  CHECK(*dsc(c) == 0.5);
  CHECK(*fpr(c) == 0.5);
  CHECK(*fnr(c) == 0.5);
  // A mask that hides the mismatches.
  const LabelVolume mask = from({1, 0, 0, 1});
  const ConfusionCounts m = confusion(from({1, 1, 0, 0}), from({1, 0, 1, 0}), &mask);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
  CHECK(m.total() == 2);
  CHECK_THROWS_AS(confusion(from({1, 0}), from({1, 0, 0})), DimensionError);
  CHECK_THROWS_AS(confusion(from({1, 0}), from({1, 0}), &mask), DimensionError);
}

TEST_CASE("identical and disjoint masks") {
  const ConfusionCounts same = confusion(from({1, 0, 3, 0}), from({2, 0, 1, 0}));
  CHECK(same.fp == 0);
  CHECK(same.fn == 0);
  CHECK(*dsc(same) == 1.0);
  CHECK(*fpr(same) == 0.0);
  CHECK(*fnr(same) == 0.0);
  CHECK(*dsc(confusion(from({1, 1, 0, 0}), from({0, 0, 1, 1}))) == 0.0);
}

TEST_CASE("undefined metrics are reported as such") {
  const ConfusionCounts empty = confusion(from({0, 0, 0}), from({0, 0, 0}));
  CHECK_FALSE(dsc(empty).has_value());
  CHECK_FALSE(fnr(empty).has_value());
  CHECK(fpr(empty).has_value());
  CHECK_FALSE(cohens_kappa(empty).has_value());
  const ConfusionCounts full = confusion(from({1, 1}), from({1, 1}));
  CHECK_FALSE(fpr(full).has_value());
  CHECK_FALSE(cohens_kappa(full).has_value());
}

TEST_CASE("kappa examples") {
  CHECK(*cohens_kappa(ConfusionCounts{40, 40, 10, 10}) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(*cohens_kappa(from({1, 0, 1, 0}), from({1, 0, 1, 0})) == doctest::Approx(1.0));
  CHECK(*cohens_kappa(from({1, 0, 1, 0}), from({0, 1, 0, 1})) == doctest::Approx(-1.0));
}

TEST_CASE("metrics match exhaustive counting on random volumes") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const LabelVolume a = random_mask(rng, {8, 8, 8}, rng.uniform01());
    const LabelVolume b = random_mask(rng, {8, 8, 8}, rng.uniform01());
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool p = a.voxels[i] > 0;
      const bool t = b.voxels[i] > 0;
      tp += p && t;
      tn += !p && !t;
      fp += p && !t;
      fn += !p && t;
    }
    const MetricsReport r = evaluate(a, b, nullptr, true);
    CHECK(r.counts == ConfusionCounts{tp, tn, fp, fn});
    const double n = 512.0;
    if (2 * tp + fp + fn > 0) CHECK(*r.dsc == 2.0 * tp / (2.0 * tp + fp + fn));
    if (fp + tn > 0) CHECK(*r.fpr == static_cast<double>(fp) / (fp + tn));
    if (fn + tp > 0) CHECK(*r.fnr == static_cast<double>(fn) / (fn + tp));
    const double po = (tp + tn) / n;
    const double pe = ((tp + fp) / n) * ((tp + fn) / n) + ((tn + fn) / n) * ((tn + fp) / n);
    if (pe < 1) CHECK(*r.kappa == doctest::Approx((po - pe) / (1 - pe)).epsilon(1e-12));
    CHECK(*r.dsc >= 0);
    CHECK(*r.dsc <= 1);
    CHECK(*r.kappa >= -1);
    CHECK(*r.kappa <= 1);

    // Symmetry: swapping the arguments swaps the error types.
    const MetricsReport s = evaluate(b, a, nullptr, true);
    CHECK(*s.dsc == *r.dsc);
    CHECK(*s.kappa == doctest::Approx(*r.kappa).epsilon(1e-12));
    CHECK(s.counts.fp == r.counts.fn);
    // FPR of (pred, truth) equals FNR on the complemented volumes.
    LabelVolume ca = a;
    LabelVolume cb = b;
    for (auto& x : ca.voxels) x = 1 - x;
    for (auto& x : cb.voxels) x = 1 - x;
    const MetricsReport c = evaluate(ca, cb);
    if (r.fpr && c.fnr) CHECK(*c.fnr == *r.fpr);
  }
}

TEST_CASE("dice loss") {
  IntensityVolume pred({4, 1, 1}, 20.0, 0.0f);
  pred.voxels = {0.5f, 0, 0, 0};
  const LabelVolume truth = from({1, 0, 0, 0});
  CHECK(dice_loss(pred, truth) == doctest::Approx(1.0 - 5.0 / 5.25).epsilon(1e-12));
  CHECK(std::abs(dice_loss(pred, truth) - 0.0476190476190476) < 1e-9);

  IntensityVolume zeros({4, 1, 1}, 20.0, 0.0f);
  CHECK(dice_loss(zeros, from({0, 0, 0, 0})) == 0.0);
  IntensityVolume hard({4, 1, 1}, 20.0, 0.0f);
  hard.voxels = {1, 0, 1, 1};
  CHECK(dice_loss(hard, from({1, 0, 1, 1})) == doctest::Approx(0.0));

  IntensityVolume bad({4, 1, 1}, 20.0, 1.5f);
  CHECK_THROWS_AS(dice_loss(bad, truth), DomainError);
  CHECK_THROWS_AS(dice_loss(pred, from({1, 0})), DimensionError);
}

TEST_CASE("dice loss against direct summation and its DSC limit") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const LabelVolume truth = random_mask(rng, {8, 8, 8}, 0.05 + 0.5 * rng.uniform01());
    const LabelVolume hard_pred = random_mask(rng, {8, 8, 8}, 0.05 + 0.5 * rng.uniform01());
    IntensityVolume soft({8, 8, 8}, 20.0, 0.0f);
    IntensityVolume hard({8, 8, 8}, 20.0, 0.0f);
    double yp = 0, yy = 0, pp = 0;
    for (std::size_t i = 0; i < soft.size(); ++i) {
      soft.voxels[i] = static_cast<float>(rng.uniform01());
      hard.voxels[i] = static_cast<float>(hard_pred.voxels[i]);
      const double y = truth.voxels[i];
      const double p = soft.voxels[i];
      yp += y * p;
      yy += y * y;
      pp += p * p;
    }
    const double eps = 512.0;
    CHECK(dice_loss(soft, truth) == doctest::Approx(1.0 - (2 * yp + eps) / (yy + pp + eps)).epsilon(1e-12));

    const double d = *dsc(confusion(hard_pred, truth));
    CHECK(dice_loss(hard, truth, 1e-12) == doctest::Approx(1.0 - d).epsilon(1e-9));
    // A positive eps pulls the ratio toward one, so the loss never exceeds 1 - DSC.
    CHECK(dice_loss(hard, truth) <= 1.0 - d + 1e-12);
  }
}

TEST_CASE("component adjacency examples") {
  LabelVolume face({2, 2, 2}, 20.0, 0);
  face.at(0, 0, 0) = 1;
  face.at(1, 0, 0) = 1;
  CHECK(connected_components(face, Connectivity::Face).sizes == std::vector<std::uint64_t>{2});

  LabelVolume corner({2, 2, 2}, 20.0, 0);
  corner.at(0, 0, 0) = 1;
  corner.at(1, 1, 1) = 1;
  CHECK(connected_components(corner, Connectivity::Face).sizes.size() == 2);
  CHECK(connected_components(corner, Connectivity::Edge).sizes.size() == 2);
  CHECK(connected_components(corner, Connectivity::Corner).sizes.size() == 1);

  LabelVolume edge({2, 2, 1}, 20.0, 0);
  edge.at(0, 0, 0) = 1;
  edge.at(1, 1, 0) = 1;
  CHECK(connected_components(edge, Connectivity::Face).sizes.size() == 2);
  CHECK(connected_components(edge, Connectivity::Edge).sizes.size() == 1);

  LabelVolume empty({3, 3, 3}, 20.0, 0);
  CHECK(connected_components(empty).sizes.empty());
  CHECK(connectivity_from_int(18) == Connectivity::Edge);
  CHECK_FALSE(connectivity_from_int(8).has_value());
}

TEST_CASE("connected components match a flood-fill oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const LabelVolume mask = random_mask(rng, {16, 16, 16}, 0.15 + 0.3 * rng.uniform01());
    for (int conn : {6, 18, 26}) {
      const ComponentLabeling cc = connected_components(mask, *connectivity_from_int(conn));
      const std::vector<int> oracle = flood_fill(mask, conn);
      // Same partition: a bijection between oracle ids and our ids.
      std::map<int, std::int32_t> to_ours;
      std::map<std::int32_t, int> to_oracle;
      std::map<int, std::uint64_t> oracle_sizes;
      bool consistent = true;
      for (std::size_t i = 0; i < mask.size(); ++i) {
        const int o = oracle[i];
        const std::int32_t ours = cc.labels.voxels[i];
        if ((o == 0) != (ours == 0)) consistent = false;
        if (o == 0) continue;
        ++oracle_sizes[o];
        const auto [it1, new1] = to_ours.emplace(o, ours);
        const auto [it2, new2] = to_oracle.emplace(ours, o);
        consistent = consistent && it1->second == ours && it2->second == o;
      }
      CAPTURE(conn);
      CHECK(consistent);
      REQUIRE(cc.sizes.size() == oracle_sizes.size());
      // Ids ranked by size, ties by first appearance (oracle ids are in
      // order of first appearance).
      std::vector<std::pair<std::uint64_t, int>> ranked;
      for (const auto& [o, size] : oracle_sizes) ranked.emplace_back(size, o);
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        return x.first > y.first || (x.first == y.first && x.second < y.second);
      });
      for (std::size_t k = 0; k < ranked.size(); ++k) {
        CHECK(cc.sizes[k] == ranked[k].first);
        CHECK(to_ours[ranked[k].second] == static_cast<std::int32_t>(k + 1));
      }
    }
  }
}

TEST_CASE("largest components") {
  LabelVolume m({10, 1, 1}, 20.0, 0);
  m.voxels = {1, 0, 1, 1, 1, 0, 1, 1, 0, 1};
  const ComponentLabeling cc = connected_components(m, Connectivity::Face);
  CHECK(cc.sizes == std::vector<std::uint64_t>{3, 2, 1, 1});
  CHECK(cc.labels.voxels == std::vector<std::int32_t>{3, 0, 1, 1, 1, 0, 2, 2, 0, 4});
  CHECK(largest_components(cc, 2).voxels == std::vector<std::int32_t>{0, 0, 1, 1, 1, 0, 1, 1, 0, 0});
  CHECK(largest_components(cc, 0).voxels == std::vector<std::int32_t>(10, 0));
  CHECK(largest_components(cc, 99).voxels == foreground(m).voxels);
}

TEST_CASE("a rasterized straight tube is one component") {
  LabelVolume vol({64, 32, 32}, 20.0, 0);
  Rasterizer(vol).add_branch(Spline3D::with_constant_radius({Vec3(3, 10, 12), Vec3(60, 20, 18)}, 2.0));
  CHECK(connected_components(vol, Connectivity::Corner).sizes.size() == 1);
}
