#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ryolo/boxes.hpp"
#include "ryolo/detector.hpp"
#include "ryolo/error.hpp"
#include "ryolo/rng.hpp"

namespace ryolo {

inline double anchor_distance(const BoxShape& a, const BoxShape& b) {
  return 1.0 - shape_iou(a, b);
}

struct KMeansOptions {
  std::size_t k = 9;
  std::uint64_t seed = 0;
  std::size_t max_iters = 300;
  std::size_t restarts = 10;
};

struct KMeansResult {
  std::vector<BoxShape> centroids;     // sorted by area, ascending
  std::vector<std::size_t> assignment;  // per input shape, index into centroids
  double objective = 0.0;              // sum over inputs of distance to centroid
  // Objective after each centroid update of the winning restart.
  std::vector<double> history;
  std::size_t iterations = 0;
};

namespace detail {

struct WeightedShape {
  BoxShape shape;
  double count;
};

inline std::size_t nearest(const std::vector<BoxShape>& centroids, const BoxShape& s,
                           double* dist = nullptr) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = anchor_distance(s, centroids[j]);
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  if (dist) *dist = bd;
  return best;
}

inline double cluster_cost(const std::vector<WeightedShape>& pts,
                           const std::vector<std::size_t>& assign, std::size_t cluster,
                           const BoxShape& centroid) {
  double c = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (assign[i] == cluster) c += pts[i].count * anchor_distance(pts[i].shape, centroid);
  }
  return c;
}

// Running weighted mean; exact when every member is the same shape.
inline BoxShape cluster_mean(const std::vector<WeightedShape>& pts,
                             const std::vector<std::size_t>& assign, std::size_t cluster) {
  BoxShape m{0.0, 0.0};
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (assign[i] != cluster) continue;
    total += pts[i].count;
    const double f = pts[i].count / total;
    m.w += (pts[i].shape.w - m.w) * f;
    m.h += (pts[i].shape.h - m.h) * f;
  }
  return m;
}

// k-means++ seeding over the deduplicated multiset: selection probability is
// proportional to multiplicity times squared distance to the nearest seed.
inline std::vector<BoxShape> seed_centroids(const std::vector<WeightedShape>& pts, std::size_t k,
                                            Rng& rng) {
  std::vector<BoxShape> seeds;
  std::vector<double> weight(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) weight[i] = pts[i].count;
  while (seeds.size() < k) {
    double total = 0.0;
    for (double w : weight) total += w;
    std::size_t pick = pts.size() - 1;
    double r = rng.uniform() * total;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (weight[i] <= 0.0) continue;
      if (r < weight[i]) {
        pick = i;
        break;
      }
      r -= weight[i];
      pick = i;
    }
    seeds.push_back(pts[pick].shape);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double d;
      nearest(seeds, pts[i].shape, &d);
      weight[i] = pts[i].count * d * d;
    }
  }
  return seeds;
}

struct LloydRun {
  std::vector<BoxShape> centroids;
  std::vector<std::size_t> assign;
  std::vector<double> history;
  std::size_t iterations = 0;
};

inline double objective(const std::vector<WeightedShape>& pts, const std::vector<std::size_t>& assign,
                        const std::vector<BoxShape>& centroids) {
  double o = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    o += pts[i].count * anchor_distance(pts[i].shape, centroids[assign[i]]);
  }
  return o;
}

// Lloyd iterations with 1 - IoU assignment and mean updates. The first
// update always moves seeds to their cluster means; afterwards a mean is only
// accepted when it does not raise its cluster's cost, which keeps the
// objective non-increasing. Empty clusters are re-seeded at the point
// farthest from its centroid.
inline LloydRun lloyd(const std::vector<WeightedShape>& pts, std::vector<BoxShape> centroids,
                      std::size_t max_iters) {
  LloydRun run;
  const std::size_t k = centroids.size();
  std::vector<std::size_t> assign(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) assign[i] = nearest(centroids, pts[i].shape);

  for (std::size_t it = 0; it < max_iters; ++it) {
    run.iterations = it + 1;
    bool moved = false;
    for (std::size_t j = 0; j < k; ++j) {
      const bool empty = std::find(assign.begin(), assign.end(), j) == assign.end();
      if (empty) {
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double d = anchor_distance(pts[i].shape, centroids[assign[i]]);
          if (d > fd) {
            fd = d;
            far = i;
          }
        }
        if (fd > 0.0) {
          centroids[j] = pts[far].shape;
          assign[far] = j;
          moved = true;
        }
        continue;
      }
      const BoxShape mean = cluster_mean(pts, assign, j);
      if (mean == centroids[j]) continue;
      if (it == 0 || cluster_cost(pts, assign, j, mean) <= cluster_cost(pts, assign, j, centroids[j])) {
        centroids[j] = mean;
        moved = true;
      }
    }
    bool reassigned = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::size_t cur = assign[i];
      const double dcur = anchor_distance(pts[i].shape, centroids[cur]);
      double dbest;
      const std::size_t best = nearest(centroids, pts[i].shape, &dbest);
      // Only switch on strict improvement so ties cannot cycle.
      if (best != cur && dbest < dcur) {
        assign[i] = best;
        reassigned = true;
      }
    }
    run.history.push_back(objective(pts, assign, centroids));
    if (!moved && !reassigned) break;
  }
  run.centroids = std::move(centroids);
  run.assign = std::move(assign);
  return run;
}

}  // namespace detail

inline KMeansResult kmeans_anchors(const std::vector<BoxShape>& shapes,
                                   const KMeansOptions& opts) {
  require(!shapes.empty(), ErrorKind::InvalidArgument, "kmeans_anchors: no shapes");
  require(opts.k >= 1, ErrorKind::InvalidArgument, "kmeans_anchors: k must be >= 1");
  std::map<BoxShape, double> multiset;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    require(shapes[i].w > 0.0 && shapes[i].h > 0.0, ErrorKind::InvalidArgument,
            "kmeans_anchors: shape " + std::to_string(i) + " is not strictly positive");
    multiset[shapes[i]] += 1.0;
  }
  require(opts.k <= multiset.size(), ErrorKind::InvalidArgument,
          "kmeans_anchors: k = " + std::to_string(opts.k) + " exceeds " +
              std::to_string(multiset.size()) + " distinct shapes");
  std::vector<detail::WeightedShape> pts;
  for (const auto& [s, c] : multiset) pts.push_back({s, c});

  Rng rng(opts.seed);
  detail::LloydRun best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, opts.restarts); ++r) {
    Rng sub = rng.fork(r);
    detail::LloydRun run = detail::lloyd(pts, detail::seed_centroids(pts, opts.k, sub), opts.max_iters);
    const double obj = detail::objective(pts, run.assign, run.centroids);
    if (obj < best_obj) {
      best_obj = obj;
      best = std::move(run);
    }
  }

  std::vector<std::size_t> order(opts.k);
  for (std::size_t j = 0; j < opts.k; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return best.centroids[a].area() < best.centroids[b].area();
  });
  std::vector<std::size_t> rank(opts.k);
  KMeansResult result;
  for (std::size_t j = 0; j < opts.k; ++j) {
    rank[order[j]] = j;
    result.centroids.push_back(best.centroids[order[j]]);
  }
  std::map<BoxShape, std::size_t> cluster_of;
  for (std::size_t i = 0; i < pts.size(); ++i) cluster_of[pts[i].shape] = rank[best.assign[i]];
  for (const auto& s : shapes) result.assignment.push_back(cluster_of.at(s));
  result.objective = best_obj;
  result.history = std::move(best.history);
  result.iterations = best.iterations;
  return result;
}

// Area-ranked split: the three smallest priors go to the finest grid.
inline AnchorSet assign_to_scales(const std::vector<BoxShape>& centroids) {
  require(centroids.size() == kScales * kAnchorsPerScale, ErrorKind::InvalidArgument,
          "assign_to_scales: expected 9 centroids, got " + std::to_string(centroids.size()));
  std::vector<BoxShape> sorted = centroids;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const BoxShape& a, const BoxShape& b) { return a.area() < b.area(); });
  AnchorSet set;
  for (std::size_t s = 0; s < kScales; ++s) {
    for (std::size_t a = 0; a < kAnchorsPerScale; ++a) set.priors[s][a] = sorted[s * kAnchorsPerScale + a];
  }
  set.validate();
  return set;
}

// Ground-truth boxes whose best concentric-IoU prior is each of the nine
// priors, indexed [scale][anchor].
inline std::array<std::array<std::size_t, kAnchorsPerScale>, kScales> prior_utilization(
    const std::vector<BoxShape>& shapes, const AnchorSet& anchors) {
  std::array<std::array<std::size_t, kAnchorsPerScale>, kScales> counts{};
  for (const auto& sh : shapes) {
    std::size_t bs = 0, ba = 0;
    double best = -1.0;
    for (std::size_t s = 0; s < kScales; ++s) {
      for (std::size_t a = 0; a < kAnchorsPerScale; ++a) {
        const double v = shape_iou(sh, anchors.at(s)[a]);
        if (v > best) {
          best = v;
          bs = s;
          ba = a;
        }
      }
    }
    ++counts[bs][ba];
  }
  return counts;
}

// ---------------------------------------------------------------------------
// Anchor file: nine "w h" lines, area-ascending, normalized units.

inline void write_anchor_file(const std::string& path, const AnchorSet& anchors) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorKind::Io, "cannot write anchor file " + path);
  os << std::setprecision(17);
  for (const auto& scale : anchors.priors) {
    for (const auto& p : scale) os << p.w << ' ' << p.h << '\n';
  }
}

inline AnchorSet read_anchor_file(const std::string& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::Io, "cannot read anchor file " + path);
  std::vector<BoxShape> shapes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    BoxShape s;
    if (!(ls >> s.w >> s.h) || s.w <= 0.0 || s.h <= 0.0) {
      fail(ErrorKind::Parse, path + ":" + std::to_string(lineno) + ": expected 'w h' with positive values");
    }
    shapes.push_back(s);
  }
  require(shapes.size() == kScales * kAnchorsPerScale, ErrorKind::Parse,
          path + ": expected 9 anchors, found " + std::to_string(shapes.size()));
  AnchorSet set;
  for (std::size_t i = 0; i < shapes.size(); ++i) set.priors[i / kAnchorsPerScale][i % kAnchorsPerScale] = shapes[i];
  set.validate();
  return set;
}

}  // namespace ryolo
