#pragma once

#include <random>
#include <vector>

#include "roomgraph/geometry.hpp"
#include "roomgraph/plane.hpp"

namespace roomgraph {

struct PlaneExtractionConfig {
  double inlier_dist = 0.05;
  int min_support = 150;
  int max_planes = 8;
  int ransac_iterations = 120;
  double max_range = 12.0;  // points beyond this are not used for planes
};

struct ExtractedPlane {
  PlaneParam plane;  // keyframe frame, normal oriented toward the sensor
  int support = 0;
};

namespace detail {

inline PlaneParam fitPlaneLeastSquares(const PointCloud& pts, const std::vector<int>& idx) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (int i : idx) centroid += pts[i];
  centroid /= static_cast<double>(idx.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : idx) {
    Eigen::Vector3d d = pts[i] - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Eigen::Vector3d n = es.eigenvectors().col(0);
  return PlaneParam(n, n.dot(centroid));
}

}  // namespace detail

/// Iterative RANSAC plane segmentation of a single scan. Returned normals
/// point toward the sensor origin.
inline std::vector<ExtractedPlane> extractPlanes(const PointCloud& scan,
                                                 const PlaneExtractionConfig& cfg,
                                                 uint64_t seed = 1) {
  std::vector<int> active;
  active.reserve(scan.size());
  for (int i = 0; i < static_cast<int>(scan.size()); ++i) {
    if (scan[i].norm() <= cfg.max_range) active.push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<ExtractedPlane> out;

  while (static_cast<int>(out.size()) < cfg.max_planes &&
         static_cast<int>(active.size()) >= cfg.min_support) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(active.size()) - 1);
    PlaneParam best;
    int best_support = 0;
    for (int it = 0; it < cfg.ransac_iterations; ++it) {
      int a = active[pick(rng)], b = active[pick(rng)], c = active[pick(rng)];
      Eigen::Vector3d n = (scan[b] - scan[a]).cross(scan[c] - scan[a]);
      if (n.norm() < 1e-9) continue;
      n.normalize();
      PlaneParam cand(n, n.dot(scan[a]));
      int support = 0;
      for (int i : active) {
        if (std::abs(cand.signedDistance(scan[i])) < cfg.inlier_dist) ++support;
      }
      if (support > best_support) {
        best_support = support;
        best = cand;
      }
    }
    if (best_support < cfg.min_support) break;

    std::vector<int> inliers;
    for (int i : active) {
      if (std::abs(best.signedDistance(scan[i])) < cfg.inlier_dist) inliers.push_back(i);
    }
    PlaneParam refined = detail::fitPlaneLeastSquares(scan, inliers);

    std::vector<int> refined_in;
    std::vector<int> rest;
    for (int i : active) {
      if (std::abs(refined.signedDistance(scan[i])) < cfg.inlier_dist) {
        refined_in.push_back(i);
      } else {
        rest.push_back(i);
      }
    }
    if (static_cast<int>(refined_in.size()) < cfg.min_support) break;

    refined = orientToward(refined, Eigen::Vector3d::Zero());
    out.push_back({refined, static_cast<int>(refined_in.size())});
    active.swap(rest);
  }
  return out;
}

}  // namespace roomgraph
