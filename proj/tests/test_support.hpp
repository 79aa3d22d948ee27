#pragma once

#include <random>
#include <vector>

#include "classtrack/types.hpp"

namespace classtrack::testkit {

// Upright seated pose around `anchor` with all upper-body and arm joints
// confident; lower body missing.
inline BodyPose seated_pose(Point2 anchor, double scale = 100.0, double conf = 0.9) {
  static constexpr std::array<Point2, kNumKeypoints> offsets{
      Point2{0.0, -0.09}, {-0.03, -0.11}, {0.03, -0.11}, {-0.06, -0.09}, {0.06, -0.09}, {-0.12, 0.245},
      {0.12, 0.245},      {-0.15, 0.42},  {0.15, 0.42},  {-0.09, 0.52},  {0.09, 0.52},  {-0.08, 0.62},
      {0.08, 0.62},       {-0.08, 0.9},   {0.08, 0.9},   {-0.08, 1.15},  {0.08, 1.15}};
  BodyPose p;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const bool visible = k <= kRightWrist;
    p.kps[k] = {anchor.x + scale * offsets[k].x, anchor.y + scale * offsets[k].y, visible ? conf : 0.0};
  }
  return p;
}

inline BodyPose empty_pose() { return BodyPose{}; }

inline Box random_box(std::mt19937_64& rng, double extent = 200.0, double max_size = 80.0) {
  std::uniform_real_distribution<double> pos(0.0, extent), size(0.5, max_size);
  return {pos(rng), pos(rng), size(rng), size(rng)};
}

}  // namespace classtrack::testkit
