#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "classtrack/config.hpp"
#include "classtrack/dedup.hpp"
#include "classtrack/seatmap.hpp"
#include "classtrack/types.hpp"

namespace classtrack {

enum class MatchMethod : std::uint8_t { keypoint_containment, wrist_elbow_greedy, nearest_fallback, unmatched };

inline constexpr std::string_view to_string(MatchMethod m) {
  switch (m) {
    case MatchMethod::keypoint_containment: return "keypoint_containment";
    case MatchMethod::wrist_elbow_greedy: return "wrist_elbow_greedy";
    case MatchMethod::nearest_fallback: return "nearest_fallback";
    case MatchMethod::unmatched: return "unmatched";
  }
  return "unknown";
}

struct MatchResult {
  std::size_t detection_index = 0;
  std::optional<std::size_t> pose_index;  // present iff method != unmatched
  double score = 0.0;
  MatchMethod method = MatchMethod::unmatched;
};

struct MatcherParams {
  double kp_conf_min = 0.3;
  double wrist_weight = 3.0;
  double elbow_weight = 2.0;
  double hand_box_expand = 0.2;
  double r_max_factor = 2.0;
  double image_diagonal = 2202.9071700822983;  // 1920 x 1080

  static MatcherParams from_config(const ClassroomConfig& cfg) {
    return {cfg.kp_conf_min, cfg.wrist_weight, cfg.elbow_weight, cfg.hand_box_expand, cfg.r_max_factor,
            cfg.image_diagonal()};
  }
  double r_max(const Box& b) const { return r_max_factor * std::max(b.w, b.h); }
};

// A pose is a teacher when its representative point lies in a teacher box.
inline std::vector<bool> flag_teachers(const std::vector<BodyPose>& poses, const std::vector<Box>& teacher_boxes,
                                       double kp_conf_min) {
  std::vector<bool> flags(poses.size(), false);
  if (teacher_boxes.empty()) return flags;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Point2 p = representative_point(poses[i], kp_conf_min);
    flags[i] = std::any_of(teacher_boxes.begin(), teacher_boxes.end(), [&](const Box& b) { return b.contains(p); });
  }
  return flags;
}

inline bool is_flagged(const std::vector<bool>& flags, std::size_t i) { return i < flags.size() && flags[i]; }

// Standing / sleeping / yawning / smiling: the box itself delimits the
// student, so pick the pose with the largest share of confident keypoints
// inside it.
inline MatchResult match_body_behavior(const Detection& det, std::size_t detection_index,
                                       const std::vector<BodyPose>& poses, const std::vector<bool>& teacher_flags,
                                       const MatcherParams& params) {
  if (det.category == BehaviorCategory::hand_raising || det.category == BehaviorCategory::teacher)
    throw std::domain_error("match_body_behavior: expects standing, sleeping, yawning or smiling");
  MatchResult res;
  res.detection_index = detection_index;
  const Point2 c = det.bbox.center();

  double best_frac = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (is_flagged(teacher_flags, i)) continue;
    const auto& pose = poses[i];
    std::size_t confident = 0, inside = 0;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) {
      if (!pose.confident(k, params.kp_conf_min)) continue;
      ++confident;
      if (det.bbox.contains(pose.kps[k].point())) ++inside;
    }
    if (confident == 0 || inside == 0) continue;
    const double frac = static_cast<double>(inside) / static_cast<double>(confident);
    const double dist = distance(c, representative_point(pose, params.kp_conf_min));
    if (frac > best_frac || (frac == best_frac && dist < best_dist)) {
      best_frac = frac;
      best_dist = dist;
      best = i;
    }
  }
  if (best) {
    res.pose_index = best;
    res.score = best_frac;
    res.method = MatchMethod::keypoint_containment;
    return res;
  }

  const double r_max = params.r_max(det.bbox);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (is_flagged(teacher_flags, i)) continue;
    const double dist = distance(c, representative_point(poses[i], params.kp_conf_min));
    if (dist <= r_max && dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  if (best) {
    res.pose_index = best;
    res.score = 1.0 / (1.0 + best_dist / params.image_diagonal);
    res.method = MatchMethod::nearest_fallback;
  }
  return res;
}

struct HandRaisingScore {
  double score = 0.0;
  double shoulder_distance = std::numeric_limits<double>::infinity();
};

// Score of one (hand-raising box, pose) pair: wrist inside the expanded box,
// elbow inside it, and proximity of the box bottom-center to the nearest
// shoulder (the representative point stands in when no shoulder is seen).
inline HandRaisingScore score_hand_raising(const Box& box, const BodyPose& pose, const MatcherParams& params) {
  const Box grown = box.expanded(params.hand_box_expand);
  auto any_inside = [&](std::size_t a, std::size_t b) {
    return (pose.confident(a, params.kp_conf_min) && grown.contains(pose.kps[a].point())) ||
           (pose.confident(b, params.kp_conf_min) && grown.contains(pose.kps[b].point()));
  };
  HandRaisingScore s;
  if (any_inside(kLeftWrist, kRightWrist)) s.score += params.wrist_weight;
  if (any_inside(kLeftElbow, kRightElbow)) s.score += params.elbow_weight;

  const Point2 anchor = box.bottom_center();
  for (std::size_t k : {std::size_t{kLeftShoulder}, std::size_t{kRightShoulder}})
    if (pose.confident(k, params.kp_conf_min))
      s.shoulder_distance = std::min(s.shoulder_distance, distance(anchor, pose.kps[k].point()));
  if (s.shoulder_distance == std::numeric_limits<double>::infinity())
    s.shoulder_distance = distance(anchor, representative_point(pose, params.kp_conf_min));
  s.score += 1.0 / (1.0 + s.shoulder_distance / params.image_diagonal);
  return s;
}

// Greedy one-to-one assignment of hand-raising boxes to poses by descending
// pair score (ties: nearer shoulder, then lower pose index, then lower box
// position). `boxes` pairs each box with its detection index in the frame.
inline std::vector<MatchResult> match_hand_raising(const std::vector<std::pair<std::size_t, Detection>>& boxes,
                                                   const std::vector<BodyPose>& poses,
                                                   const std::vector<bool>& teacher_flags,
                                                   const MatcherParams& params) {
  struct Pair {
    double score;
    double dist;
    std::size_t pose;
    std::size_t box;
  };
  std::vector<Pair> pairs;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const auto& det = boxes[b].second;
    if (det.category != BehaviorCategory::hand_raising)
      throw std::domain_error("match_hand_raising: non hand-raising box");
    const double r_max = params.r_max(det.bbox);
    for (std::size_t p = 0; p < poses.size(); ++p) {
      if (is_flagged(teacher_flags, p)) continue;
      const auto s = score_hand_raising(det.bbox, poses[p], params);
      if (s.score <= 0.0 || s.shoulder_distance > r_max) continue;
      pairs.push_back({s.score, s.shoulder_distance, p, b});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.dist != b.dist) return a.dist < b.dist;
    return std::tie(a.pose, a.box) < std::tie(b.pose, b.box);
  });

  std::vector<MatchResult> out(boxes.size());
  for (std::size_t b = 0; b < boxes.size(); ++b) out[b].detection_index = boxes[b].first;
  std::vector<bool> pose_used(poses.size(), false), box_used(boxes.size(), false);
  for (const auto& pr : pairs) {
    if (pose_used[pr.pose] || box_used[pr.box]) continue;
    pose_used[pr.pose] = box_used[pr.box] = true;
    out[pr.box].pose_index = pr.pose;
    out[pr.box].score = pr.score;
    out[pr.box].method = MatchMethod::wrist_elbow_greedy;
  }
  return out;
}

// Matches every student-behavior detection of a frame; result i corresponds
// to detection i (teacher boxes come back unmatched).
inline std::vector<MatchResult> match_frame(const FrameRecord& frame, const std::vector<bool>& teacher_flags,
                                            const MatcherParams& params) {
  std::vector<MatchResult> out(frame.detections.size());
  std::vector<std::pair<std::size_t, Detection>> hands;
  for (std::size_t i = 0; i < frame.detections.size(); ++i) {
    const auto& d = frame.detections[i];
    out[i].detection_index = i;
    if (d.category == BehaviorCategory::hand_raising) hands.emplace_back(i, d);
    else if (d.category != BehaviorCategory::teacher)
      out[i] = match_body_behavior(d, i, frame.poses, teacher_flags, params);
  }
  for (auto& r : match_hand_raising(hands, frame.poses, teacher_flags, params)) out[r.detection_index] = r;
  return out;
}

// Per-frame seat of each detection (via its matched pose), keyed by frame.
using FrameSeatTable = std::unordered_map<std::int64_t, std::vector<std::optional<SeatId>>>;

// Seat of an event = most frequent seat among its matched member frames; ties
// go to the seat seen in the latest frame.
inline BehaviorEvent assign_event_seat(BehaviorEvent event, const FrameSeatTable& detection_seats) {
  std::map<SeatId, std::pair<int, std::int64_t>> tally;  // seat -> (count, latest frame)
  for (const auto& m : event.members) {
    auto it = detection_seats.find(m.frame_index);
    if (it == detection_seats.end() || m.detection_index >= it->second.size()) continue;
    const auto& seat = it->second[m.detection_index];
    if (!seat) continue;
    auto& [count, latest] = tally[*seat];
    ++count;
    latest = std::max(latest, m.frame_index);
  }
  event.seat.reset();
  std::pair<int, std::int64_t> best{0, -1};
  for (const auto& [seat, stat] : tally) {
    if (stat > best) {
      best = stat;
      event.seat = seat;
    }
  }
  return event;
}

}  // namespace classtrack
