#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "classtrack/config.hpp"
#include "classtrack/types.hpp"

namespace classtrack {

// Intersection over union of two axis-aligned boxes.
inline double iou(const Box& a, const Box& b) {
  if (!(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0)) throw std::domain_error("iou: box with non-positive size");
  const double ix = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double iy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  // Areas measured from the same edge coordinates as the overlap, so that
  // identical boxes give exactly 1.
  const double inter = ix * iy;
  const double uni = (a.right() - a.x) * (a.bottom() - a.y) + (b.right() - b.x) * (b.bottom() - b.y) - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

struct MemberBox {
  std::int64_t frame_index = 0;
  double t = 0.0;
  Box bbox;
  std::size_t detection_index = 0;  // position within the validated frame

  friend bool operator==(const MemberBox&, const MemberBox&) = default;
};

struct ActiveTrack {
  std::uint64_t id = 0;  // creation order
  BehaviorCategory category = BehaviorCategory::hand_raising;
  Box last_bbox;
  std::vector<MemberBox> members;
  int miss_count = 0;
};

// One deduplicated behavior occurrence.
struct BehaviorEvent {
  BehaviorCategory category = BehaviorCategory::hand_raising;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  double start_t = 0.0;
  double end_t = 0.0;
  std::vector<MemberBox> members;
  std::optional<SeatId> seat;

  friend bool operator==(const BehaviorEvent&, const BehaviorEvent&) = default;
};

inline BehaviorEvent close_track(const ActiveTrack& tr) {
  BehaviorEvent ev;
  ev.category = tr.category;
  ev.members = tr.members;
  ev.start_frame = tr.members.front().frame_index;
  ev.end_frame = tr.members.back().frame_index;
  ev.start_t = tr.members.front().t;
  ev.end_t = tr.members.back().t;
  return ev;
}

// Interframe deduplication: per-category greedy IoU association with a miss
// tolerance. A track unmatched for more than `miss_tolerance_T` consecutive
// frames is closed and emitted once. Teacher detections are ignored.
class Deduplicator {
 public:
  explicit Deduplicator(double iou_threshold = 0.2, int miss_tolerance = 2)
      : iou_threshold_(iou_threshold), miss_tolerance_(miss_tolerance) {}
  explicit Deduplicator(const ClassroomConfig& cfg) : Deduplicator(cfg.iou_threshold, cfg.miss_tolerance_T) {}

  std::vector<BehaviorEvent> step(const FrameRecord& frame) {
    struct Candidate {
      double overlap;
      std::uint64_t track_id;
      std::size_t track_pos;
      std::size_t det;
    };
    std::vector<Candidate> candidates;
    for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
      const auto& tr = tracks_[ti];
      for (std::size_t di = 0; di < frame.detections.size(); ++di) {
        const auto& d = frame.detections[di];
        if (d.category != tr.category || !is_student_behavior(d.category)) continue;
        double o = iou(tr.last_bbox, d.bbox);
        if (o >= iou_threshold_) candidates.push_back({o, tr.id, ti, di});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      return std::tie(a.track_id, a.det) < std::tie(b.track_id, b.det);
    });

    std::vector<bool> track_used(tracks_.size(), false);
    std::vector<bool> det_used(frame.detections.size(), false);
    for (const auto& c : candidates) {
      if (track_used[c.track_pos] || det_used[c.det]) continue;
      track_used[c.track_pos] = det_used[c.det] = true;
      auto& tr = tracks_[c.track_pos];
      const auto& d = frame.detections[c.det];
      tr.last_bbox = d.bbox;
      tr.members.push_back({frame.frame_index, frame.t, d.bbox, c.det});
      tr.miss_count = 0;
    }

    std::vector<BehaviorEvent> emitted;
    std::vector<ActiveTrack> survivors;
    survivors.reserve(tracks_.size());
    for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
      auto& tr = tracks_[ti];
      if (!track_used[ti] && ++tr.miss_count > miss_tolerance_) {
        emitted.push_back(close_track(tr));
        continue;
      }
      survivors.push_back(std::move(tr));
    }
    tracks_ = std::move(survivors);

    for (std::size_t di = 0; di < frame.detections.size(); ++di) {
      const auto& d = frame.detections[di];
      if (det_used[di] || !is_student_behavior(d.category)) continue;
      ActiveTrack tr;
      tr.id = next_id_++;
      tr.category = d.category;
      tr.last_bbox = d.bbox;
      tr.members.push_back({frame.frame_index, frame.t, d.bbox, di});
      tracks_.push_back(std::move(tr));
    }
    return emitted;
  }

  // Closes every remaining track (end of stream).
  std::vector<BehaviorEvent> flush() {
    std::vector<BehaviorEvent> out;
    out.reserve(tracks_.size());
    for (const auto& tr : tracks_) out.push_back(close_track(tr));
    tracks_.clear();
    return out;
  }

  const std::vector<ActiveTrack>& tracks() const { return tracks_; }

  // Earliest frame still referenced by an open track.
  std::optional<std::int64_t> oldest_open_frame() const {
    std::optional<std::int64_t> out;
    for (const auto& tr : tracks_) {
      auto f = tr.members.front().frame_index;
      if (!out || f < *out) out = f;
    }
    return out;
  }

 private:
  double iou_threshold_;
  int miss_tolerance_;
  std::uint64_t next_id_ = 0;
  std::vector<ActiveTrack> tracks_;
};

}  // namespace classtrack
