#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "classtrack/config.hpp"
#include "classtrack/dedup.hpp"
#include "classtrack/ingest.hpp"
#include "classtrack/matcher.hpp"
#include "classtrack/seatmap.hpp"
#include "classtrack/tracker.hpp"

namespace classtrack {

struct AnalysisStats {
  std::size_t frames = 0;
  std::size_t detections = 0;
  std::size_t dropped_detections = 0;
  std::size_t dropped_poses = 0;
  std::size_t teacher_poses = 0;
  std::size_t events = 0;
  std::vector<std::string> warnings;
};

// Drives ingest -> dedup -> matcher -> seatmap -> tracker over one stream.
// Feed frames in order, then call finish().
class SessionAnalyzer {
 public:
  explicit SessionAnalyzer(const ClassroomConfig& cfg, std::string course_id = "course",
                           bool keep_frame_records = true)
      : cfg_(cfg),
        validator_(cfg),
        dedup_(cfg),
        locator_(cfg),
        params_(MatcherParams::from_config(cfg)),
        session_(cfg, std::move(course_id)),
        keep_frames_(keep_frame_records) {}

  // Returns the events finalized by this frame.
  std::vector<TrackedEvent> feed(const FrameRecord& raw) {
    auto v = validator_(raw);
    const FrameRecord& frame = v.frame;
    ++stats_.frames;
    stats_.detections += frame.detections.size();
    stats_.dropped_detections += v.dropped_detections;
    stats_.dropped_poses += v.dropped_poses;
    for (auto& w : v.warnings) stats_.warnings.push_back(std::move(w));

    std::vector<Box> teacher_boxes;
    for (const auto& d : frame.detections)
      if (d.category == BehaviorCategory::teacher) teacher_boxes.push_back(d.bbox);
    const auto teachers = flag_teachers(frame.poses, teacher_boxes, cfg_.kp_conf_min);
    for (bool t : teachers) stats_.teacher_poses += t ? 1 : 0;

    const auto pose_seats = locator_(frame.poses, teachers);
    for (const auto& s : pose_seats)
      if (s) session_.mark_occupied(*s);

    const auto matches = match_frame(frame, teachers, params_);
    std::vector<std::optional<SeatId>> det_seats(frame.detections.size());
    for (const auto& m : matches)
      if (m.pose_index) det_seats[m.detection_index] = pose_seats[*m.pose_index];
    seat_table_[frame.frame_index] = det_seats;

    if (keep_frames_) {
      FrameAnalysis fa;
      fa.frame_index = frame.frame_index;
      fa.t = frame.t;
      fa.pose_seats.assign(raw.poses.size(), std::nullopt);
      for (std::size_t i = 0; i < v.kept_poses.size(); ++i) fa.pose_seats[v.kept_poses[i]] = pose_seats[i];
      for (std::size_t i = 0; i < frame.detections.size(); ++i) {
        if (frame.detections[i].category != BehaviorCategory::hand_raising) continue;
        fa.hands.push_back({frame.detections[i].bbox, matches[i].pose_index.has_value(), det_seats[i]});
      }
      session_.frames().push_back(std::move(fa));
    }

    session_.extend_duration(frame.t + cfg_.sample_interval_s);
    auto out = settle(dedup_.step(frame));
    prune();
    return out;
  }

  std::vector<TrackedEvent> finish() { return settle(dedup_.flush()); }

  const ClassSession& session() const { return session_; }
  ClassSession take_session() { return std::move(session_); }
  const AnalysisStats& stats() const { return stats_; }
  const ClassroomConfig& config() const { return cfg_; }

 private:
  std::vector<TrackedEvent> settle(const std::vector<BehaviorEvent>& events) {
    std::vector<TrackedEvent> out;
    for (const auto& ev : events) {
      auto tracked = TrackedEvent::from(assign_event_seat(ev, seat_table_));
      session_.accumulate(tracked);
      out.push_back(tracked);
      ++stats_.events;
    }
    return out;
  }

  // Per-frame seat data is only needed while an open track references it.
  void prune() {
    const auto oldest = dedup_.oldest_open_frame();
    for (auto it = seat_table_.begin(); it != seat_table_.end();) {
      if (!oldest || it->first < *oldest) it = seat_table_.erase(it);
      else ++it;
    }
  }

  ClassroomConfig cfg_;
  StreamValidator validator_;
  Deduplicator dedup_;
  SeatLocator locator_;
  MatcherParams params_;
  ClassSession session_;
  FrameSeatTable seat_table_;
  AnalysisStats stats_;
  bool keep_frames_;
};

inline ClassSession analyze_stream(std::istream& in, const ClassroomConfig& cfg, const std::string& course_id = "course",
                                   AnalysisStats* stats = nullptr) {
  SessionAnalyzer analyzer(cfg, course_id);
  StreamReader reader(in);
  while (auto rec = reader.next()) analyzer.feed(*rec);
  analyzer.finish();
  if (stats) *stats = analyzer.stats();
  return analyzer.take_session();
}

inline ClassSession analyze_frames(const std::vector<FrameRecord>& frames, const ClassroomConfig& cfg,
                                   const std::string& course_id = "course") {
  SessionAnalyzer analyzer(cfg, course_id);
  for (const auto& f : frames) analyzer.feed(f);
  analyzer.finish();
  return analyzer.take_session();
}

}  // namespace classtrack
