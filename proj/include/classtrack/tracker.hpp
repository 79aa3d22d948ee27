#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "classtrack/config.hpp"
#include "classtrack/dedup.hpp"
#include "classtrack/types.hpp"

namespace classtrack {

inline constexpr int kSessionFormatVersion = 1;
inline constexpr const char* kEngineVersion = "1.0.0";

using CategoryCounts = std::array<int, kNumStudentBehaviors>;

// A finalized event as stored in a session.
struct TrackedEvent {
  BehaviorCategory category = BehaviorCategory::hand_raising;
  double t = 0.0;  // start time
  double end_t = 0.0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  std::optional<SeatId> seat;

  static TrackedEvent from(const BehaviorEvent& ev) {
    return {ev.category, ev.start_t, ev.end_t, ev.start_frame, ev.end_frame, ev.seat};
  }
  friend bool operator==(const TrackedEvent&, const TrackedEvent&) = default;
};

inline bool event_order(const TrackedEvent& a, const TrackedEvent& b) {
  return std::make_tuple(a.t, a.start_frame, a.end_frame, a.end_t, to_string(a.category), a.seat) <
         std::make_tuple(b.t, b.start_frame, b.end_frame, b.end_t, to_string(b.category), b.seat);
}

struct SeatTracklet {
  SeatId seat;
  std::array<std::vector<TrackedEvent>, kNumStudentBehaviors> events;

  int count(BehaviorCategory c) const { return static_cast<int>(events[behavior_index(c)].size()); }
  CategoryCounts counts() const {
    CategoryCounts out{};
    for (std::size_t i = 0; i < kNumStudentBehaviors; ++i) out[i] = static_cast<int>(events[i].size());
    return out;
  }
};

// What the pipeline saw in one frame, kept for evaluation.
struct HandMatchRecord {
  Box bbox;
  bool matched = false;
  std::optional<SeatId> seat;

  friend bool operator==(const HandMatchRecord&, const HandMatchRecord&) = default;
};

struct FrameAnalysis {
  std::int64_t frame_index = 0;
  double t = 0.0;
  // Indexed by the pose's position in the input record; empty for teachers
  // and poses dropped at validation.
  std::vector<std::optional<SeatId>> pose_seats;
  std::vector<HandMatchRecord> hands;

  friend bool operator==(const FrameAnalysis&, const FrameAnalysis&) = default;
};

class ClassSession {
 public:
  explicit ClassSession(ClassroomConfig cfg = {}, std::string course_id = "course")
      : config_(std::move(cfg)), course_id_(std::move(course_id)) {
    grid_.resize(config_.seat_count());
    for (int r = 1; r <= config_.rows; ++r)
      for (int c = 1; c <= config_.cols; ++c) grid_[cell(SeatId{r, c})].seat = SeatId{r, c};
    occupancy_.assign(config_.seat_count(), false);
  }

  const ClassroomConfig& config() const { return config_; }
  const std::string& course_id() const { return course_id_; }
  double duration() const { return duration_s_; }
  const std::vector<TrackedEvent>& unassigned() const { return unassigned_; }
  const std::vector<CategoryCounts>& timeline() const { return timeline_; }
  const std::vector<FrameAnalysis>& frames() const { return frames_; }
  std::vector<FrameAnalysis>& frames() { return frames_; }

  bool in_grid(const SeatId& s) const {
    return s.row >= 1 && s.row <= config_.rows && s.col >= 1 && s.col <= config_.cols;
  }

  const SeatTracklet& tracklet(const SeatId& s) const {
    check_seat(s);
    return grid_[cell(s)];
  }
  bool occupied(const SeatId& s) const {
    check_seat(s);
    return occupancy_[cell(s)];
  }
  void mark_occupied(const SeatId& s) {
    check_seat(s);
    occupancy_[cell(s)] = true;
  }

  std::size_t sample_index(double t) const {
    return static_cast<std::size_t>(std::max(0.0, std::floor(t / config_.sample_interval_s + 1e-9)));
  }

  // Extends the session so that it covers [0, d]; never shrinks.
  void extend_duration(double d) {
    duration_s_ = std::max(duration_s_, d);
    const auto n = static_cast<std::size_t>(std::ceil(duration_s_ / config_.sample_interval_s - 1e-9));
    if (timeline_.size() < n) timeline_.resize(n, CategoryCounts{});
  }

  void accumulate(const TrackedEvent& ev) {
    if (!is_student_behavior(ev.category)) throw std::domain_error("accumulate: teacher is not a tracked behavior");
    if (ev.seat && !in_grid(*ev.seat)) throw std::domain_error("accumulate: seat " + ev.seat->str() + " outside grid");
    auto& list = ev.seat ? grid_[cell(*ev.seat)].events[behavior_index(ev.category)] : unassigned_;
    list.insert(std::upper_bound(list.begin(), list.end(), ev, event_order), ev);
    const std::size_t idx = sample_index(ev.t);
    extend_duration(static_cast<double>(idx + 1) * config_.sample_interval_s);
    ++timeline_[idx][behavior_index(ev.category)];
  }

  void accumulate(const BehaviorEvent& ev) { accumulate(TrackedEvent::from(ev)); }

  // Every event, grid first (row-major, category order), then unassigned.
  std::vector<TrackedEvent> all_events() const {
    std::vector<TrackedEvent> out;
    for (const auto& tr : grid_)
      for (const auto& list : tr.events) out.insert(out.end(), list.begin(), list.end());
    out.insert(out.end(), unassigned_.begin(), unassigned_.end());
    return out;
  }

  CategoryCounts totals() const {
    CategoryCounts out{};
    for (const auto& ev : all_events()) ++out[behavior_index(ev.category)];
    return out;
  }

 private:
  std::size_t cell(const SeatId& s) const {
    return static_cast<std::size_t>(s.row - 1) * static_cast<std::size_t>(config_.cols) +
           static_cast<std::size_t>(s.col - 1);
  }
  void check_seat(const SeatId& s) const {
    if (!in_grid(s)) throw std::domain_error("seat " + s.str() + " outside grid");
  }

  ClassroomConfig config_;
  std::string course_id_;
  double duration_s_ = 0.0;
  std::vector<SeatTracklet> grid_;
  std::vector<bool> occupancy_;
  std::vector<TrackedEvent> unassigned_;
  std::vector<CategoryCounts> timeline_;
  std::vector<FrameAnalysis> frames_;
};

// Laplace-smoothed positive share of events started at or before `up_to_t`:
// (P + 1) / (P + N + 2). Unoccupied seats have no score.
inline std::optional<double> engagement_score(const SeatTracklet& tracklet, bool occupied, double up_to_t) {
  if (!occupied) return std::nullopt;
  int pos = 0, neg = 0;
  for (auto c : kStudentBehaviors) {
    const auto& list = tracklet.events[behavior_index(c)];
    const int n = static_cast<int>(std::count_if(list.begin(), list.end(),
                                                 [&](const TrackedEvent& e) { return e.t <= up_to_t; }));
    if (is_positive(c)) pos += n;
    if (is_negative(c)) neg += n;
  }
  return static_cast<double>(pos + 1) / static_cast<double>(pos + neg + 2);
}

// Row-major R x C grid of engagement scores at time t.
inline std::vector<std::optional<double>> heatmap(const ClassSession& s, double t) {
  if (!(t >= 0.0 && t <= s.duration())) throw std::domain_error("heatmap: t outside [0, duration]");
  const auto& cfg = s.config();
  std::vector<std::optional<double>> out;
  out.reserve(cfg.seat_count());
  for (int r = 1; r <= cfg.rows; ++r)
    for (int c = 1; c <= cfg.cols; ++c) {
      const SeatId seat{r, c};
      out.push_back(engagement_score(s.tracklet(seat), s.occupied(seat), t));
    }
  return out;
}

// Time-ordered behaviors of one seat; equal times ordered by category name.
inline std::vector<std::pair<double, BehaviorCategory>> sequence(const ClassSession& s, const SeatId& seat) {
  const auto& tr = s.tracklet(seat);
  std::vector<std::pair<double, BehaviorCategory>> out;
  for (const auto& list : tr.events)
    for (const auto& ev : list) out.emplace_back(ev.t, ev.category);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return to_string(a.second) < to_string(b.second);
  });
  return out;
}

inline std::vector<CategoryCounts> flow(const ClassSession& s) { return s.timeline(); }

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json seat_json(const std::optional<SeatId>& s) {
  return s ? nlohmann::json(s->str()) : nlohmann::json(nullptr);
}

inline std::optional<SeatId> seat_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  auto s = parse_seat(j.get<std::string>());
  if (!s) throw std::invalid_argument("bad seat id: " + j.get<std::string>());
  return s;
}

inline nlohmann::json config_to_json(const ClassroomConfig& c) {
  nlohmann::json quad = nlohmann::json::array();
  for (const auto& p : c.rect_quad) {
    quad.push_back(p.x);
    quad.push_back(p.y);
  }
  return {{"image_w", c.image_w},
          {"image_h", c.image_h},
          {"rows", c.rows},
          {"cols", c.cols},
          {"k1", c.k1},
          {"k2", c.k2},
          {"principal_point", c.principal_point ? nlohmann::json{c.principal_point->x, c.principal_point->y}
                                                : nlohmann::json(nullptr)},
          {"rect_quad", quad},
          {"sample_interval_s", c.sample_interval_s},
          {"iou_threshold", c.iou_threshold},
          {"miss_tolerance_T", c.miss_tolerance_T},
          {"kp_conf_min", c.kp_conf_min},
          {"row_origin_front", c.row_origin_front},
          {"col_origin_left", c.col_origin_left},
          {"wrist_weight", c.wrist_weight},
          {"elbow_weight", c.elbow_weight},
          {"hand_box_expand", c.hand_box_expand},
          {"r_max_factor", c.r_max_factor}};
}

inline ClassroomConfig config_from_json(const nlohmann::json& j) {
  ClassroomConfig c;
  c.image_w = j.at("image_w").get<int>();
  c.image_h = j.at("image_h").get<int>();
  c.rows = j.at("rows").get<int>();
  c.cols = j.at("cols").get<int>();
  c.k1 = j.at("k1").get<double>();
  c.k2 = j.at("k2").get<double>();
  if (!j.at("principal_point").is_null())
    c.principal_point = Point2{j["principal_point"][0].get<double>(), j["principal_point"][1].get<double>()};
  const auto& q = j.at("rect_quad");
  if (q.size() != 8) throw std::invalid_argument("rect_quad expects 8 numbers");
  for (std::size_t i = 0; i < 4; ++i) c.rect_quad[i] = {q[2 * i].get<double>(), q[2 * i + 1].get<double>()};
  c.sample_interval_s = j.at("sample_interval_s").get<double>();
  c.iou_threshold = j.at("iou_threshold").get<double>();
  c.miss_tolerance_T = j.at("miss_tolerance_T").get<int>();
  c.kp_conf_min = j.at("kp_conf_min").get<double>();
  c.row_origin_front = j.at("row_origin_front").get<bool>();
  c.col_origin_left = j.at("col_origin_left").get<bool>();
  c.wrist_weight = j.value("wrist_weight", c.wrist_weight);
  c.elbow_weight = j.value("elbow_weight", c.elbow_weight);
  c.hand_box_expand = j.value("hand_box_expand", c.hand_box_expand);
  c.r_max_factor = j.value("r_max_factor", c.r_max_factor);
  validate_config(c);
  return c;
}

inline nlohmann::json event_to_json(const TrackedEvent& e) {
  return {{"cat", std::string(to_string(e.category))},
          {"seat", seat_json(e.seat)},
          {"start_frame", e.start_frame},
          {"end_frame", e.end_frame},
          {"t", e.t},
          {"end_t", e.end_t}};
}

inline TrackedEvent event_from_json(const nlohmann::json& j) {
  TrackedEvent e;
  auto cat = parse_category(j.at("cat").get<std::string>());
  if (!cat) throw std::invalid_argument("unknown category in session document");
  e.category = *cat;
  e.seat = seat_from_json(j.at("seat"));
  e.start_frame = j.at("start_frame").get<std::int64_t>();
  e.end_frame = j.at("end_frame").get<std::int64_t>();
  e.t = j.at("t").get<double>();
  e.end_t = j.at("end_t").get<double>();
  return e;
}

inline nlohmann::json session_to_json(const ClassSession& s) {
  const auto& cfg = s.config();
  nlohmann::json occ = nlohmann::json::array();
  for (int r = 1; r <= cfg.rows; ++r)
    for (int c = 1; c <= cfg.cols; ++c)
      if (s.occupied(SeatId{r, c})) occ.push_back(SeatId{r, c}.str());

  auto events = s.all_events();
  std::sort(events.begin(), events.end(), event_order);
  nlohmann::json evs = nlohmann::json::array();
  for (const auto& e : events) evs.push_back(event_to_json(e));

  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : s.frames()) {
    nlohmann::json seats = nlohmann::json::array();
    for (const auto& ps : f.pose_seats) seats.push_back(seat_json(ps));
    nlohmann::json hands = nlohmann::json::array();
    for (const auto& h : f.hands)
      hands.push_back({{"bbox", {h.bbox.x, h.bbox.y, h.bbox.w, h.bbox.h}},
                       {"matched", h.matched},
                       {"seat", seat_json(h.seat)}});
    frames.push_back({{"frame", f.frame_index}, {"t", f.t}, {"pose_seats", seats}, {"hands", hands}});
  }

  return {{"format", "classtrack.session"},
          {"format_version", kSessionFormatVersion},
          {"engine_version", kEngineVersion},
          {"course_id", s.course_id()},
          {"duration_s", s.duration()},
          {"config", config_to_json(cfg)},
          {"occupancy", occ},
          {"events", evs},
          {"frames", frames}};
}

inline std::string serialize_session(const ClassSession& s) { return session_to_json(s).dump() + "\n"; }

inline ClassSession session_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "classtrack.session") throw std::invalid_argument("not a session document");
  if (j.value("format_version", 0) != kSessionFormatVersion)
    throw std::invalid_argument("unsupported session format_version");
  ClassSession s(config_from_json(j.at("config")), j.at("course_id").get<std::string>());
  for (const auto& o : j.at("occupancy")) {
    auto seat = seat_from_json(o);
    if (!seat || !s.in_grid(*seat)) throw std::invalid_argument("occupancy seat outside grid");
    s.mark_occupied(*seat);
  }
  for (const auto& e : j.at("events")) s.accumulate(event_from_json(e));
  s.extend_duration(j.at("duration_s").get<double>());
  for (const auto& fj : j.at("frames")) {
    FrameAnalysis f;
    f.frame_index = fj.at("frame").get<std::int64_t>();
    f.t = fj.at("t").get<double>();
    for (const auto& ps : fj.at("pose_seats")) f.pose_seats.push_back(seat_from_json(ps));
    for (const auto& hj : fj.at("hands")) {
      HandMatchRecord h;
      const auto& b = hj.at("bbox");
      h.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      h.matched = hj.at("matched").get<bool>();
      h.seat = seat_from_json(hj.at("seat"));
      f.hands.push_back(h);
    }
    s.frames().push_back(std::move(f));
  }
  return s;
}

inline ClassSession parse_session(const std::string& text) { return session_from_json(nlohmann::json::parse(text)); }

}  // namespace classtrack
