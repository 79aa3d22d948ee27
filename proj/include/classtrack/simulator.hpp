#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "classtrack/config.hpp"
#include "classtrack/ingest.hpp"
#include "classtrack/seatmap.hpp"
#include "classtrack/tracker.hpp"
#include "classtrack/types.hpp"

namespace classtrack {

inline constexpr int kTruthFormatVersion = 1;

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ScriptedEvent {
  SeatId seat;
  BehaviorCategory category = BehaviorCategory::hand_raising;
  double start_t = 0.0;
  double duration_s = 0.0;
};

struct NoiseModel {
  double miss_prob = 0.0;              // per true detection per frame
  double keypoint_dropout = 0.0;       // per keypoint per frame
  double bbox_jitter_px = 0.0;         // sigma, applied to x, y, w, h
  double false_positive_rate = 0.0;    // expected spurious boxes per frame
  double position_jitter_pitch = 0.0;  // sigma of a student's position, in seat pitches
};

struct AutoEvents {
  int count = 0;
  std::map<BehaviorCategory, double> weights;  // empty = uniform over the five behaviors
  int min_frames = 2;
  int max_frames = 5;
};

struct ScenarioSpec {
  int rows = 5;
  int cols = 7;
  double duration_s = 2400.0;
  double sample_interval_s = 3.0;
  int image_w = 1920;
  int image_h = 1080;
  std::vector<SeatId> empty_seats;
  std::array<Point2, 4> rect_quad{Point2{420, 330}, Point2{1500, 330}, Point2{1780, 1000}, Point2{140, 1000}};
  double k1 = 0.0;
  double k2 = 0.0;
  NoiseModel noise;
  bool teacher = false;
  std::vector<ScriptedEvent> events;
  std::optional<AutoEvents> auto_events;
  int min_gap_frames = 3;  // quiet frames required between two events at one seat
  std::uint64_t seed = 1;

  std::size_t frame_count() const {
    return static_cast<std::size_t>(std::floor(duration_s / sample_interval_s + 1e-9));
  }
  bool occupied(const SeatId& s) const {
    return std::find(empty_seats.begin(), empty_seats.end(), s) == empty_seats.end();
  }

  ClassroomConfig classroom_config() const {
    ClassroomConfig cfg;
    cfg.image_w = image_w;
    cfg.image_h = image_h;
    cfg.rows = rows;
    cfg.cols = cols;
    cfg.k1 = k1;
    cfg.k2 = k2;
    cfg.rect_quad = rect_quad;
    cfg.sample_interval_s = sample_interval_s;
    return cfg;
  }
};

// Ground-truth event in frame units.
struct TruthEvent {
  SeatId seat;
  BehaviorCategory category = BehaviorCategory::hand_raising;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  double start_t = 0.0;
  double end_t = 0.0;
};

struct TruthPose {
  std::optional<SeatId> seat;  // empty for the teacher
  bool legal = false;          // locatable: survives validation
};

struct TruthHand {
  Box bbox;  // noise-free box
  SeatId seat;
};

struct TruthFrame {
  std::int64_t frame_index = 0;
  double t = 0.0;
  std::vector<TruthPose> poses;  // aligned with the emitted poses
  std::vector<TruthHand> hands;
};

struct GroundTruth {
  int rows = 0;
  int cols = 0;
  double sample_interval_s = 3.0;
  std::vector<TruthEvent> events;
  std::vector<TruthFrame> frames;
  std::size_t true_detections = 0;    // detections before the miss model
  std::size_t missed_detections = 0;  // removed by the miss model
};

struct SimulationResult {
  std::vector<FrameRecord> frames;
  GroundTruth truth;
};

namespace sim {

// Portable random source: mt19937_64 output is fixed by the standard, the
// conversions below are hand-rolled so streams match across libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }
  double normal() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
  std::optional<double> spare_;
};

enum class Posture { seated, standing, sleeping };

// Skeleton offsets in units of the local seat pitch, relative to the
// head/shoulder anchor. The seated upright head and shoulder joints average
// exactly to the anchor.
inline std::array<Point2, kNumKeypoints> seated_skeleton() {
  return {Point2{0.0, -0.09},  {-0.03, -0.11}, {0.03, -0.11}, {-0.06, -0.09}, {0.06, -0.09}, {-0.12, 0.245},
          {0.12, 0.245},       {-0.15, 0.42},  {0.15, 0.42},  {-0.09, 0.52},  {0.09, 0.52},  {-0.08, 0.62},
          {0.08, 0.62},        {-0.08, 0.9},   {0.08, 0.9},   {-0.08, 1.15},  {0.08, 1.15}};
}

struct StudentState {
  Posture posture = Posture::seated;
  bool hand_raised = false;
  bool raise_positive_side = true;
  bool face_event = false;  // yawning or smiling
};

struct Figure {
  std::array<Point2, kNumKeypoints> offsets{};
  std::array<bool, kNumKeypoints> visible{};
};

inline Figure build_figure(const StudentState& st) {
  Figure f;
  f.offsets = seated_skeleton();
  for (std::size_t k = 0; k <= kRightWrist; ++k) f.visible[k] = true;
  if (st.posture == Posture::sleeping) {
    f.offsets[kNose] = {0.0, 0.2};
    f.offsets[kLeftEye] = {-0.03, 0.17};
    f.offsets[kRightEye] = {0.03, 0.17};
    f.offsets[kLeftEar] = {-0.07, 0.15};
    f.offsets[kRightEar] = {0.07, 0.15};
    f.offsets[kLeftElbow] = {-0.2, 0.38};
    f.offsets[kRightElbow] = {0.2, 0.38};
    f.offsets[kLeftWrist] = {-0.05, 0.35};
    f.offsets[kRightWrist] = {0.05, 0.35};
  }
  if (st.hand_raised) {
    const double sgn = st.raise_positive_side ? 1.0 : -1.0;
    const std::size_t elbow = st.raise_positive_side ? kRightElbow : kLeftElbow;
    const std::size_t wrist = st.raise_positive_side ? kRightWrist : kLeftWrist;
    f.offsets[elbow] = {sgn * 0.15, 0.05};
    f.offsets[wrist] = {sgn * 0.16, -0.15};
  }
  if (st.posture == Posture::standing) {
    for (auto& p : f.offsets) p.y -= 0.18;
    f.visible[kLeftHip] = f.visible[kRightHip] = true;
  }
  return f;
}

inline Box bounds(const std::vector<Point2>& pts, double margin) {
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return {x0 - margin, y0 - margin, (x1 - x0) + 2 * margin, (y1 - y0) + 2 * margin};
}

}  // namespace sim

inline void validate_scenario(const ScenarioSpec& spec) {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw ScenarioError(std::string(what) + " must lie in [0,1]");
  };
  if (spec.rows < 1 || spec.cols < 1) throw ScenarioError("rows and cols must be >= 1");
  if (!(spec.sample_interval_s > 0.0)) throw ScenarioError("sample_interval_s must be positive");
  if (!(spec.duration_s >= spec.sample_interval_s)) throw ScenarioError("duration must cover at least one sample");
  prob(spec.noise.miss_prob, "miss_prob");
  prob(spec.noise.keypoint_dropout, "keypoint_dropout");
  if (spec.noise.bbox_jitter_px < 0.0) throw ScenarioError("bbox_jitter_px must be >= 0");
  if (spec.noise.false_positive_rate < 0.0) throw ScenarioError("false_positive_rate must be >= 0");
  if (spec.noise.position_jitter_pitch < 0.0) throw ScenarioError("position_jitter_pitch must be >= 0");
  if (!quad_is_convex(spec.rect_quad)) throw ScenarioError("rect_quad must be a convex quad");
  if (spec.min_gap_frames < 0) throw ScenarioError("min_gap_frames must be >= 0");
  for (const auto& s : spec.empty_seats)
    if (s.row > spec.rows || s.col > spec.cols) throw ScenarioError("empty seat " + s.str() + " outside grid");
  for (const auto& e : spec.events) {
    if (e.seat.row < 1 || e.seat.row > spec.rows || e.seat.col < 1 || e.seat.col > spec.cols)
      throw ScenarioError("event seat " + e.seat.str() + " outside grid");
    if (!spec.occupied(e.seat)) throw ScenarioError("event at empty seat " + e.seat.str());
    if (e.category == BehaviorCategory::teacher) throw ScenarioError("teacher is not a scripted behavior");
    if (e.start_t < 0.0 || e.duration_s <= 0.0 || e.start_t + e.duration_s > spec.duration_s + 1e-9)
      throw ScenarioError("event at " + e.seat.str() + " outside session duration");
  }
  if (spec.auto_events) {
    const auto& a = *spec.auto_events;
    if (a.count < 0 || a.min_frames < 1 || a.max_frames < a.min_frames)
      throw ScenarioError("auto_events: invalid count or frame range");
    for (const auto& [c, w] : a.weights)
      if (c == BehaviorCategory::teacher || w < 0.0) throw ScenarioError("auto_events: invalid category weight");
  }
}

namespace sim {

inline TruthEvent to_frames(const ScriptedEvent& e, double dt) {
  TruthEvent t;
  t.seat = e.seat;
  t.category = e.category;
  t.start_frame = static_cast<std::int64_t>(std::ceil(e.start_t / dt - 1e-9));
  t.end_frame = std::max(t.start_frame, static_cast<std::int64_t>(std::ceil((e.start_t + e.duration_s) / dt - 1e-9)) - 1);
  return t;
}

inline bool conflicts(const TruthEvent& a, const TruthEvent& b, int gap) {
  if (a.seat != b.seat) return false;
  // one behavior at a time per seat; repeats of a category need a quiet gap
  const int g = a.category == b.category ? gap : 0;
  return !(a.end_frame + g < b.start_frame || b.end_frame + g < a.start_frame);
}

}  // namespace sim

// Scripted events in frame units: the explicit list followed by the
// auto-generated schedule.
inline std::vector<TruthEvent> schedule_events(const ScenarioSpec& spec) {
  validate_scenario(spec);
  const auto n_frames = static_cast<std::int64_t>(spec.frame_count());
  std::vector<TruthEvent> out;
  for (const auto& e : spec.events) {
    auto te = sim::to_frames(e, spec.sample_interval_s);
    if (te.start_frame >= n_frames) throw ScenarioError("event at " + e.seat.str() + " starts after the last sample");
    te.end_frame = std::min(te.end_frame, n_frames - 1);
    for (const auto& o : out)
      if (sim::conflicts(o, te, spec.min_gap_frames))
        throw ScenarioError("overlapping or too-close events at seat " + e.seat.str());
    out.push_back(te);
  }
  if (spec.auto_events && spec.auto_events->count > 0) {
    const auto& a = *spec.auto_events;
    std::vector<SeatId> seats;
    for (int r = 1; r <= spec.rows; ++r)
      for (int c = 1; c <= spec.cols; ++c)
        if (spec.occupied(SeatId{r, c})) seats.push_back(SeatId{r, c});
    if (seats.empty()) throw ScenarioError("auto_events: no occupied seats");
    std::vector<std::pair<BehaviorCategory, double>> weights;
    for (auto c : kStudentBehaviors) {
      double w = a.weights.empty() ? 1.0 : (a.weights.count(c) ? a.weights.at(c) : 0.0);
      if (w > 0.0) weights.emplace_back(c, w);
    }
    if (weights.empty()) throw ScenarioError("auto_events: all category weights are zero");
    double wsum = 0.0;
    for (const auto& [c, w] : weights) wsum += w;

    sim::Rng rng(spec.seed ^ 0x5eedULL);
    int placed = 0;
    const int max_attempts = 200 * a.count + 1000;
    for (int attempt = 0; attempt < max_attempts && placed < a.count; ++attempt) {
      TruthEvent te;
      te.seat = seats[rng.index(seats.size())];
      double pick = rng.uniform() * wsum;
      te.category = weights.back().first;
      for (const auto& [c, w] : weights) {
        if (pick < w) {
          te.category = c;
          break;
        }
        pick -= w;
      }
      const auto len = static_cast<std::int64_t>(a.min_frames + rng.index(static_cast<std::size_t>(a.max_frames - a.min_frames + 1)));
      if (len > n_frames) continue;
      te.start_frame = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(n_frames - len + 1)));
      te.end_frame = te.start_frame + len - 1;
      bool ok = true;
      for (const auto& o : out)
        if (sim::conflicts(o, te, spec.min_gap_frames)) {
          ok = false;
          break;
        }
      if (!ok) continue;
      out.push_back(te);
      ++placed;
    }
    if (placed < a.count) throw ScenarioError("auto_events: could not place all events; lower the count");
  }
  for (auto& e : out) {
    e.start_t = static_cast<double>(e.start_frame) * spec.sample_interval_s;
    e.end_t = static_cast<double>(e.end_frame) * spec.sample_interval_s;
  }
  std::stable_sort(out.begin(), out.end(), [](const TruthEvent& a, const TruthEvent& b) {
    return std::tie(a.start_frame, a.seat) < std::tie(b.start_frame, b.seat);
  });
  return out;
}

// Synthesizes a detection stream with exact ground truth. Students sit at
// rectified seat centers mapped back into the image through the inverse
// rectification and, when k1/k2 are set, the inverse lens correction.
inline SimulationResult generate(const ScenarioSpec& spec) {
  const auto events = schedule_events(spec);
  const ClassroomConfig cfg = spec.classroom_config();
  const Homography to_image = rectification(cfg).inverse();
  const DistortionParams lens = DistortionParams::from_config(cfg);
  const auto n_frames = spec.frame_count();
  sim::Rng rng(spec.seed);

  auto seat_uv = [&](const SeatId& s) {
    return Point2{(s.col - 0.5) / spec.cols, (s.row - 0.5) / spec.rows};
  };
  auto undistorted_image = [&](Point2 uv) { return apply_homography(to_image, uv); };
  // Local seat pitch in the undistorted image: smaller of row and column spacing.
  auto local_pitch = [&](Point2 uv) {
    const Point2 p = undistorted_image(uv);
    const double du = distance(p, undistorted_image({uv.x + 1.0 / spec.cols, uv.y}));
    const double dv = distance(p, undistorted_image({uv.x, uv.y + 1.0 / spec.rows}));
    return std::min(du, dv);
  };
  auto observe = [&](Point2 p) { return distort(p, lens); };

  std::vector<SeatId> students;
  for (int r = 1; r <= spec.rows; ++r)
    for (int c = 1; c <= spec.cols; ++c)
      if (spec.occupied(SeatId{r, c})) students.push_back(SeatId{r, c});

  SimulationResult out;
  auto& truth = out.truth;
  truth.rows = spec.rows;
  truth.cols = spec.cols;
  truth.sample_interval_s = spec.sample_interval_s;
  truth.events = events;

  auto jitter_box = [&](Box b) {
    const double s = spec.noise.bbox_jitter_px;
    if (s <= 0.0) return b;
    b.x += s * rng.normal();
    b.y += s * rng.normal();
    b.w = std::max(1.0, b.w + s * rng.normal());
    b.h = std::max(1.0, b.h + s * rng.normal());
    return b;
  };

  for (std::size_t fi = 0; fi < n_frames; ++fi) {
    const auto frame_idx = static_cast<std::int64_t>(fi);
    FrameRecord rec;
    rec.frame_index = frame_idx;
    rec.t = static_cast<double>(fi) * spec.sample_interval_s;
    TruthFrame tf;
    tf.frame_index = frame_idx;
    tf.t = rec.t;
    std::vector<Detection> true_dets;

    for (const auto& seat : students) {
      sim::StudentState st;
      st.raise_positive_side = (seat.row + seat.col) % 2 == 0;
      std::vector<BehaviorCategory> active;
      for (const auto& e : events) {
        if (e.seat != seat || e.start_frame > frame_idx || e.end_frame < frame_idx) continue;
        active.push_back(e.category);
        switch (e.category) {
          case BehaviorCategory::standing: st.posture = sim::Posture::standing; break;
          case BehaviorCategory::sleeping: st.posture = sim::Posture::sleeping; break;
          case BehaviorCategory::hand_raising: st.hand_raised = true; break;
          default: st.face_event = true; break;
        }
      }

      Point2 uv = seat_uv(seat);
      if (spec.noise.position_jitter_pitch > 0.0) {
        uv.x += spec.noise.position_jitter_pitch / spec.cols * rng.normal();
        uv.y += spec.noise.position_jitter_pitch / spec.rows * rng.normal();
      }
      const Point2 anchor = undistorted_image(uv);
      const double pitch = local_pitch(uv);
      const auto fig = sim::build_figure(st);

      BodyPose pose;
      std::array<Point2, kNumKeypoints> img{};
      bool any_confident = false;
      for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        img[k] = observe({anchor.x + pitch * fig.offsets[k].x, anchor.y + pitch * fig.offsets[k].y});
        double conf = fig.visible[k] ? rng.uniform(0.55, 0.95) : 0.0;
        if (conf > 0.0 && spec.noise.keypoint_dropout > 0.0 && rng.bernoulli(spec.noise.keypoint_dropout)) conf = 0.0;
        pose.kps[k] = {img[k].x, img[k].y, conf};
        if (conf >= cfg.kp_conf_min) any_confident = true;
      }
      rec.poses.push_back(pose);
      tf.poses.push_back({seat, any_confident});

      auto pts = [&](std::initializer_list<std::size_t> ks) {
        std::vector<Point2> v;
        for (auto k : ks) v.push_back(img[k]);
        return v;
      };
      for (auto cat : active) {
        Box box;
        switch (cat) {
          case BehaviorCategory::hand_raising: {
            const std::size_t wrist = st.raise_positive_side ? kRightWrist : kLeftWrist;
            const Point2 w = img[wrist];
            box = {w.x - 0.1 * pitch, w.y - 0.1 * pitch, 0.2 * pitch, 0.3 * pitch};
            break;
          }
          case BehaviorCategory::standing:
            box = sim::bounds(pts({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}), 0.06 * pitch);
            break;
          case BehaviorCategory::sleeping:
            box = sim::bounds(pts({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 0.05 * pitch);
            break;
          default: {  // yawning, smiling: head-sized face box
            box = sim::bounds(pts({0, 1, 2, 3, 4}), 0.05 * pitch);
            const double h = std::max(box.h, 0.26 * pitch);
            box.y -= (h - box.h) / 2.0;
            box.h = h;
            break;
          }
        }
        if (cat == BehaviorCategory::hand_raising) tf.hands.push_back({box, seat});
        true_dets.push_back({cat, box, rng.uniform(0.5, 0.95)});
      }
    }

    if (spec.teacher) {
      // Teacher walks along the front, just outside the seating area.
      const double phase = std::fmod(static_cast<double>(fi) * 0.037, 2.0);
      const double u = 0.15 + 0.7 * (phase < 1.0 ? phase : 2.0 - phase);
      const Point2 uv{u, 1.0 + 0.6 / spec.rows};
      const Point2 anchor = undistorted_image(uv);
      const double pitch = local_pitch({u, 1.0 - 0.5 / spec.rows});
      sim::StudentState st;
      st.posture = sim::Posture::standing;
      auto fig = sim::build_figure(st);
      BodyPose pose;
      std::vector<Point2> all;
      for (std::size_t k = 0; k < kNumKeypoints; ++k) {
        const Point2 p = observe({anchor.x + pitch * fig.offsets[k].x, anchor.y + pitch * fig.offsets[k].y});
        pose.kps[k] = {p.x, p.y, rng.uniform(0.55, 0.95)};
        all.push_back(p);
      }
      rec.poses.push_back(pose);
      tf.poses.push_back({std::nullopt, false});
      true_dets.push_back({BehaviorCategory::teacher, sim::bounds(all, 0.06 * pitch), rng.uniform(0.6, 0.95)});
    }

    for (auto& det : true_dets) {
      ++truth.true_detections;
      if (spec.noise.miss_prob > 0.0 && rng.bernoulli(spec.noise.miss_prob)) {
        ++truth.missed_detections;
        continue;
      }
      det.bbox = jitter_box(det.bbox);
      rec.detections.push_back(det);
    }

    // Spurious boxes: random student behavior at a random spot in the room.
    double fp = spec.noise.false_positive_rate;
    int n_fp = static_cast<int>(std::floor(fp));
    if (rng.bernoulli(fp - std::floor(fp))) ++n_fp;
    for (int i = 0; i < n_fp; ++i) {
      const Point2 uv{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
      const Point2 c = observe(undistorted_image(uv));
      const double pitch = local_pitch(uv);
      const auto cat = kStudentBehaviors[rng.index(kNumStudentBehaviors)];
      const double w = pitch * rng.uniform(0.15, 0.45);
      const double h = pitch * rng.uniform(0.15, 0.45);
      rec.detections.push_back({cat, {c.x - w / 2, c.y - h / 2, w, h}, rng.uniform(0.3, 0.7)});
    }

    out.frames.push_back(std::move(rec));
    truth.frames.push_back(std::move(tf));
  }
  return out;
}

inline SimulationResult generate(ScenarioSpec spec, std::uint64_t seed) {
  spec.seed = seed;
  return generate(spec);
}

// ---------------------------------------------------------------------------
// Documents

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    s.rows = j.value("rows", s.rows);
    s.cols = j.value("cols", s.cols);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.sample_interval_s = j.value("sample_interval_s", s.sample_interval_s);
    s.image_w = j.value("image_w", s.image_w);
    s.image_h = j.value("image_h", s.image_h);
    s.teacher = j.value("teacher", s.teacher);
    s.min_gap_frames = j.value("min_gap_frames", s.min_gap_frames);
    s.seed = j.value("seed", s.seed);
    const auto empty = j.value("empty_seats", nlohmann::json::array());
    for (const auto& e : empty) {
      auto seat = parse_seat(e.get<std::string>());
      if (!seat) throw ScenarioError("bad seat id in empty_seats");
      s.empty_seats.push_back(*seat);
    }
    if (j.contains("camera")) {
      const auto& c = j["camera"];
      if (c.contains("rect_quad")) {
        const auto& q = c["rect_quad"];
        if (!q.is_array() || q.size() != 8) throw ScenarioError("camera.rect_quad expects 8 numbers");
        for (std::size_t i = 0; i < 4; ++i) s.rect_quad[i] = {q[2 * i].get<double>(), q[2 * i + 1].get<double>()};
      }
      s.k1 = c.value("k1", 0.0);
      s.k2 = c.value("k2", 0.0);
    }
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      s.noise.miss_prob = n.value("miss_prob", 0.0);
      s.noise.keypoint_dropout = n.value("keypoint_dropout", 0.0);
      s.noise.bbox_jitter_px = n.value("bbox_jitter_px", 0.0);
      s.noise.false_positive_rate = n.value("false_positive_rate", 0.0);
      s.noise.position_jitter_pitch = n.value("position_jitter_pitch", 0.0);
    }
    const auto scripted = j.value("events", nlohmann::json::array());
    for (const auto& e : scripted) {
      ScriptedEvent ev;
      auto seat = parse_seat(e.at("seat").get<std::string>());
      auto cat = parse_category(e.at("cat").get<std::string>());
      if (!seat || !cat) throw ScenarioError("bad seat or category in events");
      ev.seat = *seat;
      ev.category = *cat;
      ev.start_t = e.at("start_t").get<double>();
      ev.duration_s = e.at("duration_s").get<double>();
      s.events.push_back(ev);
    }
    if (j.contains("auto_events")) {
      const auto& a = j["auto_events"];
      AutoEvents ae;
      ae.count = a.value("count", 0);
      ae.min_frames = a.value("min_frames", ae.min_frames);
      ae.max_frames = a.value("max_frames", ae.max_frames);
      const auto weights = a.value("weights", nlohmann::json::object());
      for (const auto& [k, v] : weights.items()) {
        auto cat = parse_category(k);
        if (!cat) throw ScenarioError("auto_events: unknown category " + k);
        ae.weights[*cat] = v.get<double>();
      }
      s.auto_events = ae;
    }
    validate_scenario(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario document: ") + e.what());
  }
}

inline nlohmann::json truth_to_json(const GroundTruth& t) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : t.events)
    events.push_back({{"seat", e.seat.str()},
                      {"cat", std::string(to_string(e.category))},
                      {"start_frame", e.start_frame},
                      {"end_frame", e.end_frame},
                      {"start_t", e.start_t},
                      {"end_t", e.end_t}});
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : t.frames) {
    nlohmann::json poses = nlohmann::json::array();
    for (const auto& p : f.poses) poses.push_back({{"seat", seat_json(p.seat)}, {"legal", p.legal}});
    nlohmann::json hands = nlohmann::json::array();
    for (const auto& h : f.hands)
      hands.push_back({{"bbox", {h.bbox.x, h.bbox.y, h.bbox.w, h.bbox.h}}, {"seat", h.seat.str()}});
    frames.push_back({{"frame", f.frame_index}, {"t", f.t}, {"poses", poses}, {"hands", hands}});
  }
  return {{"format", "classtrack.truth"},
          {"format_version", kTruthFormatVersion},
          {"rows", t.rows},
          {"cols", t.cols},
          {"sample_interval_s", t.sample_interval_s},
          {"true_detections", t.true_detections},
          {"missed_detections", t.missed_detections},
          {"events", events},
          {"frames", frames}};
}

inline GroundTruth truth_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "classtrack.truth") throw std::invalid_argument("not a truth document");
  if (j.value("format_version", 0) != kTruthFormatVersion)
    throw std::invalid_argument("unsupported truth format_version");
  GroundTruth t;
  t.rows = j.at("rows").get<int>();
  t.cols = j.at("cols").get<int>();
  t.sample_interval_s = j.at("sample_interval_s").get<double>();
  t.true_detections = j.value("true_detections", std::size_t{0});
  t.missed_detections = j.value("missed_detections", std::size_t{0});
  for (const auto& e : j.at("events")) {
    TruthEvent te;
    auto seat = parse_seat(e.at("seat").get<std::string>());
    auto cat = parse_category(e.at("cat").get<std::string>());
    if (!seat || !cat) throw std::invalid_argument("bad truth event");
    te.seat = *seat;
    te.category = *cat;
    te.start_frame = e.at("start_frame").get<std::int64_t>();
    te.end_frame = e.at("end_frame").get<std::int64_t>();
    te.start_t = e.at("start_t").get<double>();
    te.end_t = e.at("end_t").get<double>();
    t.events.push_back(te);
  }
  for (const auto& fj : j.at("frames")) {
    TruthFrame f;
    f.frame_index = fj.at("frame").get<std::int64_t>();
    f.t = fj.at("t").get<double>();
    for (const auto& p : fj.at("poses")) f.poses.push_back({seat_from_json(p.at("seat")), p.at("legal").get<bool>()});
    for (const auto& h : fj.at("hands")) {
      const auto& b = h.at("bbox");
      auto seat = parse_seat(h.at("seat").get<std::string>());
      if (!seat) throw std::invalid_argument("bad truth hand seat");
      f.hands.push_back({{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()}, *seat});
    }
    t.frames.push_back(std::move(f));
  }
  return t;
}

}  // namespace classtrack
