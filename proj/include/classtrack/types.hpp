#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace classtrack {

// Detector categories. Only the first five are tracked; `teacher` boxes are
// used to exclude the teacher's pose from seat assignment.
enum class BehaviorCategory : std::uint8_t {
  hand_raising = 0,
  standing = 1,
  sleeping = 2,
  yawning = 3,
  smiling = 4,
  teacher = 5,
};

inline constexpr std::size_t kNumStudentBehaviors = 5;

inline constexpr std::array<BehaviorCategory, kNumStudentBehaviors> kStudentBehaviors = {
    BehaviorCategory::hand_raising, BehaviorCategory::standing, BehaviorCategory::sleeping,
    BehaviorCategory::yawning, BehaviorCategory::smiling};

inline constexpr std::string_view to_string(BehaviorCategory c) {
  switch (c) {
    case BehaviorCategory::hand_raising: return "hand_raising";
    case BehaviorCategory::standing: return "standing";
    case BehaviorCategory::sleeping: return "sleeping";
    case BehaviorCategory::yawning: return "yawning";
    case BehaviorCategory::smiling: return "smiling";
    case BehaviorCategory::teacher: return "teacher";
  }
  return "unknown";
}

inline std::optional<BehaviorCategory> parse_category(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(BehaviorCategory::teacher); ++i) {
    auto c = static_cast<BehaviorCategory>(i);
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

inline constexpr bool is_student_behavior(BehaviorCategory c) { return c != BehaviorCategory::teacher; }

inline constexpr bool is_positive(BehaviorCategory c) {
  return c == BehaviorCategory::hand_raising || c == BehaviorCategory::standing ||
         c == BehaviorCategory::smiling;
}

inline constexpr bool is_negative(BehaviorCategory c) {
  return c == BehaviorCategory::yawning || c == BehaviorCategory::sleeping;
}

// Index into per-behavior arrays; precondition: is_student_behavior(c).
inline constexpr std::size_t behavior_index(BehaviorCategory c) { return static_cast<std::size_t>(c); }

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Axis-aligned box, origin top-left, pixels.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  Point2 center() const { return {x + w / 2.0, y + h / 2.0}; }
  Point2 bottom_center() const { return {x + w / 2.0, y + h}; }

  // Closed containment: edges count as inside.
  bool contains(Point2 p) const { return p.x >= x && p.x <= right() && p.y >= y && p.y <= bottom(); }

  Box expanded(double frac_per_side) const {
    return {x - w * frac_per_side, y - h * frac_per_side, w * (1.0 + 2.0 * frac_per_side),
            h * (1.0 + 2.0 * frac_per_side)};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

struct Detection {
  BehaviorCategory category = BehaviorCategory::hand_raising;
  Box bbox;
  double confidence = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// COCO 17-keypoint order.
enum Keypoint : std::size_t {
  kNose = 0,
  kLeftEye,
  kRightEye,
  kLeftEar,
  kRightEar,
  kLeftShoulder,
  kRightShoulder,
  kLeftElbow,
  kRightElbow,
  kLeftWrist,
  kRightWrist,
  kLeftHip,
  kRightHip,
  kLeftKnee,
  kRightKnee,
  kLeftAnkle,
  kRightAnkle,
};

inline constexpr std::size_t kNumKeypoints = 17;

struct KeypointObs {
  double x = 0.0;
  double y = 0.0;
  double conf = 0.0;  // 0 means not detected

  Point2 point() const { return {x, y}; }
  friend bool operator==(const KeypointObs&, const KeypointObs&) = default;
};

struct BodyPose {
  std::array<KeypointObs, kNumKeypoints> kps{};

  bool confident(std::size_t k, double conf_min) const { return kps[k].conf > 0.0 && kps[k].conf >= conf_min; }

  std::size_t confident_count(double conf_min) const {
    std::size_t n = 0;
    for (std::size_t k = 0; k < kNumKeypoints; ++k) n += confident(k, conf_min) ? 1 : 0;
    return n;
  }

  friend bool operator==(const BodyPose&, const BodyPose&) = default;
};

struct FrameRecord {
  std::int64_t frame_index = 0;
  double t = 0.0;
  std::vector<Detection> detections;
  std::vector<BodyPose> poses;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

// Row/column seat identity, 1-based, rendered "RxCy".
struct SeatId {
  int row = 1;
  int col = 1;

  std::string str() const { return "R" + std::to_string(row) + "C" + std::to_string(col); }

  friend auto operator<=>(const SeatId&, const SeatId&) = default;
};

inline std::optional<SeatId> parse_seat(std::string_view s) {
  if (s.size() < 4 || s[0] != 'R') return std::nullopt;
  auto c_pos = s.find('C');
  if (c_pos == std::string_view::npos || c_pos < 2 || c_pos + 1 >= s.size()) return std::nullopt;
  auto parse_int = [](std::string_view d) -> std::optional<int> {
    if (d.empty() || d.size() > 6) return std::nullopt;
    int v = 0;
    for (char ch : d) {
      if (ch < '0' || ch > '9') return std::nullopt;
      v = v * 10 + (ch - '0');
    }
    return v;
  };
  auto r = parse_int(s.substr(1, c_pos - 1));
  auto c = parse_int(s.substr(c_pos + 1));
  if (!r || !c || *r < 1 || *c < 1) return std::nullopt;
  return SeatId{*r, *c};
}

}  // namespace classtrack
