#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "classtrack/config.hpp"
#include "classtrack/types.hpp"

namespace classtrack {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class OrderingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double json_number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw std::invalid_argument(std::string(what) + " must be a number");
  return j.get<double>();
}

inline Detection detection_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("detection must be an object");
  if (!j.contains("cat")) throw std::invalid_argument("detection missing \"cat\"");
  if (!j.contains("bbox")) throw std::invalid_argument("detection missing \"bbox\"");
  if (!j.contains("conf")) throw std::invalid_argument("detection missing \"conf\"");
  if (!j["cat"].is_string()) throw std::invalid_argument("\"cat\" must be a string");
  auto cat = parse_category(j["cat"].get<std::string>());
  if (!cat) throw std::invalid_argument("unknown category \"" + j["cat"].get<std::string>() + "\"");
  const auto& b = j["bbox"];
  if (!b.is_array() || b.size() != 4) throw std::invalid_argument("\"bbox\" must be [x,y,w,h]");
  Detection d;
  d.category = *cat;
  d.bbox = {json_number(b[0], "bbox"), json_number(b[1], "bbox"), json_number(b[2], "bbox"),
            json_number(b[3], "bbox")};
  d.confidence = json_number(j["conf"], "conf");
  return d;
}

inline BodyPose pose_from_json(const nlohmann::json& j, std::size_t pose_index) {
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("pose " + std::to_string(pose_index) + ": " + msg);
  };
  if (!j.is_object() || !j.contains("kps")) fail("missing \"kps\"");
  const auto& kps = j["kps"];
  if (!kps.is_array()) fail("\"kps\" must be an array");
  if (kps.size() != kNumKeypoints)
    fail("expected 17 keypoints, got " + std::to_string(kps.size()));
  BodyPose p;
  for (std::size_t k = 0; k < kNumKeypoints; ++k) {
    const auto& kp = kps[k];
    if (!kp.is_array() || kp.size() != 3) fail("keypoint " + std::to_string(k) + " must be [x,y,conf]");
    p.kps[k] = {json_number(kp[0], "keypoint"), json_number(kp[1], "keypoint"), json_number(kp[2], "keypoint")};
  }
  return p;
}

}  // namespace detail

inline nlohmann::json frame_to_json(const FrameRecord& rec) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : rec.detections) {
    dets.push_back({{"cat", std::string(to_string(d.category))},
                    {"bbox", {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h}},
                    {"conf", d.confidence}});
  }
  nlohmann::json poses = nlohmann::json::array();
  for (const auto& p : rec.poses) {
    nlohmann::json kps = nlohmann::json::array();
    for (const auto& kp : p.kps) kps.push_back({kp.x, kp.y, kp.conf});
    poses.push_back({{"kps", std::move(kps)}});
  }
  return {{"frame", rec.frame_index}, {"t", rec.t}, {"detections", std::move(dets)}, {"poses", std::move(poses)}};
}

// One stream line (no trailing newline).
inline std::string serialize_frame(const FrameRecord& rec) { return frame_to_json(rec).dump(); }

inline FrameRecord parse_frame_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed record: ") + e.what());
  }
  try {
    if (!j.is_object()) throw std::invalid_argument("record must be an object");
    for (const char* key : {"frame", "t", "detections", "poses"})
      if (!j.contains(key)) throw std::invalid_argument(std::string("missing \"") + key + "\"");
    if (!j["frame"].is_number_integer()) throw std::invalid_argument("\"frame\" must be an integer");
    FrameRecord rec;
    rec.frame_index = j["frame"].get<std::int64_t>();
    if (rec.frame_index < 0) throw std::invalid_argument("\"frame\" must be non-negative");
    rec.t = detail::json_number(j["t"], "\"t\"");
    if (!j["detections"].is_array()) throw std::invalid_argument("\"detections\" must be an array");
    if (!j["poses"].is_array()) throw std::invalid_argument("\"poses\" must be an array");
    for (const auto& d : j["detections"]) rec.detections.push_back(detail::detection_from_json(d));
    std::size_t idx = 0;
    for (const auto& p : j["poses"]) rec.poses.push_back(detail::pose_from_json(p, idx++));
    return rec;
  } catch (const std::invalid_argument& e) {
    throw ParseError(line_no, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, e.what());
  }
}

// Pulls one FrameRecord at a time from a line-delimited stream. Blank lines
// are skipped but still counted for error line numbers.
class StreamReader {
 public:
  explicit StreamReader(std::istream& in) : in_(in) {}

  std::optional<FrameRecord> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      return parse_frame_line(line, line_no_);
    }
    return std::nullopt;
  }

  std::size_t line_number() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

inline std::vector<FrameRecord> parse_stream(std::istream& in) {
  std::vector<FrameRecord> out;
  StreamReader reader(in);
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

inline void write_stream(std::ostream& out, const std::vector<FrameRecord>& frames) {
  for (const auto& f : frames) out << serialize_frame(f) << '\n';
}

struct ValidationResult {
  FrameRecord frame;
  // Indices into the input record of the detections/poses that survived.
  std::vector<std::size_t> kept_detections;
  std::vector<std::size_t> kept_poses;
  std::size_t dropped_detections = 0;
  std::size_t dropped_poses = 0;
  std::vector<std::string> warnings;
};

inline bool box_intersects_image(const Box& b, const ClassroomConfig& cfg) {
  return b.x < cfg.image_w && b.right() > 0.0 && b.y < cfg.image_h && b.bottom() > 0.0;
}

// Filters invalid detections and poses; survivors are copied unchanged.
inline ValidationResult validate_frame(const FrameRecord& rec, const ClassroomConfig& cfg,
                                       std::optional<std::int64_t> prev_index) {
  if (prev_index && rec.frame_index <= *prev_index)
    throw OrderingError("frame index " + std::to_string(rec.frame_index) + " does not follow " +
                        std::to_string(*prev_index));
  ValidationResult out;
  out.frame.frame_index = rec.frame_index;
  out.frame.t = rec.t;
  for (std::size_t i = 0; i < rec.detections.size(); ++i) {
    const auto& d = rec.detections[i];
    std::string why;
    if (!(d.bbox.w > 0.0 && d.bbox.h > 0.0)) why = "non-positive size";
    else if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) why = "confidence outside [0,1]";
    else if (!box_intersects_image(d.bbox, cfg)) why = "bbox outside image";
    if (!why.empty()) {
      ++out.dropped_detections;
      out.warnings.push_back("frame " + std::to_string(rec.frame_index) + ": detection " + std::to_string(i) +
                             " rejected (" + why + ")");
      continue;
    }
    out.kept_detections.push_back(i);
    out.frame.detections.push_back(d);
  }
  for (std::size_t i = 0; i < rec.poses.size(); ++i) {
    if (rec.poses[i].confident_count(cfg.kp_conf_min) == 0) {
      ++out.dropped_poses;
      continue;
    }
    out.kept_poses.push_back(i);
    out.frame.poses.push_back(rec.poses[i]);
  }
  if (out.dropped_poses > 0)
    out.warnings.push_back("frame " + std::to_string(rec.frame_index) + ": dropped " +
                           std::to_string(out.dropped_poses) + " pose(s) without confident keypoints");
  return out;
}

// Stateful wrapper enforcing ordering and sampling cadence across a stream.
class StreamValidator {
 public:
  explicit StreamValidator(const ClassroomConfig& cfg) : cfg_(cfg) {}

  ValidationResult operator()(const FrameRecord& rec) {
    auto out = validate_frame(rec, cfg_, prev_index_);
    if (prev_t_) {
      if (rec.t < *prev_t_)
        throw OrderingError("frame " + std::to_string(rec.frame_index) + ": time decreases");
      double gap = rec.t - *prev_t_;
      if (std::abs(gap - cfg_.sample_interval_s) > 0.1 * cfg_.sample_interval_s)
        out.warnings.push_back("frame " + std::to_string(rec.frame_index) + ": sample gap " + std::to_string(gap) +
                               " s deviates from interval");
    }
    prev_index_ = rec.frame_index;
    prev_t_ = rec.t;
    return out;
  }

 private:
  ClassroomConfig cfg_;
  std::optional<std::int64_t> prev_index_;
  std::optional<double> prev_t_;
};

}  // namespace classtrack
