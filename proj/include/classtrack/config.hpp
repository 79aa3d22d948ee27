#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "classtrack/types.hpp"

namespace classtrack {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Camera and room geometry plus pipeline thresholds for one classroom.
//
// `rect_quad` holds the seating-area corners in the (undistorted) image in the
// order TL, TR, BR, BL; they map to (0,0), (1,0), (1,1), (0,1) of the rectified
// unit square. Rows run along rectified y, columns along rectified x.
struct ClassroomConfig {
  int image_w = 1920;
  int image_h = 1080;
  int rows = 1;
  int cols = 1;
  double k1 = 0.0;
  double k2 = 0.0;
  std::optional<Point2> principal_point;  // defaults to the image center
  std::array<Point2, 4> rect_quad{Point2{0, 0}, Point2{1920, 0}, Point2{1920, 1080}, Point2{0, 1080}};
  double sample_interval_s = 3.0;
  double iou_threshold = 0.2;
  int miss_tolerance_T = 2;
  double kp_conf_min = 0.3;
  bool row_origin_front = true;
  bool col_origin_left = true;

  // Hand-raising matcher weights.
  double wrist_weight = 3.0;
  double elbow_weight = 2.0;
  double hand_box_expand = 0.2;
  double r_max_factor = 2.0;

  Point2 center() const { return principal_point.value_or(Point2{image_w / 2.0, image_h / 2.0}); }
  double image_diagonal() const { return std::hypot(static_cast<double>(image_w), static_cast<double>(image_h)); }
  std::size_t seat_count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

namespace detail {

inline double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

}  // namespace detail

// True when the four points form a strictly convex quadrilateral in the given
// cyclic order (either orientation) with no three points collinear.
inline bool quad_is_convex(const std::array<Point2, 4>& q) {
  double scale = 0.0;
  for (const auto& p : q) scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  const double eps = 1e-12 * std::max(1.0, scale * scale);
  // every triple, not only consecutive ones, must be non-collinear
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      for (std::size_t k = j + 1; k < 4; ++k)
        if (std::abs(detail::cross(q[i], q[j], q[k])) <= eps) return false;
  int sign = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    double c = detail::cross(q[i], q[(i + 1) % 4], q[(i + 2) % 4]);
    int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

inline void validate_config(const ClassroomConfig& cfg) {
  if (cfg.image_w <= 0 || cfg.image_h <= 0) throw ConfigError("image_w and image_h must be positive");
  if (cfg.rows < 1 || cfg.cols < 1) throw ConfigError("rows and cols must be >= 1");
  if (!(cfg.iou_threshold > 0.0 && cfg.iou_threshold < 1.0)) throw ConfigError("iou_threshold must lie in (0,1)");
  if (cfg.miss_tolerance_T < 0) throw ConfigError("miss_tolerance_T must be >= 0");
  if (!(cfg.sample_interval_s > 0.0)) throw ConfigError("sample_interval_s must be positive");
  if (!(cfg.kp_conf_min >= 0.0 && cfg.kp_conf_min <= 1.0)) throw ConfigError("kp_conf_min must lie in [0,1]");
  if (cfg.hand_box_expand < 0.0) throw ConfigError("hand_box_expand must be >= 0");
  if (!(cfg.r_max_factor > 0.0)) throw ConfigError("r_max_factor must be positive");
  if (!quad_is_convex(cfg.rect_quad)) throw ConfigError("rect_quad must be convex with no three points collinear");
}

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_numbers(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::string token;
  std::istringstream in(value);
  while (in >> token) {
    if (!token.empty() && token.back() == ',') token.pop_back();
    if (token.empty()) continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size())
      throw ConfigError("config key '" + key + "': not a number: '" + token + "'");
    out.push_back(v);
  }
  return out;
}

inline double parse_scalar(const std::string& key, const std::string& value) {
  auto v = parse_numbers(key, value);
  if (v.size() != 1) throw ConfigError("config key '" + key + "' expects one number");
  return v[0];
}

inline int parse_int(const std::string& key, const std::string& value) {
  double v = parse_scalar(key, value);
  if (v != std::floor(v)) throw ConfigError("config key '" + key + "' expects an integer");
  return static_cast<int>(v);
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "' expects true/false");
}

// Shortest text that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Parses the flat `key = value` format. Lines starting with '#' are comments.
inline ClassroomConfig parse_config(const std::string& text) {
  ClassroomConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));

    if (key == "image_w") cfg.image_w = detail::parse_int(key, value);
    else if (key == "image_h") cfg.image_h = detail::parse_int(key, value);
    else if (key == "rows") cfg.rows = detail::parse_int(key, value);
    else if (key == "cols") cfg.cols = detail::parse_int(key, value);
    else if (key == "k1") cfg.k1 = detail::parse_scalar(key, value);
    else if (key == "k2") cfg.k2 = detail::parse_scalar(key, value);
    else if (key == "principal_point") {
      auto v = detail::parse_numbers(key, value);
      if (v.size() != 2) throw ConfigError("principal_point expects 2 numbers");
      cfg.principal_point = Point2{v[0], v[1]};
    } else if (key == "rect_quad") {
      auto v = detail::parse_numbers(key, value);
      if (v.size() != 8) throw ConfigError("rect_quad expects 8 numbers (TL, TR, BR, BL)");
      for (std::size_t i = 0; i < 4; ++i) cfg.rect_quad[i] = {v[2 * i], v[2 * i + 1]};
    } else if (key == "sample_interval_s") cfg.sample_interval_s = detail::parse_scalar(key, value);
    else if (key == "iou_threshold") cfg.iou_threshold = detail::parse_scalar(key, value);
    else if (key == "miss_tolerance_T") cfg.miss_tolerance_T = detail::parse_int(key, value);
    else if (key == "kp_conf_min") cfg.kp_conf_min = detail::parse_scalar(key, value);
    else if (key == "row_origin_front") cfg.row_origin_front = detail::parse_bool(key, value);
    else if (key == "col_origin_left") cfg.col_origin_left = detail::parse_bool(key, value);
    else if (key == "wrist_weight") cfg.wrist_weight = detail::parse_scalar(key, value);
    else if (key == "elbow_weight") cfg.elbow_weight = detail::parse_scalar(key, value);
    else if (key == "hand_box_expand") cfg.hand_box_expand = detail::parse_scalar(key, value);
    else if (key == "r_max_factor") cfg.r_max_factor = detail::parse_scalar(key, value);
    else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  validate_config(cfg);
  return cfg;
}

inline ClassroomConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string serialize_config(const ClassroomConfig& cfg) {
  using detail::fmt_double;
  std::ostringstream os;
  os << "image_w = " << cfg.image_w << "\n"
     << "image_h = " << cfg.image_h << "\n"
     << "rows = " << cfg.rows << "\n"
     << "cols = " << cfg.cols << "\n"
     << "k1 = " << fmt_double(cfg.k1) << "\n"
     << "k2 = " << fmt_double(cfg.k2) << "\n";
  if (cfg.principal_point)
    os << "principal_point = " << fmt_double(cfg.principal_point->x) << " " << fmt_double(cfg.principal_point->y)
       << "\n";
  os << "rect_quad =";
  for (const auto& p : cfg.rect_quad) os << " " << fmt_double(p.x) << " " << fmt_double(p.y);
  os << "\n"
     << "sample_interval_s = " << fmt_double(cfg.sample_interval_s) << "\n"
     << "iou_threshold = " << fmt_double(cfg.iou_threshold) << "\n"
     << "miss_tolerance_T = " << cfg.miss_tolerance_T << "\n"
     << "kp_conf_min = " << fmt_double(cfg.kp_conf_min) << "\n"
     << "row_origin_front = " << (cfg.row_origin_front ? "true" : "false") << "\n"
     << "col_origin_left = " << (cfg.col_origin_left ? "true" : "false") << "\n"
     << "wrist_weight = " << fmt_double(cfg.wrist_weight) << "\n"
     << "elbow_weight = " << fmt_double(cfg.elbow_weight) << "\n"
     << "hand_box_expand = " << fmt_double(cfg.hand_box_expand) << "\n"
     << "r_max_factor = " << fmt_double(cfg.r_max_factor) << "\n";
  return os.str();
}

}  // namespace classtrack
