#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "classtrack/config.hpp"
#include "classtrack/types.hpp"

namespace classtrack {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Representative point

// Mean of the confident head/shoulder joints (nose, eyes, ears, shoulders);
// falls back to the mean of all confident joints when none of those are seen.
inline Point2 representative_point(const BodyPose& pose, double kp_conf_min) {
  auto mean_over = [&](std::size_t begin, std::size_t end) -> std::optional<Point2> {
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (std::size_t k = begin; k < end; ++k) {
      if (!pose.confident(k, kp_conf_min)) continue;
      sx += pose.kps[k].x;
      sy += pose.kps[k].y;
      ++n;
    }
    if (n == 0) return std::nullopt;
    return Point2{sx / n, sy / n};
  };
  if (auto upper = mean_over(kNose, kRightShoulder + 1)) return *upper;
  if (auto any = mean_over(0, kNumKeypoints)) return *any;
  throw std::domain_error("representative_point: pose has no confident keypoints");
}

// ---------------------------------------------------------------------------
// Lens distortion (division model)

struct DistortionParams {
  double k1 = 0.0;
  double k2 = 0.0;
  Point2 center;
  double norm_radius = 1.0;

  static DistortionParams from_config(const ClassroomConfig& cfg) {
    return {cfg.k1, cfg.k2, cfg.center(), cfg.image_diagonal() / 2.0};
  }
  bool is_identity() const { return k1 == 0.0 && k2 == 0.0; }
};

// p' = c + (p - c) / (1 + k1 r^2 + k2 r^4), r = |p - c| / norm_radius.
inline Point2 undistort(Point2 p, const DistortionParams& d) {
  if (!(d.norm_radius > 0.0)) throw GeometryError("undistort: norm_radius must be positive");
  if (d.is_identity()) return p;
  const double dx = p.x - d.center.x;
  const double dy = p.y - d.center.y;
  const double r2 = (dx * dx + dy * dy) / (d.norm_radius * d.norm_radius);
  const double denom = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
  if (denom <= 1e-9) throw GeometryError("undistort: degenerate distortion denominator");
  return {d.center.x + dx / denom, d.center.y + dy / denom};
}

// Inverse of undistort: finds the observed point whose correction is p.
inline Point2 distort(Point2 p, const DistortionParams& d) {
  if (!(d.norm_radius > 0.0)) throw GeometryError("distort: norm_radius must be positive");
  if (d.is_identity()) return p;
  const double dx = p.x - d.center.x;
  const double dy = p.y - d.center.y;
  const double ru = std::hypot(dx, dy) / d.norm_radius;
  if (ru == 0.0) return p;
  // solve f(rd) = rd / (1 + k1 rd^2 + k2 rd^4) - ru = 0 by Newton from rd = ru
  double rd = ru;
  for (int it = 0; it < 100; ++it) {
    const double r2 = rd * rd;
    const double g = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
    const double dg = 2.0 * d.k1 * rd + 4.0 * d.k2 * r2 * rd;
    const double f = rd / g - ru;
    const double df = (g - rd * dg) / (g * g);
    if (g <= 1e-9 || df == 0.0) break;
    const double step = f / df;
    rd -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, rd)) {
      const double s = rd / ru;
      return {d.center.x + dx * s, d.center.y + dy * s};
    }
  }
  throw GeometryError("distort: no convergent inverse for this radius");
}

// ---------------------------------------------------------------------------
// Homography

struct Homography {
  // Row-major 3x3, bottom-right entry normalized to 1.
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d h;
    h << m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8];
    return h;
  }

  static Homography from_matrix(const Eigen::Matrix3d& h) {
    if (std::abs(h(2, 2)) <= 1e-12) throw GeometryError("homography: cannot normalize, h22 is zero");
    Eigen::Matrix3d n = h / h(2, 2);
    if (std::abs(n.determinant()) <= 1e-12) throw GeometryError("homography: singular matrix");
    Homography out;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out.m[static_cast<std::size_t>(r * 3 + c)] = n(r, c);
    return out;
  }

  Homography inverse() const { return from_matrix(matrix().inverse()); }

  friend bool operator==(const Homography&, const Homography&) = default;
};

inline Point2 apply_homography(const Homography& h, Point2 p) {
  const auto& m = h.m;
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (std::abs(w) <= 1e-12) throw GeometryError("apply_homography: point maps to infinity");
  return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

namespace detail {

// Similarity transform moving the centroid to the origin and the mean
// distance to sqrt(2).
inline Eigen::Matrix3d normalizing_transform(const std::array<Point2, 4>& pts) {
  double cx = 0, cy = 0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= 4.0;
  cy /= 4.0;
  double mean_dist = 0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= 4.0;
  if (mean_dist <= 0.0) throw GeometryError("solve_homography: coincident points");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

}  // namespace detail

// Four-point homography mapping src[i] to dst[i] exactly, from the 8-unknown
// linear system (h22 fixed to 1) in normalized coordinates.
inline Homography solve_homography(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst) {
  if (!quad_is_convex(src) || !quad_is_convex(dst))
    throw GeometryError("solve_homography: degenerate quad (not convex or three points collinear)");
  const Eigen::Matrix3d ts = detail::normalizing_transform(src);
  const Eigen::Matrix3d td = detail::normalizing_transform(dst);
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double x = s.x(), y = s.y(), u = d.x(), v = d.y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  lu.setThreshold(1e-12);
  if (lu.rank() < 8) throw GeometryError("solve_homography: singular system");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return Homography::from_matrix(td.inverse() * hn * ts);
}

inline constexpr std::array<Point2, 4> kUnitSquare{Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}};

// Image (undistorted) -> rectified unit square.
inline Homography rectification(const ClassroomConfig& cfg) { return solve_homography(cfg.rect_quad, kUnitSquare); }

// ---------------------------------------------------------------------------
// 1-D K-means

class InfeasibleK : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KMeans1D {
  std::vector<int> labels;     // per input value, 0..k-1, ordered by center
  std::vector<double> centers; // ascending

  double wcss(const std::vector<double>& values) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - centers[static_cast<std::size_t>(labels[i])];
      s += d * d;
    }
    return s;
  }
};

inline std::size_t distinct_count(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return static_cast<std::size_t>(std::unique(values.begin(), values.end()) - values.begin());
}

// Optimal 1-D K-means. The globally optimal contiguous partition of the sorted
// values is found by dynamic programming over split points, then polished with
// Lloyd iterations (nearest center, ties to the lower center) until the
// assignment is stable or 100 iterations pass. Deterministic.
inline KMeans1D kmeans_1d(const std::vector<double>& values, int k) {
  if (values.empty()) throw InfeasibleK("kmeans_1d: no values");
  if (k < 1) throw InfeasibleK("kmeans_1d: k must be >= 1");
  const std::size_t n = values.size();
  const auto kk = static_cast<std::size_t>(k);
  if (kk > distinct_count(values)) throw InfeasibleK("kmeans_1d: k exceeds the number of distinct values");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = values[order[i]];

  // Shift by the median to keep the prefix sums well conditioned.
  const double shift = sorted[n / 2];
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = sorted[i] - shift;
    s1[i + 1] = s1[i] + v;
    s2[i + 1] = s2[i] + v * v;
  }
  auto cost = [&](std::size_t i, std::size_t j) {  // sorted[i, j)
    const double m = static_cast<double>(j - i);
    const double sum = s1[j] - s1[i];
    return std::max(0.0, (s2[j] - s2[i]) - sum * sum / m);
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // dp[c][j]: best cost of splitting sorted[0, j) into c clusters.
  std::vector<std::vector<double>> dp(kk + 1, std::vector<double>(n + 1, kInf));
  std::vector<std::vector<std::size_t>> split(kk + 1, std::vector<std::size_t>(n + 1, 0));
  dp[0][0] = 0.0;
  for (std::size_t c = 1; c <= kk; ++c) {
    for (std::size_t j = c; j <= n; ++j) {
      for (std::size_t i = c - 1; i < j; ++i) {
        if (dp[c - 1][i] == kInf) continue;
        const double v = dp[c - 1][i] + cost(i, j);
        if (v < dp[c][j]) {
          dp[c][j] = v;
          split[c][j] = i;
        }
      }
    }
  }

  std::vector<double> centers(kk, 0.0);
  {
    std::size_t j = n;
    for (std::size_t c = kk; c >= 1; --c) {
      const std::size_t i = split[c][j];
      double sum = 0.0;
      for (std::size_t t = i; t < j; ++t) sum += sorted[t];
      centers[c - 1] = sum / static_cast<double>(j - i);
      j = i;
    }
  }

  std::vector<int> sorted_labels(n, -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) {
      // centers ascend and sorted values ascend, so the nearest center index is monotone
      while (c + 1 < kk && std::abs(sorted[i] - centers[c + 1]) < std::abs(sorted[i] - centers[c])) ++c;
      if (sorted_labels[i] != static_cast<int>(c)) {
        sorted_labels[i] = static_cast<int>(c);
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sum(kk, 0.0);
    std::vector<std::size_t> cnt(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(sorted_labels[i])] += sorted[i];
      ++cnt[static_cast<std::size_t>(sorted_labels[i])];
    }
    for (std::size_t c2 = 0; c2 < kk; ++c2)
      if (cnt[c2] > 0) centers[c2] = sum[c2] / static_cast<double>(cnt[c2]);
  }

  KMeans1D out;
  out.centers = centers;
  out.labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) out.labels[order[i]] = sorted_labels[i];
  return out;
}

// ---------------------------------------------------------------------------
// Seat assignment

namespace detail {

// Order-preserving injective map of ascending cluster centers onto `slots`
// evenly spaced reference centers (i + 0.5) / slots, minimizing squared
// distance. When every center's nearest reference is distinct this is the
// nearest-reference map.
inline std::vector<int> map_to_reference(const std::vector<double>& centers, int slots) {
  const std::size_t k = centers.size();
  const auto s = static_cast<std::size_t>(slots);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  auto ref = [&](std::size_t i) { return (static_cast<double>(i) + 0.5) / slots; };
  // best[c][r]: cost of placing centers[0..c] with center c at slot r
  std::vector<std::vector<double>> best(k, std::vector<double>(s, kInf));
  std::vector<std::vector<std::size_t>> from(k, std::vector<std::size_t>(s, 0));
  for (std::size_t r = 0; r < s; ++r) best[0][r] = std::pow(centers[0] - ref(r), 2);
  for (std::size_t c = 1; c < k; ++c) {
    double run = kInf;
    std::size_t arg = 0;
    for (std::size_t r = c; r < s; ++r) {
      if (best[c - 1][r - 1] < run) {
        run = best[c - 1][r - 1];
        arg = r - 1;
      }
      if (run == kInf) continue;
      best[c][r] = run + std::pow(centers[c] - ref(r), 2);
      from[c][r] = arg;
    }
  }
  std::size_t r = 0;
  for (std::size_t i = 1; i < s; ++i)
    if (best[k - 1][i] < best[k - 1][r]) r = i;
  std::vector<int> out(k);
  for (std::size_t c = k; c-- > 0;) {
    out[c] = static_cast<int>(r);
    if (c > 0) r = from[c][r];
  }
  return out;
}

// Labels rectified coordinates with absolute 1-based indices in [1, slots].
inline std::vector<int> label_axis(const std::vector<double>& values, int slots, bool origin_low) {
  int k = std::min<int>(slots, static_cast<int>(distinct_count(values)));
  const double min_gap = 0.5 / slots;
  KMeans1D km = kmeans_1d(values, k);
  // Clusters closer than half a seat pitch belong to the same physical line.
  while (k > 1) {
    bool crowded = false;
    for (std::size_t i = 1; i < km.centers.size(); ++i)
      if (km.centers[i] - km.centers[i - 1] < min_gap) crowded = true;
    if (!crowded) break;
    km = kmeans_1d(values, --k);
  }
  const auto slot_of = map_to_reference(km.centers, slots);
  std::vector<int> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int slot = slot_of[static_cast<std::size_t>(km.labels[i])];
    out[i] = origin_low ? slot + 1 : slots - slot;
  }
  return out;
}

}  // namespace detail

// Per-classroom seat locator: representative point -> undistort -> rectify ->
// row/column clustering.
class SeatLocator {
 public:
  explicit SeatLocator(const ClassroomConfig& cfg)
      : cfg_(cfg), distortion_(DistortionParams::from_config(cfg)), rect_(rectification(cfg)) {}

  Point2 rectify(Point2 image_point) const { return apply_homography(rect_, undistort(image_point, distortion_)); }

  std::vector<std::optional<SeatId>> operator()(const std::vector<BodyPose>& poses,
                                                const std::vector<bool>& teacher_flags) const {
    std::vector<std::optional<SeatId>> out(poses.size());
    std::vector<std::size_t> idx;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < poses.size(); ++i) {
      if (i < teacher_flags.size() && teacher_flags[i]) continue;
      const Point2 r = rectify(representative_point(poses[i], cfg_.kp_conf_min));
      idx.push_back(i);
      xs.push_back(r.x);
      ys.push_back(r.y);
    }
    if (idx.empty()) return out;
    const auto rows = detail::label_axis(ys, cfg_.rows, cfg_.row_origin_front);
    const auto cols = detail::label_axis(xs, cfg_.cols, cfg_.col_origin_left);
    for (std::size_t j = 0; j < idx.size(); ++j) out[idx[j]] = SeatId{rows[j], cols[j]};
    return out;
  }

  const ClassroomConfig& config() const { return cfg_; }
  const Homography& homography() const { return rect_; }
  const DistortionParams& distortion() const { return distortion_; }

 private:
  ClassroomConfig cfg_;
  DistortionParams distortion_;
  Homography rect_;
};

inline std::vector<std::optional<SeatId>> assign_seats(const std::vector<BodyPose>& poses,
                                                       const std::vector<bool>& teacher_flags,
                                                       const ClassroomConfig& cfg) {
  return SeatLocator(cfg)(poses, teacher_flags);
}

}  // namespace classtrack
