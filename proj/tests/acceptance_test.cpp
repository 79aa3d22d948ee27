// Acceptance suite: one PASS/FAIL line per primary criterion. Exits non-zero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "classtrack/classtrack.hpp"
#include "reference_fixtures.hpp"

using namespace classtrack;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Analyzed {
  SimulationResult sim;
  ClassSession session;
};

Analyzed run(const ScenarioSpec& spec) {
  auto sim = generate(spec);
  auto session = analyze_frames(sim.frames, spec.classroom_config(), "acceptance");
  return {std::move(sim), std::move(session)};
}

// ---------------------------------------------------------------------------

Outcome clean_closure() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioSpec spec;  // 5 x 7, 2400 s at 3 s
  spec.teacher = true;
  spec.auto_events = AutoEvents{60, {}, 2, 5};
  spec.seed = 2024;
  const auto a = run(spec);
  const auto counts = eval_counts(a.session, a.sim.truth);
  const auto match = eval_matching(a.session.frames(), a.sim.truth);
  const auto seats = eval_seats(a.session.frames(), a.sim.truth);
  const double secs = seconds_since(t0);

  CategoryCounts per_cat{};
  for (const auto& e : a.sim.truth.events) ++per_cat[behavior_index(e.category)];
  bool all_categories = true;
  for (int n : per_cat) all_categories = all_categories && n > 0;

  Outcome o;
  o.pass = spec.frame_count() == 800 && a.sim.truth.events.size() >= 50 && all_categories &&
           counts.total_error() == 0 && match.precision() == 1.0 && match.match_rate() == 1.0 && seats.acc_a() == 1.0 &&
           secs < 10.0;
  o.detail = fmt("frames=%zu events=%zu count_error=%d precision=%.4f match_rate=%.4f Acc_a=%.4f runtime=%.2fs",
                 spec.frame_count(), a.sim.truth.events.size(), counts.total_error(), match.precision(),
                 match.match_rate(), seats.acc_a(), secs);
  return o;
}

Outcome noisy_matching() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioSpec spec;
  spec.rows = 6;
  spec.cols = 8;
  spec.teacher = true;
  spec.seed = 77;
  spec.auto_events = AutoEvents{1000,
                                {{BehaviorCategory::hand_raising, 6.0},
                                 {BehaviorCategory::standing, 1.0},
                                 {BehaviorCategory::sleeping, 1.0},
                                 {BehaviorCategory::yawning, 1.0},
                                 {BehaviorCategory::smiling, 1.0}},
                                2,
                                6};
  // Spurious boxes at 2% of the expected true detections per frame.
  const auto schedule = schedule_events(spec);
  double event_frames = 0;
  for (const auto& e : schedule) event_frames += static_cast<double>(e.end_frame - e.start_frame + 1);
  const double true_per_frame = event_frames / static_cast<double>(spec.frame_count()) + 1.0;  // + teacher
  spec.noise = {0.10, 0.20, 2.0, 0.02 * true_per_frame, 0.0};

  const auto a = run(spec);
  const auto rep = eval_matching(a.session.frames(), a.sim.truth);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = rep.detected >= 2000 && rep.precision() >= 0.80 && rep.match_rate() >= 0.95 && secs < 60.0;
  o.detail = fmt("detected=%zu matched=%zu real=%zu correct=%zu precision=%.4f match_rate=%.4f fp/frame=%.3f runtime=%.2fs",
                 rep.detected, rep.matched, rep.real, rep.correct, rep.precision(), rep.match_rate(),
                 spec.noise.false_positive_rate, secs);
  return o;
}

Outcome seat_accuracy() {
  struct Room {
    const char* name;
    int rows, cols;
    std::array<Point2, 4> quad;
    double k1;
  };
  const std::array<Room, 4> rooms{{
      {"left-6x6", 6, 6, {Point2{380, 300}, {1420, 260}, {1760, 1010}, {150, 960}}, 0.0},
      {"right-5x8", 5, 8, {Point2{500, 260}, {1540, 300}, {1770, 960}, {160, 1010}}, 0.0},
      {"left-5x7", 5, 7, {Point2{400, 320}, {1460, 280}, {1780, 1000}, {170, 980}}, 0.0},
      {"barrel-5x6", 5, 6, {Point2{480, 330}, {1380, 300}, {1620, 930}, {260, 900}}, 0.1},
  }};
  Outcome o;
  std::vector<SeatReport> reports;
  std::string per;
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    ScenarioSpec spec;
    spec.rows = rooms[i].rows;
    spec.cols = rooms[i].cols;
    spec.rect_quad = rooms[i].quad;
    spec.k1 = rooms[i].k1;
    spec.teacher = true;
    spec.noise.position_jitter_pitch = 0.05;
    spec.auto_events = AutoEvents{40, {}, 2, 5};
    spec.seed = 500 + i;
    const auto a = run(spec);
    auto rep = eval_seats(a.session.frames(), a.sim.truth);
    rep.label = rooms[i].name;
    o.pass = o.pass && rep.acc_a() >= 0.80;
    per += fmt("%s=%.4f ", rooms[i].name, rep.acc_a());
    reports.push_back(std::move(rep));
  }
  const auto pooled = pool_reports(reports);

  const auto fx = fixtures::seat_fixture(fixtures::kSeatLocation[0]);
  const auto video1 = eval_seats(fx.predicted, fx.truth, {SeatId{1, 2}});
  const auto& cell = video1.rows.at(0);
  const bool fixture_ok = cell.legal == 719 && cell.correct == 692 && std::round(cell.accuracy() * 100) / 100 == 0.96;

  o.pass = o.pass && pooled.acc_a() >= 0.83 && fixture_ok;
  o.detail = per + fmt("pooled=%.4f (F_c=%zu F_l=%zu) fixture R1C2=%zu/%zu=%.4f", pooled.acc_a(), pooled.total_correct(),
                       pooled.total_legal(), cell.correct, cell.legal, cell.accuracy());
  return o;
}

// Smallest triangle formed by three consecutive corners; near zero when three
// corners are almost collinear.
double min_corner_triangle(const std::array<Point2, 4>& q) {
  double m = INFINITY;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point2 a = q[i], b = q[(i + 1) % 4], c = q[(i + 2) % 4];
    m = std::min(m, std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)) / 2);
  }
  return m;
}

Outcome geometry() {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> x(0, 1920), y(0, 1080), u(0, 1);
  double worst_residual = 0, worst_round_trip = 0;
  int quads = 0;
  while (quads < 1000) {
    std::array<Point2, 4> src{Point2{x(rng), y(rng)}, {x(rng), y(rng)}, {x(rng), y(rng)}, {x(rng), y(rng)}};
    std::array<Point2, 4> dst{Point2{x(rng), y(rng)}, {x(rng), y(rng)}, {x(rng), y(rng)}, {x(rng), y(rng)}};
    // non-degenerate: convex, every corner triangle at least 1% of the image
    const double min_area = 0.01 * 1920 * 1080;
    if (!quad_is_convex(src) || !quad_is_convex(dst) || min_corner_triangle(src) < min_area ||
        min_corner_triangle(dst) < min_area)
      continue;
    ++quads;
    const auto h = solve_homography(src, dst);
    for (std::size_t i = 0; i < 4; ++i)
      worst_residual = std::max(worst_residual, distance(apply_homography(h, src[i]), dst[i]));
    const auto inv = h.inverse();
    for (int k = 0; k < 10; ++k) {
      const Point2 p{x(rng), y(rng)};
      const Point2 back = apply_homography(h, apply_homography(inv, p));
      worst_round_trip = std::max(worst_round_trip, distance(back, p) / std::max(1.0, std::hypot(p.x, p.y)));
    }
  }
  ClassroomConfig cfg;
  const auto lens = DistortionParams::from_config(cfg);
  bool identity = true;
  for (int k = 0; k < 1000; ++k) {
    const Point2 p{x(rng), y(rng)};
    identity = identity && undistort(p, lens) == p;
  }
  Outcome o;
  o.pass = worst_residual <= 1e-6 && worst_round_trip <= 1e-9 && identity;
  o.detail = fmt("quads=%d max_residual=%.3g max_round_trip_rel=%.3g undistort_k0_exact=%s", quads, worst_residual,
                 worst_round_trip, identity ? "yes" : "no");
  return o;
}

double exhaustive_wcss(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end());
  const int n = static_cast<int>(v.size());
  auto seg = [&](int i, int j) {
    double m = 0;
    for (int t = i; t < j; ++t) m += v[static_cast<std::size_t>(t)];
    m /= (j - i);
    double s = 0;
    for (int t = i; t < j; ++t) s += std::pow(v[static_cast<std::size_t>(t)] - m, 2);
    return s;
  };
  double best = INFINITY;
  std::function<void(int, int, double)> rec = [&](int start, int left, double acc) {
    if (left == 1) {
      best = std::min(best, acc + seg(start, n));
      return;
    }
    for (int c = start + 1; c <= n - left + 1; ++c) rec(c, left - 1, acc + seg(start, c));
  };
  rec(0, k, 0.0);
  return best;
}

Outcome kmeans() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  int instances = 0;
  double worst = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(trial % 2 ? u(rng) : std::round(u(rng) * 20) / 20);
    const int distinct = static_cast<int>(distinct_count(v));
    for (int k = 1; k <= std::min(4, distinct); ++k) {
      ++instances;
      worst = std::max(worst, std::abs(kmeans_1d(v, k).wcss(v) - exhaustive_wcss(v, k)));
    }
  }
  return {worst <= 1e-9, fmt("instances=%d max_wcss_gap=%.3g", instances, worst)};
}

Outcome iou_suite() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> pos(0, 200), size(0.5, 80);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const Box a{pos(rng), pos(rng), size(rng), size(rng)};
    const Box b{pos(rng), pos(rng), size(rng), size(rng)};
    const double ab = iou(a, b);
    const bool disjoint = a.right() <= b.x || b.right() <= a.x || a.bottom() <= b.y || b.bottom() <= a.y;
    if (ab != iou(b, a) || ab < 0 || ab > 1 || iou(a, a) != 1.0 || (disjoint != (ab == 0.0)) || (a != b && ab == 1.0))
      ++violations;
  }
  std::uniform_int_distribution<int> ip(0, 60), is(1, 50);
  double worst = 0;
  for (int i = 0; i < 2000; ++i) {
    const int ax = ip(rng), ay = ip(rng), aw = is(rng), ah = is(rng), bx = ip(rng), by = ip(rng), bw = is(rng), bh = is(rng);
    long inter = 0;
    for (int px = std::min(ax, bx); px < std::max(ax + aw, bx + bw); ++px)
      for (int py = std::min(ay, by); py < std::max(ay + ah, by + bh); ++py)
        inter += (px >= ax && px < ax + aw && py >= ay && py < ay + ah) && (px >= bx && px < bx + bw && py >= by && py < by + bh);
    const double oracle = static_cast<double>(inter) / static_cast<double>(aw * ah + bw * bh - inter);
    worst = std::max(worst, std::abs(iou({double(ax), double(ay), double(aw), double(ah)},
                                         {double(bx), double(by), double(bw), double(bh)}) - oracle));
  }
  return {violations == 0 && worst <= 1e-6, fmt("pairs=10000 violations=%d pixel_pairs=2000 max_pixel_gap=%.3g", violations, worst)};
}

Outcome tracker_invariants() {
  std::mt19937_64 rng(8);
  ClassroomConfig cfg;
  cfg.rows = 5;
  cfg.cols = 7;
  bool ok = true;

  SeatTracklet tr{{1, 1}, {}};
  ok = ok && engagement_score(tr, true, 0) == 0.5;
  for (int p = 0; p < 5; ++p)
    for (int n = 0; n < 5; ++n) {
      SeatTracklet t{{1, 1}, {}};
      for (int i = 0; i < p; ++i) t.events[behavior_index(BehaviorCategory::hand_raising)].push_back({BehaviorCategory::hand_raising, 0, 3, 0, 1, SeatId{1, 1}});
      for (int i = 0; i < n; ++i) t.events[behavior_index(BehaviorCategory::yawning)].push_back({BehaviorCategory::yawning, 0, 3, 0, 1, SeatId{1, 1}});
      const double s = *engagement_score(t, true, 10);
      auto plus = t;
      plus.events[behavior_index(BehaviorCategory::smiling)].push_back({BehaviorCategory::smiling, 0, 3, 0, 1, SeatId{1, 1}});
      auto minus = t;
      minus.events[behavior_index(BehaviorCategory::sleeping)].push_back({BehaviorCategory::sleeping, 0, 3, 0, 1, SeatId{1, 1}});
      ok = ok && s > 0 && s < 1 && *engagement_score(plus, true, 10) > s && *engagement_score(minus, true, 10) < s;
    }

  std::vector<TrackedEvent> events;
  CategoryCounts expected{};
  for (int i = 0; i < 500; ++i) {
    std::optional<SeatId> seat;
    if (rng() % 6) seat = SeatId{static_cast<int>(rng() % 5) + 1, static_cast<int>(rng() % 7) + 1};
    const auto cat = kStudentBehaviors[rng() % 5];
    const double t = 3.0 * static_cast<double>(rng() % 800);
    events.push_back({cat, t, t + 6, static_cast<std::int64_t>(t / 3), static_cast<std::int64_t>(t / 3) + 2, seat});
    ++expected[behavior_index(cat)];
  }
  ClassSession a(cfg);
  for (const auto& e : events) a.accumulate(e);
  CategoryCounts grid{};
  for (int r = 1; r <= 5; ++r)
    for (int c = 1; c <= 7; ++c) {
      const auto n = a.tracklet({r, c}).counts();
      for (std::size_t i = 0; i < 5; ++i) grid[i] += n[i];
    }
  for (const auto& e : a.unassigned()) ++grid[behavior_index(e.category)];
  const bool conserved = grid == expected && a.totals() == expected;

  std::shuffle(events.begin(), events.end(), rng);
  ClassSession b(cfg);
  for (const auto& e : events) b.accumulate(e);
  const std::string doc = serialize_session(a);
  const bool order_free = serialize_session(b) == doc;
  const bool round_trip = serialize_session(parse_session(doc)) == doc;

  return {ok && conserved && order_free && round_trip,
          fmt("monotone_and_neutral=%s conservation=%s order_independent=%s round_trip_bytes=%s", ok ? "yes" : "no",
              conserved ? "yes" : "no", order_free ? "yes" : "no", round_trip ? "yes" : "no")};
}

Outcome metric_fixtures() {
  const auto fx = fixtures::matching_fixture();
  const auto rep = eval_matching(fx.predicted, fx.truth);
  const bool ok = rep.correct == 2001 && rep.real == 2409 && rep.matched == 2625 && rep.detected == 2667 &&
                  std::round(rep.precision() * 1e4) / 1e4 == 0.8306 && std::round(rep.match_rate() * 1e4) / 1e4 == 0.9843;
  return {ok, fmt("precision=%zu/%zu=%.4f match_rate=%zu/%zu=%.4f", rep.correct, rep.real, rep.precision(), rep.matched,
                  rep.detected, rep.match_rate())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"clean-stream closure", clean_closure},
      {"noisy hand-raising matching", noisy_matching},
      {"seat location accuracy", seat_accuracy},
      {"geometry properties", geometry},
      {"kmeans_1d exhaustive optimum", kmeans},
      {"iou property suite", iou_suite},
      {"tracker invariants", tracker_invariants},
      {"metric fixtures", metric_fixtures},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %-30s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
