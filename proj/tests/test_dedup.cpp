#include <random>
#include <set>

#include <gtest/gtest.h>

#include "classtrack/dedup.hpp"
#include "test_support.hpp"

using namespace classtrack;

namespace {

// Pixel-membership oracle for integer boxes: counts unit cells covered by
// each box on the integer grid.
double pixel_iou(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh) {
  long inter = 0, a_area = 0, b_area = 0;
  const int x0 = std::min(ax, bx), x1 = std::max(ax + aw, bx + bw);
  const int y0 = std::min(ay, by), y1 = std::max(ay + ah, by + bh);
  for (int x = x0; x < x1; ++x)
    for (int y = y0; y < y1; ++y) {
      const bool in_a = x >= ax && x < ax + aw && y >= ay && y < ay + ah;
      const bool in_b = x >= bx && x < bx + bw && y >= by && y < by + bh;
      a_area += in_a;
      b_area += in_b;
      inter += in_a && in_b;
    }
  return static_cast<double>(inter) / static_cast<double>(a_area + b_area - inter);
}

FrameRecord frame(std::int64_t i, std::vector<Detection> dets) { return {i, 3.0 * static_cast<double>(i), std::move(dets), {}}; }

Detection det(BehaviorCategory c, Box b) { return {c, b, 0.9}; }

}  // namespace

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 10, 10}, {20, 20, 5, 5}), 0.0);
  const double oracle = pixel_iou(0, 0, 10, 10, 5, 0, 10, 10);
  EXPECT_DOUBLE_EQ(oracle, 1.0 / 3.0);
  EXPECT_NEAR(iou({0, 0, 10, 10}, {5, 0, 10, 10}), oracle, 1e-12);
}

TEST(Iou, RejectsDegenerateBoxes) {
  EXPECT_THROW(iou({0, 0, 0, 10}, {0, 0, 10, 10}), std::domain_error);
  EXPECT_THROW(iou({0, 0, 10, 10}, {0, 0, 10, -1}), std::domain_error);
}

TEST(Iou, TouchingEdgesAreDisjoint) { EXPECT_EQ(iou({0, 0, 10, 10}, {10, 0, 10, 10}), 0.0); }

TEST(Iou, Properties) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const Box a = testkit::random_box(rng), b = testkit::random_box(rng);
    const double ab = iou(a, b);
    EXPECT_EQ(ab, iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
    EXPECT_EQ(iou(a, a), 1.0);
  }
}

TEST(Iou, MatchesPixelOracleOnIntegerBoxes) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> pos(0, 60), size(1, 50);
  for (int i = 0; i < 2000; ++i) {
    int ax = pos(rng), ay = pos(rng), aw = size(rng), ah = size(rng);
    int bx = pos(rng), by = pos(rng), bw = size(rng), bh = size(rng);
    EXPECT_NEAR(iou({double(ax), double(ay), double(aw), double(ah)}, {double(bx), double(by), double(bw), double(bh)}),
                pixel_iou(ax, ay, aw, ah, bx, by, bw, bh), 1e-6);
  }
}

TEST(Dedup, EmitsAfterToleranceExpires) {
  Deduplicator d(0.2, 2);
  const Box b{100, 100, 40, 40};
  for (int f = 0; f <= 2; ++f) EXPECT_TRUE(d.step(frame(f, {det(BehaviorCategory::sleeping, b)})).empty());
  EXPECT_TRUE(d.step(frame(3, {})).empty());
  EXPECT_TRUE(d.step(frame(4, {})).empty());
  auto out = d.step(frame(5, {}));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].start_frame, 0);
  EXPECT_EQ(out[0].end_frame, 2);
  EXPECT_EQ(out[0].members.size(), 3u);
  EXPECT_TRUE(d.tracks().empty());
}

TEST(Dedup, ShortGapIsBridged) {
  Deduplicator d(0.2, 2);
  const Box b{100, 100, 40, 40};
  d.step(frame(0, {det(BehaviorCategory::standing, b)}));
  d.step(frame(1, {}));
  d.step(frame(2, {}));
  d.step(frame(3, {det(BehaviorCategory::standing, b)}));
  auto out = d.flush();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].start_frame, 0);
  EXPECT_EQ(out[0].end_frame, 3);
}

TEST(Dedup, DisjointBoxesNeverMerge) {
  Deduplicator d;
  auto f0 = frame(0, {det(BehaviorCategory::hand_raising, {0, 0, 20, 20}), det(BehaviorCategory::hand_raising, {200, 0, 20, 20})});
  d.step(f0);
  EXPECT_EQ(d.tracks().size(), 2u);
  d.step(f0);
  EXPECT_EQ(d.tracks().size(), 2u);
  EXPECT_EQ(d.flush().size(), 2u);
}

TEST(Dedup, DriftingBoxIsOneEvent) {
  for (int f = 0; f + 1 < 5; ++f) EXPECT_GE(pixel_iou(2 * f, 0, 10, 10, 2 * (f + 1), 0, 10, 10), 0.2);
  Deduplicator d;
  for (int f = 0; f < 5; ++f) d.step(frame(f, {det(BehaviorCategory::yawning, {2.0 * f, 0, 10, 10})}));
  auto out = d.flush();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].members.size(), 5u);
}

TEST(Dedup, CategoriesAreTrackedSeparately) {
  Deduplicator d;
  const Box b{50, 50, 30, 30};
  d.step(frame(0, {det(BehaviorCategory::standing, b)}));
  d.step(frame(1, {det(BehaviorCategory::sleeping, b)}));
  auto out = d.flush();
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NE(out[0].category, out[1].category);
}

TEST(Dedup, TeacherBoxesIgnored) {
  Deduplicator d;
  d.step(frame(0, {det(BehaviorCategory::teacher, {0, 0, 50, 100})}));
  EXPECT_TRUE(d.tracks().empty());
}

TEST(Dedup, GreedyPrefersHigherOverlap) {
  Deduplicator d;
  d.step(frame(0, {det(BehaviorCategory::smiling, {0, 0, 10, 10})}));
  // second detection overlaps the track more; the first one opens a new track
  d.step(frame(1, {det(BehaviorCategory::smiling, {4, 0, 10, 10}), det(BehaviorCategory::smiling, {1, 0, 10, 10})}));
  ASSERT_EQ(d.tracks().size(), 2u);
  EXPECT_EQ(d.tracks()[0].last_bbox, (Box{1, 0, 10, 10}));
  EXPECT_EQ(d.tracks()[0].members.back().detection_index, 1u);
}

TEST(Dedup, FlushExamples) {
  Deduplicator none;
  EXPECT_TRUE(none.flush().empty());

  Deduplicator one;
  one.step(frame(0, {det(BehaviorCategory::standing, {0, 0, 10, 10})}));
  EXPECT_EQ(one.flush().size(), 1u);

  Deduplicator three;
  three.step(frame(0, {det(BehaviorCategory::standing, {0, 0, 10, 10}), det(BehaviorCategory::sleeping, {100, 0, 10, 10}),
                       det(BehaviorCategory::smiling, {200, 0, 10, 10})}));
  auto out = three.flush();
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].category, BehaviorCategory::standing);
  EXPECT_EQ(out[1].category, BehaviorCategory::sleeping);
  EXPECT_EQ(out[2].category, BehaviorCategory::smiling);
}

TEST(Dedup, ConservationAndDeterminism) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0, 300), size(5, 60), u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FrameRecord> stream;
    std::size_t total = 0;
    for (int f = 0; f < 40; ++f) {
      std::vector<Detection> dets;
      const int n = static_cast<int>(u(rng) * 6);
      for (int i = 0; i < n; ++i)
        dets.push_back(det(kStudentBehaviors[static_cast<std::size_t>(u(rng) * 5) % 5], {pos(rng), pos(rng), size(rng), size(rng)}));
      total += dets.size();
      stream.push_back(frame(f, dets));
    }
    auto run = [&] {
      Deduplicator d;
      std::vector<BehaviorEvent> events;
      for (const auto& f : stream)
        for (auto& e : d.step(f)) events.push_back(e);
      for (auto& e : d.flush()) events.push_back(e);
      return events;
    };
    const auto events = run();
    EXPECT_LE(events.size(), total);
    std::set<std::pair<std::int64_t, std::size_t>> seen;
    for (const auto& e : events) {
      EXPECT_LE(e.start_frame, e.end_frame);
      for (std::size_t i = 0; i < e.members.size(); ++i) {
        const auto& m = e.members[i];
        EXPECT_EQ(stream[static_cast<std::size_t>(m.frame_index)].detections[m.detection_index].category, e.category);
        EXPECT_TRUE(seen.insert({m.frame_index, m.detection_index}).second);
        if (i) {
          EXPECT_LT(e.members[i - 1].frame_index, m.frame_index);
        }
      }
    }
    EXPECT_EQ(seen.size(), total);
    EXPECT_EQ(run(), events);
  }
}
