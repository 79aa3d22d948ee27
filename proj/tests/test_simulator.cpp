#include <sstream>

#include <gtest/gtest.h>

#include "classtrack/pipeline.hpp"
#include "classtrack/simulator.hpp"

using namespace classtrack;

namespace {

std::string stream_text(const std::vector<FrameRecord>& frames) {
  std::ostringstream os;
  write_stream(os, frames);
  return os.str();
}

ScenarioSpec small_spec() {
  ScenarioSpec s;
  s.duration_s = 120;
  return s;
}

}  // namespace

TEST(Simulator, IdenticalSeedsGiveIdenticalStreams) {
  auto spec = small_spec();
  spec.noise = {0.1, 0.05, 2.0, 0.5, 0.05};
  spec.teacher = true;
  spec.auto_events = AutoEvents{10, {}, 2, 5};
  const auto a = generate(spec, 99);
  const auto b = generate(spec, 99);
  EXPECT_EQ(stream_text(a.frames), stream_text(b.frames));
  EXPECT_EQ(truth_to_json(a.truth).dump(), truth_to_json(b.truth).dump());
  EXPECT_NE(stream_text(generate(spec, 100).frames), stream_text(a.frames));
}

TEST(Simulator, FullMissRateRemovesAllDetections) {
  auto spec = small_spec();
  spec.noise.miss_prob = 1.0;
  spec.teacher = true;
  spec.auto_events = AutoEvents{8, {}, 2, 4};
  const auto r = generate(spec);
  for (const auto& f : r.frames) {
    EXPECT_TRUE(f.detections.empty());
    EXPECT_EQ(f.poses.size(), 36u);  // 35 students + teacher
  }
  EXPECT_EQ(r.truth.missed_detections, r.truth.true_detections);
  EXPECT_GT(r.truth.true_detections, 0u);
}

TEST(Simulator, CleanSingleEventIsRecoveredExactly) {
  auto spec = small_spec();
  for (auto cat : kStudentBehaviors) {
    spec.events = {{SeatId{2, 6}, cat, 30.0, 9.0}};
    const auto r = generate(spec);
    const auto session = analyze_frames(r.frames, spec.classroom_config());
    const auto events = session.all_events();
    ASSERT_EQ(events.size(), 1u) << to_string(cat);
    EXPECT_EQ(events[0].category, cat);
    EXPECT_EQ(events[0].seat, (SeatId{2, 6}));
    EXPECT_EQ(events[0].start_frame, r.truth.events[0].start_frame);
    EXPECT_EQ(events[0].end_frame, r.truth.events[0].end_frame);
  }
}

TEST(Simulator, MissRateMatchesConfiguredProbability) {
  ScenarioSpec spec;  // 800 frames
  spec.noise.miss_prob = 0.3;
  spec.teacher = true;
  spec.auto_events = AutoEvents{1200, {}, 5, 12};
  spec.min_gap_frames = 1;
  const auto r = generate(spec, 4);
  ASSERT_GE(r.truth.true_detections, 10000u);
  const double rate = static_cast<double>(r.truth.missed_detections) / static_cast<double>(r.truth.true_detections);
  EXPECT_NEAR(rate, 0.3, 0.02);
}

TEST(Simulator, RejectsInvalidSpecs) {
  auto spec = small_spec();
  spec.noise.miss_prob = 1.5;
  EXPECT_THROW(generate(spec), ScenarioError);

  spec = small_spec();
  spec.events = {{SeatId{9, 1}, BehaviorCategory::standing, 0, 3}};
  EXPECT_THROW(generate(spec), ScenarioError);

  spec = small_spec();
  spec.empty_seats = {SeatId{1, 1}};
  spec.events = {{SeatId{1, 1}, BehaviorCategory::standing, 0, 3}};
  EXPECT_THROW(generate(spec), ScenarioError);

  spec = small_spec();
  spec.events = {{SeatId{1, 1}, BehaviorCategory::standing, 0, 9}, {SeatId{1, 1}, BehaviorCategory::sleeping, 6, 3}};
  EXPECT_THROW(generate(spec), ScenarioError);

  spec = small_spec();
  spec.rect_quad = {Point2{0, 0}, {10, 10}, {10, 0}, {0, 10}};
  EXPECT_THROW(generate(spec), ScenarioError);

  EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"rows": "five"})")), ScenarioError);
}

TEST(Simulator, StreamAndTruthRoundTrip) {
  auto spec = small_spec();
  spec.noise = {0.1, 0.1, 1.5, 0.3, 0.03};
  spec.k1 = 0.05;
  spec.teacher = true;
  spec.auto_events = AutoEvents{12, {{BehaviorCategory::hand_raising, 3.0}, {BehaviorCategory::sleeping, 1.0}}, 2, 4};
  const auto r = generate(spec, 7);
  const std::string text = stream_text(r.frames);
  std::istringstream in(text);
  EXPECT_EQ(parse_stream(in), r.frames);

  const auto doc = truth_to_json(r.truth);
  EXPECT_EQ(truth_to_json(truth_from_json(nlohmann::json::parse(doc.dump()))).dump(), doc.dump());
  ASSERT_EQ(r.truth.frames.size(), r.frames.size());
  for (std::size_t i = 0; i < r.frames.size(); ++i) EXPECT_EQ(r.truth.frames[i].poses.size(), r.frames[i].poses.size());
}

TEST(Simulator, ScenarioDocument) {
  const auto spec = scenario_from_json(nlohmann::json::parse(R"({
    "rows": 4, "cols": 6, "duration_s": 300, "teacher": true, "seed": 12,
    "empty_seats": ["R4C6"],
    "camera": {"rect_quad": [400,300, 1500,300, 1750,1000, 150,1000], "k1": 0.05},
    "noise": {"miss_prob": 0.1},
    "events": [{"seat": "R2C3", "cat": "hand_raising", "start_t": 30, "duration_s": 9}],
    "auto_events": {"count": 5, "weights": {"smiling": 1}}
  })"));
  EXPECT_EQ(spec.rows, 4);
  EXPECT_EQ(spec.cols, 6);
  EXPECT_FALSE(spec.occupied(SeatId{4, 6}));
  EXPECT_DOUBLE_EQ(spec.k1, 0.05);
  EXPECT_EQ(spec.events.at(0).seat, (SeatId{2, 3}));
  ASSERT_TRUE(spec.auto_events);
  EXPECT_EQ(spec.auto_events->count, 5);
  EXPECT_EQ(spec.seed, 12u);
  const auto events = schedule_events(spec);
  EXPECT_EQ(events.size(), 6u);
  for (const auto& e : events) EXPECT_NE(e.seat, (SeatId{4, 6}));
}
