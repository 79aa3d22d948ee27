#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "classtrack/dedup.hpp"
#include "classtrack/simulator.hpp"
#include "classtrack/tracker.hpp"

namespace classtrack {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hand-raising matching quality.
//   precision  = correct / real      (real boxes matched to the right student)
//   match_rate = matched / detected  (detected boxes the matcher assigned at all)
struct MatchingReport {
  std::size_t detected = 0;
  std::size_t matched = 0;
  std::size_t real = 0;
  std::size_t correct = 0;

  double precision() const { return real == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(real); }
  double match_rate() const {
    return detected == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(detected);
  }

  nlohmann::json to_json() const {
    return {{"detected", detected}, {"matched", matched},       {"real", real},
            {"correct", correct},   {"precision", precision()}, {"match_rate", match_rate()}};
  }
};

inline constexpr double kTruthBoxIou = 0.5;

namespace detail {

inline std::unordered_map<std::int64_t, const TruthFrame*> index_truth(const GroundTruth& truth) {
  std::unordered_map<std::int64_t, const TruthFrame*> out;
  for (const auto& f : truth.frames) out[f.frame_index] = &f;
  return out;
}

}  // namespace detail

// A predicted box is real when it overlaps a truth hand-raising box with
// IoU >= 0.5 (one-to-one, greedy by IoU); it is correct when it is also
// matched to the truth seat.
inline MatchingReport eval_matching(const std::vector<FrameAnalysis>& predicted, const GroundTruth& truth) {
  const auto by_frame = detail::index_truth(truth);
  MatchingReport rep;
  for (const auto& f : predicted) {
    auto it = by_frame.find(f.frame_index);
    if (it == by_frame.end())
      throw EvaluationError("frame " + std::to_string(f.frame_index) + " not covered by ground truth");
    const auto& th = it->second->hands;
    struct Cand {
      double overlap;
      std::size_t pred, truth;
    };
    std::vector<Cand> cands;
    for (std::size_t p = 0; p < f.hands.size(); ++p)
      for (std::size_t t = 0; t < th.size(); ++t) {
        const double o = iou(f.hands[p].bbox, th[t].bbox);
        if (o >= kTruthBoxIou) cands.push_back({o, p, t});
      }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.overlap != b.overlap) return a.overlap > b.overlap;
      return std::tie(a.pred, a.truth) < std::tie(b.pred, b.truth);
    });
    std::vector<std::optional<std::size_t>> paired(f.hands.size());
    std::vector<bool> truth_used(th.size(), false);
    for (const auto& c : cands) {
      if (paired[c.pred] || truth_used[c.truth]) continue;
      paired[c.pred] = c.truth;
      truth_used[c.truth] = true;
    }
    for (std::size_t p = 0; p < f.hands.size(); ++p) {
      const auto& h = f.hands[p];
      ++rep.detected;
      if (h.matched) ++rep.matched;
      if (!paired[p]) continue;
      ++rep.real;
      if (h.matched && h.seat && *h.seat == th[*paired[p]].seat) ++rep.correct;
    }
  }
  return rep;
}

struct SeatRow {
  SeatId seat;
  std::size_t legal = 0;    // F_l
  std::size_t correct = 0;  // F_c

  double accuracy() const { return legal == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(legal); }
};

struct SeatReport {
  std::string label;
  std::vector<SeatRow> rows;

  std::size_t total_legal() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.legal;
    return n;
  }
  std::size_t total_correct() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.correct;
    return n;
  }
  // Pooled accuracy: sum of F_c over sum of F_l.
  double acc_a() const {
    const auto l = total_legal();
    return l == 0 ? 0.0 : static_cast<double>(total_correct()) / static_cast<double>(l);
  }

  nlohmann::json to_json() const {
    nlohmann::json seats = nlohmann::json::array();
    for (const auto& r : rows)
      seats.push_back({{"seat", r.seat.str()}, {"F_l", r.legal}, {"F_c", r.correct}, {"Acc_s", r.accuracy()}});
    return {{"label", label},
            {"seats", seats},
            {"F_l_total", total_legal()},
            {"F_c_total", total_correct()},
            {"Acc_a", acc_a()}};
  }
};

// Pools several per-course reports into one (the "Total" column).
inline SeatReport pool_reports(const std::vector<SeatReport>& reports, std::string label = "total") {
  SeatReport out;
  out.label = std::move(label);
  for (const auto& r : reports) out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
  return out;
}

// Per-seat location accuracy over legal frames. `tracked` limits the report
// to chosen seats (all truth seats when empty); a tracked seat that never
// appears in the truth is an error.
inline SeatReport eval_seats(const std::vector<FrameAnalysis>& predicted, const GroundTruth& truth,
                             const std::vector<SeatId>& tracked = {}) {
  const auto by_frame = detail::index_truth(truth);
  std::map<SeatId, SeatRow> rows;
  for (const auto& f : truth.frames)
    for (const auto& p : f.poses)
      if (p.seat) rows[*p.seat].seat = *p.seat;
  for (const auto& s : tracked)
    if (!rows.count(s)) throw EvaluationError("seat " + s.str() + " absent from ground truth");

  for (const auto& f : predicted) {
    auto it = by_frame.find(f.frame_index);
    if (it == by_frame.end())
      throw EvaluationError("frame " + std::to_string(f.frame_index) + " not covered by ground truth");
    const auto& tp = it->second->poses;
    if (tp.size() != f.pose_seats.size())
      throw EvaluationError("frame " + std::to_string(f.frame_index) + ": pose count differs from ground truth");
    for (std::size_t i = 0; i < tp.size(); ++i) {
      if (!tp[i].seat || !tp[i].legal) continue;
      auto& row = rows[*tp[i].seat];
      ++row.legal;
      if (f.pose_seats[i] && *f.pose_seats[i] == *tp[i].seat) ++row.correct;
    }
  }
  SeatReport rep;
  for (const auto& [seat, row] : rows) {
    if (!tracked.empty() && std::find(tracked.begin(), tracked.end(), seat) == tracked.end()) continue;
    rep.rows.push_back(row);
  }
  return rep;
}

struct CountReport {
  struct Cell {
    CategoryCounts predicted{};
    CategoryCounts truth{};
  };
  CategoryCounts predicted{};
  CategoryCounts truth{};
  std::map<SeatId, Cell> per_seat;
  CategoryCounts unassigned{};

  int error(BehaviorCategory c) const {
    const auto i = behavior_index(c);
    return std::abs(predicted[i] - truth[i]);
  }
  int total_error() const {
    int e = 0;
    for (auto c : kStudentBehaviors) e += error(c);
    return e;
  }

  nlohmann::json to_json() const {
    nlohmann::json cats = nlohmann::json::object();
    for (auto c : kStudentBehaviors) {
      const auto i = behavior_index(c);
      cats[std::string(to_string(c))] = {
          {"predicted", predicted[i]}, {"truth", truth[i]}, {"error", error(c)}, {"unassigned", unassigned[i]}};
    }
    nlohmann::json seats = nlohmann::json::object();
    for (const auto& [seat, cell] : per_seat) {
      nlohmann::json row = nlohmann::json::object();
      for (auto c : kStudentBehaviors) {
        const auto i = behavior_index(c);
        if (cell.predicted[i] == 0 && cell.truth[i] == 0) continue;
        row[std::string(to_string(c))] = {{"predicted", cell.predicted[i]}, {"truth", cell.truth[i]}};
      }
      if (!row.empty()) seats[seat.str()] = row;
    }
    return {{"categories", cats}, {"per_seat", seats}, {"total_error", total_error()}};
  }
};

inline CountReport eval_counts(const ClassSession& session, const GroundTruth& truth) {
  CountReport rep;
  for (const auto& ev : session.all_events()) {
    const auto i = behavior_index(ev.category);
    ++rep.predicted[i];
    if (ev.seat) ++rep.per_seat[*ev.seat].predicted[i];
    else ++rep.unassigned[i];
  }
  for (const auto& ev : truth.events) {
    const auto i = behavior_index(ev.category);
    ++rep.truth[i];
    ++rep.per_seat[ev.seat].truth[i];
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Human-readable tables

inline std::string format_matching(const MatchingReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "Hand-raising matching\n"
     << "  detected boxes   " << r.detected << "\n"
     << "  matched boxes    " << r.matched << "\n"
     << "  real boxes       " << r.real << "\n"
     << "  correctly matched " << r.correct << "\n"
     << "  precision        " << 100.0 * r.precision() << "% (" << r.correct << "/" << r.real << ")\n"
     << "  match rate       " << 100.0 * r.match_rate() << "% (" << r.matched << "/" << r.detected << ")\n";
  return os.str();
}

inline std::string format_seats(const SeatReport& r) {
  std::ostringstream os;
  os << "Seat location" << (r.label.empty() ? "" : " [" + r.label + "]") << "\n";
  os << "  " << std::left << std::setw(8) << "RxCy" << std::right << std::setw(8) << "F_l" << std::setw(8) << "F_c"
     << std::setw(8) << "Acc_s" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& row : r.rows)
    os << "  " << std::left << std::setw(8) << row.seat.str() << std::right << std::setw(8) << row.legal
       << std::setw(8) << row.correct << std::setw(8) << row.accuracy() << "\n";
  os << "  " << std::left << std::setw(8) << "total" << std::right << std::setw(8) << r.total_legal() << std::setw(8)
     << r.total_correct() << "\n";
  os << std::setprecision(1) << "  Acc_a " << 100.0 * r.acc_a() << "%\n";
  return os.str();
}

inline std::string format_counts(const CountReport& r) {
  std::ostringstream os;
  os << "Event counts\n";
  os << "  " << std::left << std::setw(14) << "category" << std::right << std::setw(10) << "predicted" << std::setw(8)
     << "truth" << std::setw(8) << "error" << "\n";
  for (auto c : kStudentBehaviors) {
    const auto i = behavior_index(c);
    os << "  " << std::left << std::setw(14) << to_string(c) << std::right << std::setw(10) << r.predicted[i]
       << std::setw(8) << r.truth[i] << std::setw(8) << r.error(c) << "\n";
  }
  return os.str();
}

}  // namespace classtrack
