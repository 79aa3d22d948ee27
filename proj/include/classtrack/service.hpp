#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "classtrack/ingest.hpp"
#include "classtrack/pipeline.hpp"
#include "classtrack/tracker.hpp"

namespace classtrack {

inline constexpr const char* kSessionSuffix = ".session.json";

// Immutable published view of a session.
struct Snapshot {
  std::uint64_t version = 0;
  ClassSession session;
};

// Directory of finalized sessions (`<id>.session.json`) plus a registry of
// live sessions. Readers always receive a complete snapshot.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::vector<std::string> ids() const {
    std::set<std::string> out;
    std::error_code ec;
    if (std::filesystem::is_directory(dir_, ec)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
        const auto name = entry.path().filename().string();
        const std::string suffix = kSessionSuffix;
        if (name.size() > suffix.size() && name.ends_with(suffix))
          out.insert(name.substr(0, name.size() - suffix.size()));
      }
    }
    std::lock_guard lock(mu_);
    for (const auto& [id, snap] : live_) out.insert(id);
    return {out.begin(), out.end()};
  }

  std::shared_ptr<const Snapshot> get(const std::string& id) const {
    {
      std::lock_guard lock(mu_);
      if (auto it = live_.find(id); it != live_.end()) return it->second;
      if (auto it = cache_.find(id); it != cache_.end()) return it->second;
    }
    if (!valid_id(id)) return nullptr;
    const auto path = dir_ / (id + kSessionSuffix);
    std::ifstream in(path);
    if (!in) return nullptr;
    std::ostringstream ss;
    ss << in.rdbuf();
    auto snap = std::make_shared<const Snapshot>(Snapshot{1, parse_session(ss.str())});
    std::lock_guard lock(mu_);
    cache_[id] = snap;
    return snap;
  }

  // Publishes a new live snapshot; the version increases by one each time.
  std::uint64_t publish(const std::string& id, ClassSession session) {
    std::lock_guard lock(mu_);
    std::uint64_t version = 1;
    if (auto it = live_.find(id); it != live_.end()) version = it->second->version + 1;
    live_[id] = std::make_shared<const Snapshot>(Snapshot{version, std::move(session)});
    return version;
  }

  void save(const std::string& id, const ClassSession& session) const {
    if (!valid_id(id)) throw std::invalid_argument("invalid session id: " + id);
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ / (id + kSessionSuffix));
    out << serialize_session(session);
  }

  static bool valid_id(const std::string& id) {
    static const std::regex re("[A-Za-z0-9_.-]+");
    return !id.empty() && id != "." && id != ".." && std::regex_match(id, re);
  }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::shared_ptr<const Snapshot>> cache_;
  std::map<std::string, std::shared_ptr<const Snapshot>> live_;
};

// ---------------------------------------------------------------------------
// HTTP API, independent of the transport

struct ApiResponse {
  int status = 200;
  std::string body;
};

using QueryParams = std::map<std::string, std::string>;

namespace api {

inline ApiResponse json_response(int status, const nlohmann::json& j) { return {status, j.dump()}; }
inline ApiResponse error(int status, const std::string& msg) { return json_response(status, {{"error", msg}}); }

inline nlohmann::json counts_json(const CategoryCounts& c) {
  nlohmann::json j = nlohmann::json::object();
  for (auto cat : kStudentBehaviors) j[std::string(to_string(cat))] = c[behavior_index(cat)];
  return j;
}

inline nlohmann::json meta(const std::string& id, const Snapshot& snap) {
  const auto& s = snap.session;
  const auto doc = session_to_json(s);
  return {{"id", id},
          {"course_id", s.course_id()},
          {"version", snap.version},
          {"duration_s", s.duration()},
          {"rows", s.config().rows},
          {"cols", s.config().cols},
          {"sample_interval_s", s.config().sample_interval_s},
          {"config", doc["config"]},
          {"occupancy", doc["occupancy"]},
          {"unassigned", counts_json([&] {
             CategoryCounts c{};
             for (const auto& e : s.unassigned()) ++c[behavior_index(e.category)];
             return c;
           }())}};
}

inline nlohmann::json grid(const Snapshot& snap) {
  const auto& s = snap.session;
  nlohmann::json cells = nlohmann::json::array();
  for (int r = 1; r <= s.config().rows; ++r)
    for (int c = 1; c <= s.config().cols; ++c) {
      const SeatId seat{r, c};
      cells.push_back({{"seat", seat.str()},
                       {"row", r},
                       {"col", c},
                       {"occupied", s.occupied(seat)},
                       {"counts", counts_json(s.tracklet(seat).counts())}});
    }
  nlohmann::json cats = nlohmann::json::array();
  for (auto c : kStudentBehaviors) cats.push_back(std::string(to_string(c)));
  return {{"version", snap.version},
          {"rows", s.config().rows},
          {"cols", s.config().cols},
          {"categories", cats},
          {"cells", cells}};
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace api

// Routes one GET request. Read-only: identical snapshots give identical bodies.
inline ApiResponse handle_request(const SessionStore& store, const std::string& path, const QueryParams& query = {}) {
  static const std::regex session_re(R"(^/sessions/([^/]+)/(meta|grid|heatmap|flow|version)$)");
  static const std::regex sequence_re(R"(^/sessions/([^/]+)/seats/([^/]+)/sequence$)");

  if (path == "/sessions" || path == "/sessions/") return api::json_response(200, {{"sessions", store.ids()}});

  std::smatch m;
  std::string id, what, seat_text;
  if (std::regex_match(path, m, session_re)) {
    id = m[1];
    what = m[2];
  } else if (std::regex_match(path, m, sequence_re)) {
    id = m[1];
    what = "sequence";
    seat_text = m[2];
  } else {
    return api::error(404, "no such endpoint");
  }

  auto snap = store.get(id);
  if (!snap) return api::error(404, "unknown session: " + id);
  const auto& s = snap->session;

  if (what == "meta") return api::json_response(200, api::meta(id, *snap));
  if (what == "grid") return api::json_response(200, api::grid(*snap));
  if (what == "version") return api::json_response(200, {{"version", snap->version}});
  if (what == "flow") {
    nlohmann::json samples = nlohmann::json::array();
    const auto f = flow(s);
    for (std::size_t i = 0; i < f.size(); ++i)
      samples.push_back({{"index", i},
                         {"t", static_cast<double>(i) * s.config().sample_interval_s},
                         {"counts", api::counts_json(f[i])}});
    return api::json_response(200, {{"version", snap->version},
                                    {"sample_interval_s", s.config().sample_interval_s},
                                    {"samples", samples}});
  }
  if (what == "heatmap") {
    auto it = query.find("t");
    if (it == query.end()) return api::error(400, "missing query parameter t");
    auto t = api::parse_double(it->second);
    if (!t) return api::error(400, "t must be a number");
    if (*t < 0.0 || *t > s.duration()) return api::error(400, "t outside [0, duration]");
    const auto h = heatmap(s, *t);
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < s.config().rows; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < s.config().cols; ++c) {
        const auto& v = h[static_cast<std::size_t>(r * s.config().cols + c)];
        row.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
      }
      rows.push_back(row);
    }
    return api::json_response(200, {{"version", snap->version}, {"t", *t}, {"scores", rows}});
  }
  // sequence
  auto seat = parse_seat(seat_text);
  if (!seat) return api::error(400, "seat must look like RxCy");
  if (!s.in_grid(*seat)) return api::error(404, "seat " + seat->str() + " outside grid");
  nlohmann::json events = nlohmann::json::array();
  for (const auto& [t, cat] : sequence(s, *seat)) events.push_back({{"t", t}, {"cat", std::string(to_string(cat))}});
  return api::json_response(200, {{"version", snap->version}, {"seat", seat->str()}, {"events", events}});
}

// ---------------------------------------------------------------------------
// Live mode

// Follows a growing stream file, analyzes complete lines as they appear and
// publishes a snapshot each time stream time crosses a sampling boundary.
class LiveFeeder {
 public:
  LiveFeeder(SessionStore& store, std::string id, std::filesystem::path input, const ClassroomConfig& cfg)
      : store_(store), id_(std::move(id)), input_(std::move(input)), cfg_(cfg), analyzer_(cfg, id_, false) {
    store_.publish(id_, analyzer_.session());
  }

  ~LiveFeeder() { stop(); }
  LiveFeeder(const LiveFeeder&) = delete;
  LiveFeeder& operator=(const LiveFeeder&) = delete;

  // Consumes whatever complete lines are available now. Returns the number
  // of frames processed.
  std::size_t poll_once() {
    std::ifstream in(input_, std::ios::binary);
    if (!in) return 0;
    in.seekg(static_cast<std::streamoff>(offset_));
    std::string chunk((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    offset_ += chunk.size();
    pending_ += chunk;
    std::size_t frames = 0;
    std::size_t start = 0;
    for (std::size_t nl; (nl = pending_.find('\n', start)) != std::string::npos; start = nl + 1) {
      std::string line = pending_.substr(start, nl - start);
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        const auto rec = parse_frame_line(line, line_no_);
        analyzer_.feed(rec);
        ++frames;
        if (rec.t + 1e-9 >= next_publish_t_) {
          store_.publish(id_, analyzer_.session());
          next_publish_t_ = (std::floor(rec.t / cfg_.sample_interval_s + 1e-9) + 1.0) * cfg_.sample_interval_s;
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu_);
        errors_.push_back(e.what());
      }
    }
    pending_.erase(0, start);
    return frames;
  }

  // Finalizes open tracks and publishes the closing snapshot.
  void finish() {
    analyzer_.finish();
    store_.publish(id_, analyzer_.session());
  }

  void start(std::chrono::milliseconds period = std::chrono::milliseconds(200)) {
    running_ = true;
    worker_ = std::thread([this, period] {
      while (running_) {
        poll_once();
        std::this_thread::sleep_for(period);
      }
    });
  }

  void stop() {
    running_ = false;
    if (worker_.joinable()) worker_.join();
  }

  std::vector<std::string> errors() const {
    std::lock_guard lock(err_mu_);
    return errors_;
  }

 private:
  SessionStore& store_;
  std::string id_;
  std::filesystem::path input_;
  ClassroomConfig cfg_;
  SessionAnalyzer analyzer_;
  std::uintmax_t offset_ = 0;
  std::string pending_;
  std::size_t line_no_ = 0;
  double next_publish_t_ = 0.0;
  std::atomic<bool> running_{false};
  std::thread worker_;
  mutable std::mutex err_mu_;
  std::vector<std::string> errors_;
};

}  // namespace classtrack
