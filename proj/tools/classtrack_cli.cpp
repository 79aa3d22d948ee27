#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "classtrack/classtrack.hpp"
#include "classtrack/http_server.hpp"

namespace fs = std::filesystem;
using namespace classtrack;

namespace {

std::string read_file(const fs::path& p, const std::string& what) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error(what + " not found: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

int run_analyze(const fs::path& input, const fs::path& config_path, const fs::path& out_path,
                const std::string& course_id, bool quiet) {
  const auto cfg = load_config(config_path);
  std::ifstream in(input);
  if (!in) throw std::runtime_error("input stream not found: " + input.string());
  AnalysisStats stats;
  const auto session = analyze_stream(in, cfg, course_id, &stats);
  write_file(out_path, serialize_session(session));

  if (!quiet)
    for (const auto& w : stats.warnings) std::cerr << "warning: " << w << "\n";
  const auto totals = session.totals();
  std::cout << "frames " << stats.frames << ", detections " << stats.detections << ", events " << stats.events
            << ", unassigned " << session.unassigned().size() << "\n";
  for (auto c : kStudentBehaviors) std::cout << "  " << to_string(c) << " " << totals[behavior_index(c)] << "\n";
  return 0;
}

int run_simulate(const fs::path& spec_path, std::optional<std::uint64_t> seed, const fs::path& out,
                 const fs::path& truth_path, const std::string& config_out) {
  auto spec = scenario_from_json(nlohmann::json::parse(read_file(spec_path, "scenario spec")));
  if (seed) spec.seed = *seed;
  const auto result = generate(spec);
  std::ostringstream stream;
  write_stream(stream, result.frames);
  write_file(out, stream.str());
  write_file(truth_path, truth_to_json(result.truth).dump() + "\n");
  if (!config_out.empty()) write_file(config_out, serialize_config(spec.classroom_config()));
  std::cout << "frames " << result.frames.size() << ", scripted events " << result.truth.events.size() << "\n";
  return 0;
}

int run_evaluate(const fs::path& session_path, const fs::path& truth_path, const std::string& json_out) {
  const auto session = parse_session(read_file(session_path, "session"));
  const auto truth = truth_from_json(nlohmann::json::parse(read_file(truth_path, "truth")));
  const auto matching = eval_matching(session.frames(), truth);
  auto seats = eval_seats(session.frames(), truth);
  seats.label = session.course_id();
  const auto counts = eval_counts(session, truth);
  std::cout << format_matching(matching) << "\n" << format_seats(seats) << "\n" << format_counts(counts);
  if (!json_out.empty()) {
    nlohmann::json doc = {{"format", "classtrack.report"},
                          {"format_version", 1},
                          {"matching", matching.to_json()},
                          {"seats", seats.to_json()},
                          {"counts", counts.to_json()}};
    write_file(json_out, doc.dump(2) + "\n");
  }
  return 0;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const fs::path& store_dir, int port, const std::string& host, const std::string& live_input,
              const std::string& live_config, const std::string& live_id) {
  SessionStore store(store_dir);
  std::unique_ptr<LiveFeeder> feeder;
  if (!live_input.empty()) {
    if (live_config.empty()) throw std::runtime_error("--live-input requires --config");
    const auto cfg = load_config(live_config);
    feeder = std::make_unique<LiveFeeder>(store, live_id, live_input, cfg);
    feeder->start();
  }
  auto server = make_http_server(store);
  g_server = server.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving " << store_dir.string() << " on http://" << host << ":" << port << std::endl;
  const bool ok = server->listen(host, port);
  g_server = nullptr;
  if (feeder) {
    feeder->stop();
    feeder->finish();
  }
  if (!ok) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seat-indexed classroom behavior analytics"};
  app.require_subcommand(1);

  fs::path input, config_path, out_path;
  std::string course_id = "course";
  bool quiet = false;
  auto* analyze = app.add_subcommand("analyze", "Analyze a detection stream into a session document");
  analyze->add_option("--input", input, "Line-delimited detection stream")->required();
  analyze->add_option("--config", config_path, "Classroom config (key = value)")->required();
  analyze->add_option("--out", out_path, "Session document to write")->required();
  analyze->add_option("--course-id", course_id, "Course identifier stored in the session");
  analyze->add_flag("--quiet", quiet, "Suppress validation warnings");

  fs::path spec_path, sim_out, truth_path;
  std::optional<std::uint64_t> seed;
  std::string config_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic stream with ground truth");
  simulate->add_option("--spec", spec_path, "Scenario document (JSON)")->required();
  simulate->add_option("--seed", seed, "Random seed (overrides the scenario)");
  simulate->add_option("--out", sim_out, "Stream file to write")->required();
  simulate->add_option("--truth", truth_path, "Ground-truth document to write")->required();
  simulate->add_option("--config-out", config_out, "Also write the matching classroom config");

  fs::path eval_session, eval_truth;
  std::string report_json;
  auto* evaluate = app.add_subcommand("evaluate", "Score a session against ground truth");
  evaluate->add_option("--session", eval_session, "Session document")->required();
  evaluate->add_option("--truth", eval_truth, "Ground-truth document")->required();
  evaluate->add_option("--json", report_json, "Also write a machine-readable report");

  fs::path store_dir;
  int port = 8080;
  std::string host = "0.0.0.0", live_input, live_config, live_id = "live";
  auto* serve = app.add_subcommand("serve", "Serve session data over HTTP");
  serve->add_option("--store", store_dir, "Directory of <id>.session.json files")->required();
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--live-input", live_input, "Growing stream file to analyze live");
  serve->add_option("--config", live_config, "Classroom config for the live stream");
  serve->add_option("--live-id", live_id, "Session id of the live stream");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return run_analyze(input, config_path, out_path, course_id, quiet);
    if (*simulate) return run_simulate(spec_path, seed, sim_out, truth_path, config_out);
    if (*evaluate) return run_evaluate(eval_session, eval_truth, report_json);
    if (*serve) return run_serve(store_dir, port, host, live_input, live_config, live_id);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
