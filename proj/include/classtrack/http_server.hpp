#pragma once

#include <memory>
#include <string>

// service.hpp (and Eigen through it) must come first: httplib pulls in
// <resolv.h>, whose `_res` macro breaks Eigen's headers.
#include "classtrack/service.hpp"

#include <httplib.h>

namespace classtrack {

// Binds handle_request to an HTTP server; every route is GET-only.
inline std::unique_ptr<httplib::Server> make_http_server(const SessionStore& store) {
  auto server = std::make_unique<httplib::Server>();
  server->Get(R"(/sessions.*)", [&store](const httplib::Request& req, httplib::Response& res) {
    QueryParams query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const auto out = handle_request(store, req.path, query);
    res.status = out.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Cache-Control", "no-store");
    res.set_content(out.body, "application/json");
  });
  return server;
}

}  // namespace classtrack
