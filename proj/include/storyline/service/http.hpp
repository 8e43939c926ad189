#pragma once

#include "storyline/service/service.hpp"

#include <memory>
#include <string>

namespace storyline::service {

// JSON over HTTP:
//   POST /sessions                          script document, or {"script", "params"}
//   GET  /sessions/{id}/layout
//   POST /sessions/{id}/interactions        interaction message
//   POST /sessions/{id}/suggestions         {"count", "wait" (default true)}
//   GET  /sessions/{id}/suggestions         job status and results
//   POST /sessions/{id}/suggestions/{i}/adopt
//   POST /sessions/{id}/agent/stop
//   POST /sessions/{id}/reset
//   GET  /sessions/{id}/render.svg
//   POST /sessions/{id}/snapshot
//   GET  /health
class HttpServer {
 public:
  explicit HttpServer(AuthoringService& service);
  ~HttpServer();

  // Binds and serves until stop(); returns false when binding fails.
  bool listen(const std::string& host, int port);
  // Binds to a free port for tests; serve with run().
  int bind_any(const std::string& host);
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace storyline::service
