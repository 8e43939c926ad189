#include "storyline/service/http.hpp"

#include "storyline/serialize.hpp"

#include "httplib.h"

namespace storyline::service {

struct HttpServer::Impl {
  AuthoringService& service;
  httplib::Server server;
  explicit Impl(AuthoringService& s) : service(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req, int status_on_error) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(status_on_error, std::string("malformed JSON body: ") + e.what());
  }
}

nlohmann::json suggestions_json(JobState state, const std::vector<Suggestion>& list) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& s : list) items.push_back(suggestion_to_json(s));
  return {{"status", to_string(state)}, {"suggestions", items}};
}

// Wraps a handler so ServiceError and stray failures become JSON errors.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), {{"error", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", e.what()}});
    }
  };
}

}  // namespace

HttpServer::HttpServer(AuthoringService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& svc = impl_->service;
  auto& srv = impl_->server;

  srv.Get("/health", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"ok", true}, {"model_loaded", svc.model_loaded()}});
          }));

  srv.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const nlohmann::json body = parse_body(req, 400);
             const bool wrapped = body.is_object() && body.contains("script");
             const nlohmann::json script = wrapped ? body.at("script") : body;
             const nlohmann::json params = wrapped ? body.value("params", nlohmann::json()) : nlohmann::json();
             send_json(res, 201, session_view_to_json(svc.create_session(script.dump(), params)));
           }));

  srv.Get(R"(/sessions/([0-9a-f]+)/layout)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, session_view_to_json(svc.get(req.matches[1])));
          }));

  srv.Post(R"(/sessions/([0-9a-f]+)/interactions)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             svc.get(id);  // 404 before judging the body
             send_json(res, 200, session_view_to_json(svc.apply_interaction(id, parse_body(req, 422))));
           }));

  srv.Post(R"(/sessions/([0-9a-f]+)/suggestions)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             svc.get(id);
             const nlohmann::json body = parse_body(req, 422);
             int count = 0;
             bool wait = true;
             try {
               count = body.value("count", 1);
               wait = body.value("wait", true);
             } catch (const nlohmann::json::exception& e) {
               throw ServiceError(422, e.what());
             }
             if (wait) {
               const auto list = svc.request_suggestions(id, count);
               send_json(res, 200, suggestions_json(svc.suggestions(id).first, list));
             } else {
               svc.start_suggestions(id, count);
               send_json(res, 202, {{"status", to_string(JobState::kRunning)}});
             }
           }));

  srv.Get(R"(/sessions/([0-9a-f]+)/suggestions)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const auto [state, list] = svc.suggestions(req.matches[1]);
            send_json(res, 200, suggestions_json(state, list));
          }));

  srv.Post(R"(/sessions/([0-9a-f]+)/suggestions/(\d+)/adopt)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const std::string index = req.matches[2];
             const int i = index.size() > 6 ? -1 : std::stoi(index);
             send_json(res, 200, session_view_to_json(svc.adopt_suggestion(req.matches[1], i)));
           }));

  srv.Post(R"(/sessions/([0-9a-f]+)/agent/stop)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, {{"stopped", svc.stop_agent(req.matches[1])}});
           }));

  srv.Post(R"(/sessions/([0-9a-f]+)/reset)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, session_view_to_json(svc.reset_session(req.matches[1])));
           }));

  srv.Get(R"(/sessions/([0-9a-f]+)/render.svg)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            res.status = 200;
            res.set_content(svc.render_svg(req.matches[1]), "image/svg+xml");
          }));

  srv.Post(R"(/sessions/([0-9a-f]+)/snapshot)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, {{"path", svc.save_snapshot(req.matches[1])}});
           }));

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) res.set_content(nlohmann::json({{"error", "not found"}}).dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace storyline::service
