#include "threedify/service/http.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>

namespace threedify::service {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error&) {
    throw ApiError(400, "bad_json", "request body is not valid JSON");
  }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler inner) {
  return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
    try {
      inner(req, res);
    } catch (const ApiError& e) {
      send_json(res, e.http_status(), e.body());
    } catch (const std::exception& e) {
      send_json(res, 500, ApiError(500, "internal", e.what()).body());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  Impl(SessionService& s, HttpOptions o) : sessions(s), options(std::move(o)) {}
  SessionService& sessions;
  HttpOptions options;
  httplib::Server server;
  std::string schema;
};

HttpServer::HttpServer(SessionService& sessions, HttpOptions options)
    : impl_(std::make_unique<Impl>(sessions, std::move(options))) {
  auto& svc = impl_->sessions;
  auto& srv = impl_->server;
  if (!impl_->options.schema_path.empty() && std::filesystem::exists(impl_->options.schema_path)) {
    std::ifstream in(impl_->options.schema_path);
    std::stringstream buf;
    buf << in.rdbuf();
    impl_->schema = buf.str();
  }
  if (!impl_->options.static_dir.empty() && std::filesystem::is_directory(impl_->options.static_dir)) {
    srv.set_mount_point("/app", impl_->options.static_dir.string());
  }
  srv.Get("/", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/app/"); });

  srv.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  }));
  srv.Get("/v1/schema", guarded([this](const httplib::Request&, httplib::Response& res) {
    if (impl_->schema.empty()) throw ApiError(404, "not_found", "no schema document configured");
    res.set_content(impl_->schema, "application/json");
  }));
  srv.Post("/v1/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 201, svc.create_session(parse_body(req)));
  }));
  srv.Get("/v1/sessions", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, svc.list_sessions());
  }));
  srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, svc.get_session(req.matches[1]));
  }));
  srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/candidates)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.get_candidates(req.matches[1]));
          }));
  srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/candidates/([A-Za-z0-9_-]+)/thumbnail)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            res.set_content(svc.get_thumbnail(req.matches[1], req.matches[2]), "image/svg+xml");
          }));
  srv.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/selection)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, svc.post_selection(req.matches[1], parse_body(req)));
           }));
  srv.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/turns)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, svc.post_turn(req.matches[1], parse_body(req)));
           }));
  srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/scene/([A-Za-z0-9_-]+))",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            res.set_content(svc.get_scene(req.matches[1], req.matches[2]) + "\n", "application/json");
          }));
  srv.Get(R"(/v1/sessions/([A-Za-z0-9_-]+)/events)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            svc.get_session(id);  // 404 before the stream starts
            auto last = std::make_shared<std::uint64_t>(0);
            if (req.has_param("after")) {
              try {
                *last = std::stoull(req.get_param_value("after"));
              } catch (const std::exception&) {
                throw ApiError(400, "bad_request", "'after' must be a non-negative integer");
              }
            }
            res.set_chunked_content_provider("application/x-ndjson", [&svc, id, last](std::size_t, httplib::DataSink& sink) {
              bool finished = false;
              const auto events = svc.events_after(id, *last, std::chrono::milliseconds(500), finished);
              for (const auto& e : events) {
                const auto line = e.dump() + "\n";
                if (!sink.write(line.data(), line.size())) return false;
                *last = e["seq"].get<std::uint64_t>();
              }
              if (finished || svc.stopping()) sink.done();
              return true;
            });
          }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  impl_->sessions.shutdown();
  impl_->server.stop();
}

}  // namespace threedify::service
