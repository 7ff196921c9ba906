#include "otd/http_service.hpp"

#include "httplib.h"

namespace otd {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw InvalidRequest("body", std::string("invalid JSON: ") + e.what());
  }
}

// Runs a handler and maps the store's exceptions onto status codes.
template <class F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const InvalidRequest& e) {
      send_json(res, 400, {{"error", e.what()}, {"field", e.field()}});
    } catch (const NotFound& e) {
      send_error(res, 404, e.what());
    } catch (const Conflict& e) {
      send_error(res, 409, e.what());
    } catch (const OracleCapExceeded& e) {
      send_json(res, 422, {{"error", "oracle cap"}, {"cap", e.cap()}, {"t", e.t()}});
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

struct HttpService::Impl {
  explicit Impl(SessionStore& s) : store(s) {}
  SessionStore& store;
  httplib::Server server;
};

HttpService::HttpService(SessionStore& store, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(store)) {
  auto& srv = impl_->server;
  SessionStore& st = impl_->store;

  // Address reuse only, so a busy port is reported as such.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });

  srv.Post("/sessions", guarded([&st](const httplib::Request& req, httplib::Response& res) {
             json body = parse_body(req);
             std::optional<std::string> token;
             if (body.contains("request_token")) {
               if (!body["request_token"].is_string()) throw InvalidRequest("request_token", "expected a string");
               token = body["request_token"].get<std::string>();
               body.erase("request_token");
             }
             const std::string id = st.create(body, token);
             send_json(res, 201, {{"id", id}, {"state", st.trace(id, 0)}});
           }));

  srv.Get("/sessions", guarded([&st](const httplib::Request&, httplib::Response& res) {
            json out = json::array();
            for (const auto& s : st.list()) {
              out.push_back({{"id", s.id},
                             {"created", s.created},
                             {"updated", s.updated},
                             {"t", s.t},
                             {"d", s.d},
                             {"query_size", s.query_size},
                             {"pending", s.pending},
                             {"spec", s.spec}});
            }
            send_json(res, 200, out);
          }));

  srv.Post(R"(/sessions/([0-9a-f]+)/evidence)",
           guarded([&st](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, st.submit_evidence(req.matches[1], parse_body(req)));
           }));

  srv.Post(R"(/sessions/([0-9a-f]+)/decision)",
           guarded([&st](const httplib::Request& req, httplib::Response& res) {
             const json body = parse_body(req);
             if (!body.contains("include") || !body["include"].is_boolean()) {
               throw InvalidRequest("include", "expected a boolean");
             }
             send_json(res, 200, st.decide(req.matches[1], body["include"].get<bool>()));
           }));

  srv.Post(R"(/sessions/([0-9a-f]+)/whatif)",
           guarded([&st](const httplib::Request& req, httplib::Response& res) {
             const json body = parse_body(req);
             if (!body.contains("subset") || !body["subset"].is_array()) {
               throw InvalidRequest("subset", "expected a list of indices");
             }
             std::vector<std::size_t> subset;
             for (const auto& v : body["subset"]) {
               if (!v.is_number_unsigned()) throw InvalidRequest("subset", "indices must be positive integers");
               subset.push_back(v.get<std::size_t>());
             }
             const WhatIfResult r = st.what_if(req.matches[1], subset);
             send_json(res, 200, {{"bound", r.bound}, {"minimizer", r.minimizer}});
           }));

  srv.Get(R"(/sessions/([0-9a-f]+)/trace)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t since = 0;
            if (req.has_param("since")) {
              try {
                since = std::stoull(req.get_param_value("since"));
              } catch (const std::exception&) {
                throw InvalidRequest("since", "expected a nonnegative integer");
              }
            }
            send_json(res, 200, st.trace(req.matches[1], since));
          }));

  srv.Get(R"(/sessions/([0-9a-f]+)/export\.csv)",
          guarded([&st](const httplib::Request& req, httplib::Response& res) {
            res.set_content(st.export_csv(req.matches[1]), "text/csv");
          }));

  if (static_dir) srv.set_mount_point("/", static_dir->string());
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpService::run() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace otd
