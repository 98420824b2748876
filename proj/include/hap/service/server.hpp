#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

// Eigen (via session.hpp) must precede httplib: <resolv.h> defines a `_res` macro.
#include "hap/service/session.hpp"

#include <httplib.h>

namespace hap::service {

/// Owns every live session. Each session has its own lock, so requests for one
/// session run one at a time in arrival order while different sessions proceed
/// independently.
class SessionStore {
 public:
  explicit SessionStore(ServiceConfig config = {}) : config_(std::move(config)) {}

  [[nodiscard]] const ServiceConfig& config() const { return config_; }

  /// Returns the initial batch (session_created, task_assigned, observation).
  std::vector<WireEvent> create(Condition condition, std::uint64_t seed) {
    std::string id;
    {
      std::lock_guard lock(mu_);
      id = "s" + std::to_string(++next_id_);
    }
    auto entry = std::make_shared<Entry>();
    entry->session = std::make_unique<Session>(id, condition, seed, config_);
    auto batch = entry->session->events();
    std::lock_guard lock(mu_);
    sessions_[id] = std::move(entry);
    return batch;
  }

  /// Imports an exported session under its recorded id.
  std::string import(const Json& exported) {
    auto session = import_session(exported);
    const std::string id = session->id();
    auto entry = std::make_shared<Entry>();
    entry->session = std::move(session);
    std::lock_guard lock(mu_);
    if (sessions_.count(id)) throw Conflict("session " + id + " already exists");
    sessions_[id] = std::move(entry);
    return id;
  }

  std::vector<WireEvent> submit_action(const std::string& id, std::int64_t seq, int action) {
    return mutate(id, [&](Session& s) { return s.submit_action(seq, action); });
  }
  std::vector<WireEvent> advance(const std::string& id) {
    return mutate(id, [](Session& s) { return s.advance_curriculum(); });
  }
  std::vector<WireEvent> summary(const std::string& id) {
    return mutate(id, [](Session& s) { return s.summary(); });
  }

  template <class F>
  auto read(const std::string& id, F&& f) {
    auto e = find(id);
    std::lock_guard lock(e->mu);
    return f(static_cast<const Session&>(*e->session));
  }

  /// Events after `after`, waiting up to `timeout` for at least one.
  std::vector<WireEvent> wait_events(const std::string& id, std::int64_t after, std::chrono::milliseconds timeout) {
    auto e = find(id);
    std::unique_lock lock(e->mu);
    e->cv.wait_for(lock, timeout, [&] { return e->session->events().back().seq > after || closing_.load(); });
    return e->session->events_after(after);
  }

  [[nodiscard]] std::vector<std::string> ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
  }

  /// Wakes every waiting event stream (server shutdown).
  void close() {
    closing_ = true;
    std::lock_guard lock(mu_);
    for (auto& [_, e] : sessions_) e->cv.notify_all();
  }
  [[nodiscard]] bool closing() const { return closing_.load(); }

 private:
  struct Entry {
    std::mutex mu;
    std::condition_variable cv;
    std::unique_ptr<Session> session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  template <class F>
  std::vector<WireEvent> mutate(const std::string& id, F&& f) {
    auto e = find(id);
    std::vector<WireEvent> batch;
    {
      std::lock_guard lock(e->mu);
      batch = f(*e->session);
    }
    e->cv.notify_all();
    return batch;
  }

  ServiceConfig config_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 0;
  std::atomic<bool> closing_{false};
};

namespace detail {

inline constexpr const char* kLinesType = "application/x-ndjson";

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(Json{{"error", message}}.dump() + "\n", "application/json");
}

inline Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  auto j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("request body is not a JSON object");
  return j;
}

/// Maps library exceptions onto HTTP status codes.
inline void guarded(httplib::Response& res, const std::function<void()>& f) {
  try {
    f();
  } catch (const NotFound& e) {
    send_error(res, 404, e.what());
  } catch (const Conflict& e) {
    send_error(res, 409, e.what());
  } catch (const ConfigError& e) {
    send_error(res, 400, e.what());
  } catch (const FormatError& e) {
    send_error(res, 400, e.what());
  } catch (const ContractViolation& e) {
    send_error(res, 400, e.what());
  } catch (const Json::exception& e) {
    send_error(res, 400, e.what());
  }
}

}  // namespace detail

/// HTTP front end. All event bodies are JSON lines; see the protocol section of the README.
///
///   GET  /api/config
///   POST /api/sessions                      {"condition": "...", "seed": N}
///   POST /api/sessions/:id/actions          {"seq": N, "action": A}
///   POST /api/sessions/:id/advance
///   POST /api/sessions/:id/summary
///   GET  /api/sessions/:id/summary
///   GET  /api/sessions/:id/events?after=N[&follow=1]
///   GET  /api/sessions/:id/export
///   POST /api/import
inline void install_routes(httplib::Server& server, SessionStore& store) {
  using detail::guarded;
  using detail::kLinesType;

  server.Get("/api/config", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(Json{{"v", kWireVersion}, {"config", store.config().to_json()}}.dump() + "\n",
                    "application/json");
  });

  server.Post("/api/sessions", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = detail::body_json(req);
      const auto condition = parse_condition(body.value("condition", std::string("HapAdaptive")));
      const auto seed = body.value("seed", std::uint64_t{0});
      auto batch = store.create(condition, seed);
      res.status = 201;
      res.set_content(to_lines(batch), kLinesType);
    });
  });

  server.Post("/api/sessions/:id/actions", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = detail::body_json(req);
      if (!body.contains("seq") || !body.contains("action")) throw FormatError("actions: need seq and action");
      auto batch = store.submit_action(req.path_params.at("id"), body["seq"].get<std::int64_t>(),
                                       body["action"].get<int>());
      res.set_content(to_lines(batch), kLinesType);
    });
  });

  server.Post("/api/sessions/:id/advance", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(to_lines(store.advance(req.path_params.at("id"))), kLinesType); });
  });

  server.Post("/api/sessions/:id/summary", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { res.set_content(to_lines(store.summary(req.path_params.at("id"))), kLinesType); });
  });

  server.Get("/api/sessions/:id/summary", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = store.read(req.path_params.at("id"), [](const Session& s) { return s.summary_record(); });
      res.set_content(j.dump() + "\n", "application/json");
    });
  });

  server.Get("/api/sessions/:id/export", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto j = store.read(req.path_params.at("id"), [](const Session& s) { return s.export_json(); });
      res.set_content(j.dump() + "\n", "application/json");
    });
  });

  server.Post("/api/import", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = store.import(detail::body_json(req));
      res.status = 201;
      res.set_content(Json{{"session", id}}.dump() + "\n", "application/json");
    });
  });

  server.Get("/api/sessions/:id/events", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      std::int64_t after = 0;
      if (req.has_param("after")) after = std::stoll(req.get_param_value("after"));
      if (req.get_param_value("follow") != "1") {
        res.set_content(to_lines(store.read(id, [&](const Session& s) { return s.events_after(after); })),
                        kLinesType);
        return;
      }
      (void)store.read(id, [](const Session& s) { return s.events().size(); });  // 404 before streaming
      auto cursor = std::make_shared<std::int64_t>(after);
      res.set_chunked_content_provider(kLinesType, [&store, id, cursor](std::size_t, httplib::DataSink& sink) {
        if (store.closing()) {
          sink.done();
          return true;
        }
        auto events = store.wait_events(id, *cursor, std::chrono::milliseconds(500));
        for (const auto& e : events) {
          const auto line = e.to_line() + "\n";
          if (!sink.write(line.data(), line.size())) return false;
          *cursor = e.seq;
        }
        return sink.is_writable();
      });
    });
  });
}

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;  ///< static UI bundle; empty = API only
};

/// Resolves HAP_HOST / HAP_PORT / HAP_UI_DIR; explicit values in `opts` win when `explicit_*` is set.
inline ServeOptions options_from_env(ServeOptions opts, bool explicit_host, bool explicit_port, bool explicit_ui) {
  if (!explicit_host)
    if (const char* h = std::getenv("HAP_HOST")) opts.host = h;
  if (!explicit_port)
    if (const char* p = std::getenv("HAP_PORT")) {
      try {
        opts.port = std::stoi(p);
      } catch (const std::exception&) {
        throw ConfigError(std::string("HAP_PORT is not a port number: ") + p);
      }
    }
  if (!explicit_ui)
    if (const char* u = std::getenv("HAP_UI_DIR")) opts.ui_dir = u;
  if (opts.port < 0 || opts.port > 65535) throw ConfigError("port out of range");
  return opts;
}

/// Server bound to a store; `listen` blocks until `stop`.
class LiveServer {
 public:
  explicit LiveServer(ServiceConfig config = {}) : store_(std::move(config)) { install_routes(http_, store_); }

  SessionStore& store() { return store_; }

  void mount_ui(const std::string& dir) {
    if (!http_.set_mount_point("/", dir)) throw ConfigError("ui dir '" + dir + "' does not exist");
  }

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? http_.bind_to_any_port(host) : (http_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  void listen() { http_.listen_after_bind(); }

  void stop() {
    store_.close();
    http_.stop();
  }

  [[nodiscard]] bool running() const { return http_.is_running(); }
  void wait_until_ready() const { http_.wait_until_ready(); }

 private:
  SessionStore store_;
  httplib::Server http_;
};

}  // namespace hap::service
