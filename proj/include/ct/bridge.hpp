#pragma once

// Local bridge exposing one emulated token's configuration channel over
// HTTP, standing in for the browser's direct BLE link.
//
//   POST /identity/new      {seed?} -> {private_code, public_id}
//   POST /update-hardware   {private_code, public_id?, health} -> {advertisement, public_id, health}
//   GET  /download-log      -> token log CSV (text/csv)
//   POST /power             {state: "on"|"off"} -> {powered}
//   GET  /advertisement     -> {advertisement}
//   POST /observe           {name} -> {result}
//   GET  /status            -> {configured, powered, public_id?, health?, peers?}
//
// Errors: 400 malformed, 409 token-off / unconfigured.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <mutex>
#include <optional>
#include <string>

#include "ct/error.hpp"
#include "ct/protocol.hpp"
#include "ct/token.hpp"

namespace ct::bridge {

class Unconfigured : public Error {
 public:
  Unconfigured() : Error("token has not been configured (update-hardware first)") {}
};

constexpr std::string_view to_string(ObserveResult r) noexcept {
  switch (r) {
    case ObserveResult::kLogged: return "logged";
    case ObserveResult::kIgnoredMalformed: return "ignored-malformed";
    case ObserveResult::kIgnoredSelf: return "ignored-self";
  }
  return "unknown";
}

// Owns the emulated token; every verb runs under one mutex.
class Bridge {
 public:
  // Same identity: health update in place. New identity: the token is
  // re-provisioned and restarts with an empty log.
  AdvertisedName update_hardware(const Identity& identity, HealthCode health) {
    std::lock_guard lock(mutex_);
    if (token_ && token_->identity() == identity) {
      token_->set_health(health);
    } else {
      token_ = Token::power_on(identity, health);
    }
    return token_->current_advertisement();
  }

  std::string download_log_csv() const {
    std::lock_guard lock(mutex_);
    return export_log_csv(configured().download_log());
  }

  bool set_power(bool on) {
    std::lock_guard lock(mutex_);
    auto& t = configured();
    on ? t.power_on() : t.power_off();
    return t.powered();
  }

  AdvertisedName advertisement() const {
    std::lock_guard lock(mutex_);
    return configured().current_advertisement();
  }

  ObserveResult observe(std::string_view name) {
    std::lock_guard lock(mutex_);
    return configured().observe_advertisement(name);
  }

  nlohmann::json status() const {
    std::lock_guard lock(mutex_);
    nlohmann::json j{{"configured", token_.has_value()}, {"powered", token_ && token_->powered()}};
    if (token_) {
      j["public_id"] = token_->identity().public_id.str();
      j["health"] = token_->health().to_hex();
      if (token_->powered()) j["peers"] = token_->download_log().size();
    }
    return j;
  }

 private:
  Token& configured() {
    if (!token_) throw Unconfigured();
    return *token_;
  }
  const Token& configured() const {
    if (!token_) throw Unconfigured();
    return *token_;
  }

  mutable std::mutex mutex_;
  std::optional<Token> token_;
};

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  auto fail = [&](int status, std::string_view kind, std::string_view what) {
    send_json(res, status, {{"error", kind}, {"message", what}});
  };
  try {
    fn();
  } catch (const TokenOff& e) {
    fail(409, "token-off", e.what());
  } catch (const Unconfigured& e) {
    fail(409, "unconfigured", e.what());
  } catch (const MalformedInput& e) {
    fail(400, "malformed", e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(400, "malformed", e.what());
  } catch (const std::exception& e) {
    fail(500, "internal", e.what());
  }
}

inline nlohmann::json parse_object(const std::string& body) {
  auto j = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
  if (!j.is_object()) throw MalformedInput("request body must be an object");
  return j;
}

inline std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw MalformedInput(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace detail

inline void install_bridge_routes(httplib::Server& server, Bridge& bridge) {
  using detail::guarded;
  using detail::send_json;

  // The config page is opened from file:// or another local port.
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/identity/new", [](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_object(req.body);
      std::optional<Identity> id;
      if (auto it = body.find("seed"); it != body.end() && it->is_string()) {
        id = identity_from_seed(it->get<std::string>());
      } else {
        SystemEntropy source;
        id = generate_identity(source);
      }
      send_json(res, 200, {{"private_code", id->private_code.str()}, {"public_id", id->public_id.str()}});
    });
  });

  server.Post("/update-hardware", [&bridge](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_object(req.body);
      Identity identity(PrivateCode(detail::string_field(body, "private_code")));
      if (auto it = body.find("public_id"); it != body.end()) {
        if (!it->is_string() || PublicId(it->get<std::string>()) != identity.public_id) {
          throw MalformedInput("public_id does not match private_code");
        }
      }
      const auto health = HealthCode::from_hex(detail::string_field(body, "health"));
      const auto name = bridge.update_hardware(identity, health);
      send_json(res, 200,
                {{"advertisement", name.text}, {"public_id", identity.public_id.str()}, {"health", health.to_hex()}});
    });
  });

  server.Get("/download-log", [&bridge](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { res.set_content(bridge.download_log_csv(), "text/csv"); });
  });

  server.Post("/power", [&bridge](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto state = detail::string_field(detail::parse_object(req.body), "state");
      if (state != "on" && state != "off") throw MalformedInput("state must be 'on' or 'off'");
      send_json(res, 200, {{"powered", bridge.set_power(state == "on")}});
    });
  });

  server.Get("/advertisement", [&bridge](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, {{"advertisement", bridge.advertisement().text}}); });
  });

  server.Post("/observe", [&bridge](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto name = detail::string_field(detail::parse_object(req.body), "name");
      send_json(res, 200, {{"result", to_string(bridge.observe(name))}});
    });
  });

  server.Get("/status", [&bridge](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, bridge.status()); });
  });
}

// Client used by `ct token ...`.
class BridgeClient {
 public:
  explicit BridgeClient(const std::string& base_url) : client_(base_url) {
    if (!client_.is_valid()) throw MalformedInput("invalid bridge URL: " + base_url);
    client_.set_connection_timeout(5);
  }

  std::string update_hardware(const PrivateCode& code, HealthCode health) {
    return json(client_.Post("/update-hardware",
                             nlohmann::json{{"private_code", code.str()}, {"health", health.to_hex()}}.dump(),
                             "application/json"))
        .at("advertisement")
        .get<std::string>();
  }

  std::string download_log() { return text(client_.Get("/download-log")); }

  bool power(bool on) {
    return json(client_.Post("/power", nlohmann::json{{"state", on ? "on" : "off"}}.dump(), "application/json"))
        .at("powered")
        .get<bool>();
  }

  std::string advertisement() { return json(client_.Get("/advertisement")).at("advertisement").get<std::string>(); }

  std::string observe(const std::string& name) {
    return json(client_.Post("/observe", nlohmann::json{{"name", name}}.dump(), "application/json"))
        .at("result")
        .get<std::string>();
  }

  nlohmann::json status() { return json(client_.Get("/status")); }

 private:
  static const httplib::Response& ok(const httplib::Result& res) {
    if (!res) throw NetworkError("bridge: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      std::string msg = "HTTP " + std::to_string(res->status);
      std::string kind;
      try {
        auto j = nlohmann::json::parse(res->body);
        msg = j.value("message", msg);
        kind = j.value("error", "");
      } catch (const nlohmann::json::exception&) {
      }
      if (kind == "token-off") throw TokenOff();
      if (kind == "unconfigured") throw Unconfigured();
      if (res->status == 400) throw MalformedInput(msg);
      throw NetworkError("bridge: " + msg);
    }
    return *res;
  }

  static nlohmann::json json(const httplib::Result& res) { return nlohmann::json::parse(ok(res).body); }
  static std::string text(const httplib::Result& res) { return ok(res).body; }

  httplib::Client client_;
};

}  // namespace ct::bridge
