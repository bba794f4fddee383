#pragma once

// HTTP+JSON surface of the sharing service and its client.
//
//   POST /encounters             {private_code, records:[{reporter,peer,date}]} -> {accepted}
//   GET  /encounters/{id}        -> {records:[...]}   (?format=csv for record lines)
//   POST /messages               {private_code, body, date} -> {id, author}
//   GET  /messages/for/{id}      -> {messages:[{id,author,body,date}]}
//
// Errors are {error, message} with 400 malformed, 403 authentication,
// 413 oversized.

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "ct/error.hpp"
#include "ct/protocol.hpp"
#include "ct/sharesvc.hpp"

namespace ct::share {

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, std::string_view kind, std::string_view what) {
  send_json(res, status, {{"error", kind}, {"message", what}});
}

// Runs `fn`, translating library errors into HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const AuthenticationFailure& e) {
    send_error(res, 403, "authentication", e.what());
  } catch (const OversizedBody& e) {
    send_error(res, 413, "oversized", e.what());
  } catch (const MalformedInput& e) {
    send_error(res, 400, "malformed", e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "malformed", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

inline std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw MalformedInput(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

}  // namespace detail

inline void install_share_routes(httplib::Server& server, ShareService& service) {
  using detail::guarded;
  using detail::send_json;
  using detail::string_field;

  server.Post("/encounters", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = nlohmann::json::parse(req.body);
      if (!body.is_object()) throw MalformedInput("request body must be an object");
      PrivateCode code(string_field(body, "private_code"));
      auto it = body.find("records");
      if (it == body.end() || !it->is_array()) throw MalformedInput("missing array field 'records'");
      std::vector<ShareRecord> records;
      for (const auto& r : *it) records.push_back(record_from_json(r));
      send_json(res, 200, {{"accepted", service.submit_encounters(code, records)}});
    });
  });

  server.Get(R"(/encounters/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto records = service.query_encounters(PublicId(req.matches[1].str()));
      if (req.get_param_value("format") == "csv") {
        res.set_content(export_share_csv(records), "text/csv");
        return;
      }
      auto arr = nlohmann::json::array();
      for (const auto& r : records) arr.push_back(to_json(r));
      send_json(res, 200, {{"records", arr}});
    });
  });

  server.Post("/messages", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = nlohmann::json::parse(req.body);
      if (!body.is_object()) throw MalformedInput("request body must be an object");
      PrivateCode code(string_field(body, "private_code"));
      const auto id = service.post_message(code, string_field(body, "body"), Date(string_field(body, "date")));
      send_json(res, 200, {{"id", id}, {"author", derive_public_id(code).str()}});
    });
  });

  server.Get(R"(/messages/for/([^/]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto arr = nlohmann::json::array();
      for (const auto& m : service.fetch_messages_for(PublicId(req.matches[1].str()))) arr.push_back(to_json(m));
      send_json(res, 200, {{"messages", arr}});
    });
  });
}

// Blocking request/response client; one request at a time.
class ShareClient {
 public:
  explicit ShareClient(const std::string& base_url) : client_(base_url) {
    if (!client_.is_valid()) throw MalformedInput("invalid service URL: " + base_url);
    client_.set_connection_timeout(5);
    client_.set_read_timeout(30);
  }

  std::size_t submit(const PrivateCode& code, const std::vector<ShareRecord>& records) {
    auto arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    const nlohmann::json req{{"private_code", code.str()}, {"records", arr}};
    return post("/encounters", req).at("accepted").get<std::size_t>();
  }

  std::vector<ShareRecord> query(const PublicId& id) {
    std::vector<ShareRecord> out;
    const auto body = get("/encounters/" + id.str());
    for (const auto& r : body.at("records")) out.push_back(record_from_json(r));
    return out;
  }

  std::uint64_t post_message(const PrivateCode& code, const std::string& body, const Date& date) {
    const nlohmann::json req{{"private_code", code.str()}, {"body", body}, {"date", date.str()}};
    return post("/messages", req).at("id").get<std::uint64_t>();
  }

  std::vector<Message> fetch(const PublicId& id) {
    std::vector<Message> out;
    const auto body = get("/messages/for/" + id.str());
    for (const auto& m : body.at("messages")) out.push_back(message_from_json(m));
    return out;
  }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    return check(client_.Post(path, body.dump(), "application/json"), path);
  }

  nlohmann::json get(const std::string& path) { return check(client_.Get(path), path); }

  static nlohmann::json check(const httplib::Result& res, const std::string& path) {
    if (!res) throw NetworkError(path + ": " + httplib::to_string(res.error()));
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw NetworkError(path + ": non-JSON response (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 200) return body;
    const auto msg = body.value("message", std::string("HTTP ") + std::to_string(res->status));
    if (res->status == 403) throw AuthenticationFailure(msg);
    if (res->status == 413) throw OversizedBody(msg);
    if (res->status == 400) throw MalformedInput(msg);
    throw NetworkError(path + ": HTTP " + std::to_string(res->status) + ": " + msg);
  }

  httplib::Client client_;
};

}  // namespace ct::share
