#pragma once

// Deterministic discrete-event proximity simulator for a fleet of emulated
// tokens.
//
// Time is an integer tick. A contact (a, b, start, end) is active on ticks
// start <= t < end. On every active tick that is a multiple of
// advertisement_interval_ticks, a receives b's advertisement and b receives
// a's; each delivery is accepted independently with detection_probability.
// Events are processed in (tick, contact index) order and the RNG is
// mt19937_64, so a scenario replays byte-for-byte on every platform.

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ct/error.hpp"
#include "ct/protocol.hpp"
#include "ct/token.hpp"

namespace ct::sim {

class ScenarioError : public MalformedInput {
 public:
  enum class Kind : std::uint8_t {
    kSchema,
    kUnknownLabel,
    kInvertedInterval,
    kDuplicateLabel,
    kDuplicateIdentity,
    kSelfContact,
  };

  ScenarioError(Kind kind, const std::string& what) : MalformedInput(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

using Tick = std::int64_t;

struct SimParams {
  Tick advertisement_interval_ticks = 1;
  double detection_probability = 1.0;
  std::uint64_t rng_seed = 0;
};

struct TokenSpec {
  std::string label;
  Identity identity;
  HealthCode health;
};

struct Contact {
  std::size_t a = 0;  // index into Scenario::tokens
  std::size_t b = 0;
  Tick start = 0;
  Tick end = 0;

  bool active_at(Tick t) const noexcept { return start <= t && t < end; }
};

struct Scenario {
  SimParams params;
  std::vector<TokenSpec> tokens;
  std::vector<Contact> contacts;
};

struct TraceEvent {
  Tick tick = 0;
  std::string observer;
  std::string advertisement;
  bool accepted = false;

  bool operator==(const TraceEvent&) const = default;
};

using EventTrace = std::vector<TraceEvent>;

struct SimResult {
  std::vector<Token> tokens;  // parallel to Scenario::tokens
  EventTrace trace;
};

// (observer label, peer label)
using PairKey = std::pair<std::string, std::string>;

// ---------------------------------------------------------------------------
// Scenario loading
// ---------------------------------------------------------------------------

namespace detail {

// 1-based line and column of a byte offset, for parse diagnostics.
inline std::string position_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void schema_error(const std::string& where, const std::string& why) {
  throw ScenarioError(ScenarioError::Kind::kSchema, where + ": " + why);
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, std::string("missing field '") + key + "'");
  return *it;
}

inline std::int64_t as_int(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer()) schema_error(where, "expected integer");
  return v.get<std::int64_t>();
}

inline std::string as_string(const nlohmann::json& v, const std::string& where) {
  if (!v.is_string()) schema_error(where, "expected string");
  return v.get<std::string>();
}

}  // namespace detail

// Parses and validates a JSON scenario document:
//   { "params": {"advertisement_interval_ticks", "detection_probability", "rng_seed"},
//     "tokens": [{"label", "identity_seed" | "private_code", "health"}],
//     "contacts": [{"a", "b", "start", "end"}] }
// `params` and each of its fields are optional.
inline Scenario load_scenario(std::string_view document) {
  using detail::schema_error;
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    schema_error(detail::position_of(document, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  if (!root.is_object()) schema_error("/", "expected a JSON object");

  Scenario sc;
  if (auto it = root.find("params"); it != root.end()) {
    const auto& p = *it;
    if (!p.is_object()) schema_error("/params", "expected object");
    if (auto f = p.find("advertisement_interval_ticks"); f != p.end()) {
      sc.params.advertisement_interval_ticks =
          detail::as_int(*f, "/params/advertisement_interval_ticks");
      if (sc.params.advertisement_interval_ticks < 1) {
        schema_error("/params/advertisement_interval_ticks", "must be >= 1");
      }
    }
    if (auto f = p.find("detection_probability"); f != p.end()) {
      if (!f->is_number()) schema_error("/params/detection_probability", "expected number");
      sc.params.detection_probability = f->get<double>();
      if (!(sc.params.detection_probability >= 0.0 && sc.params.detection_probability <= 1.0)) {
        schema_error("/params/detection_probability", "must be in [0, 1]");
      }
    }
    if (auto f = p.find("rng_seed"); f != p.end()) {
      if (!f->is_number_unsigned() && !(f->is_number_integer() && f->get<std::int64_t>() >= 0)) {
        schema_error("/params/rng_seed", "expected non-negative integer");
      }
      sc.params.rng_seed = f->get<std::uint64_t>();
    }
  }

  const auto& tokens = detail::require(root, "tokens", "/");
  if (!tokens.is_array()) schema_error("/tokens", "expected array");
  std::map<std::string, std::size_t> index;
  std::set<PublicId> ids;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto where = "/tokens/" + std::to_string(i);
    const auto& t = tokens[i];
    if (!t.is_object()) schema_error(where, "expected object");
    auto lbl = detail::as_string(detail::require(t, "label", where), where + "/label");
    // Labels end up in CSV fields and file names.
    if (lbl.empty() || lbl.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
                                             "0123456789_.-") != std::string::npos ||
        lbl.front() == '.') {
      schema_error(where + "/label", "must be non-empty [A-Za-z0-9_.-] not starting with '.'");
    }
    if (index.contains(lbl)) {
      throw ScenarioError(ScenarioError::Kind::kDuplicateLabel,
                          where + "/label: duplicate label '" + lbl + "'");
    }
    try {
      std::optional<Identity> identity;
      if (auto f = t.find("private_code"); f != t.end()) {
        identity.emplace(PrivateCode(detail::as_string(*f, where + "/private_code")));
      } else {
        identity.emplace(identity_from_seed(
            detail::as_string(detail::require(t, "identity_seed", where), where + "/identity_seed")));
      }
      HealthCode health;
      if (auto f = t.find("health"); f != t.end()) {
        health = HealthCode::from_hex(detail::as_string(*f, where + "/health"));
      }
      if (!ids.insert(identity->public_id).second) {
        throw ScenarioError(ScenarioError::Kind::kDuplicateIdentity,
                            where + ": public id " + identity->public_id.str() +
                                " already used by another token");
      }
      index.emplace(lbl, sc.tokens.size());
      sc.tokens.push_back(TokenSpec{lbl, std::move(*identity), health});
    } catch (const ScenarioError&) {
      throw;
    } catch (const MalformedInput& e) {
      schema_error(where, e.what());
    }
  }

  const auto& contacts = detail::require(root, "contacts", "/");
  if (!contacts.is_array()) schema_error("/contacts", "expected array");
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    const auto where = "/contacts/" + std::to_string(i);
    const auto& c = contacts[i];
    if (!c.is_object()) schema_error(where, "expected object");
    auto resolve = [&](const char* key) {
      auto name = detail::as_string(detail::require(c, key, where), where + "/" + key);
      auto it = index.find(name);
      if (it == index.end()) {
        throw ScenarioError(ScenarioError::Kind::kUnknownLabel,
                            where + "/" + key + ": unknown token label '" + name + "'");
      }
      return it->second;
    };
    Contact contact;
    contact.a = resolve("a");
    contact.b = resolve("b");
    contact.start = detail::as_int(detail::require(c, "start", where), where + "/start");
    contact.end = detail::as_int(detail::require(c, "end", where), where + "/end");
    if (contact.a == contact.b) {
      throw ScenarioError(ScenarioError::Kind::kSelfContact,
                          where + ": token '" + sc.tokens[contact.a].label + "' in contact with itself");
    }
    if (contact.start >= contact.end) {
      throw ScenarioError(ScenarioError::Kind::kInvertedInterval,
                          where + ": start (" + std::to_string(contact.start) +
                              ") must be < end (" + std::to_string(contact.end) + ")");
    }
    if (contact.start < 0) schema_error(where + "/start", "must be >= 0");
    sc.contacts.push_back(contact);
  }
  return sc;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

// First multiple of `interval` that is >= t (t >= 0).
constexpr Tick align_up(Tick t, Tick interval) noexcept {
  return ((t + interval - 1) / interval) * interval;
}

inline SimResult run(const Scenario& sc) {
  SimResult result;
  result.tokens.reserve(sc.tokens.size());
  for (const auto& spec : sc.tokens) result.tokens.push_back(Token::power_on(spec.identity, spec.health));

  const Tick interval = sc.params.advertisement_interval_ticks;
  const double p = sc.params.detection_probability;
  std::mt19937_64 rng(sc.params.rng_seed);
  // 53-bit uniform in [0, 1); avoids std::*_distribution, whose output is
  // implementation-defined.
  auto delivered = [&]() {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
  };

  using Event = std::pair<Tick, std::size_t>;  // (tick, contact index)
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  for (std::size_t i = 0; i < sc.contacts.size(); ++i) {
    const auto first = align_up(sc.contacts[i].start, interval);
    if (first < sc.contacts[i].end) queue.emplace(first, i);
  }

  auto deliver = [&](Tick tick, std::size_t observer, std::size_t advertiser) {
    auto name = result.tokens[advertiser].current_advertisement().text;
    bool accepted = delivered();
    if (accepted) {
      accepted = result.tokens[observer].observe_advertisement(name) == ObserveResult::kLogged;
    }
    result.trace.push_back(TraceEvent{tick, sc.tokens[observer].label, std::move(name), accepted});
  };

  while (!queue.empty()) {
    const auto [tick, idx] = queue.top();
    queue.pop();
    const auto& c = sc.contacts[idx];
    deliver(tick, c.a, c.b);
    deliver(tick, c.b, c.a);
    if (tick + interval < c.end) queue.emplace(tick + interval, idx);
  }
  return result;
}

// Per (observer, peer) counts read back from the token logs.
inline std::map<PairKey, std::uint64_t> simulated_counts(const Scenario& sc, const SimResult& result) {
  std::map<PublicId, std::string> label_of;
  for (const auto& t : sc.tokens) label_of.emplace(t.identity.public_id, t.label);
  std::map<PairKey, std::uint64_t> out;
  for (std::size_t i = 0; i < result.tokens.size(); ++i) {
    for (const auto& rec : result.tokens[i].download_log()) {
      out[{sc.tokens[i].label, label_of.at(rec.peer_public_id)}] = rec.total_count;
    }
  }
  return out;
}

struct OracleCount {
  std::uint64_t trials = 0;  // qualifying (tick, contact) deliveries
  double expected = 0.0;     // trials * p

  bool operator==(const OracleCount&) const = default;
};

// Expected counts by direct enumeration of every (tick, contact) pair. Does
// not touch Token or the event queue, so it can check `run`.
inline std::map<PairKey, OracleCount> oracle_counts(const Scenario& sc) {
  std::map<PairKey, OracleCount> out;
  const Tick interval = sc.params.advertisement_interval_ticks;
  for (const auto& c : sc.contacts) {
    std::uint64_t n = 0;
    for (Tick t = c.start; t < c.end; ++t) {
      if (t % interval == 0) ++n;
    }
    if (n == 0) continue;
    const auto& a = sc.tokens[c.a].label;
    const auto& b = sc.tokens[c.b].label;
    out[{a, b}].trials += n;
    out[{b, a}].trials += n;
  }
  for (auto& [key, v] : out) v.expected = static_cast<double>(v.trials) * sc.params.detection_probability;
  return out;
}

// |observed - n p| <= sigmas * sqrt(n p (1 - p)).
inline bool within_binomial_envelope(std::uint64_t observed, std::uint64_t trials, double p,
                                     double sigmas = 5.0) {
  const double n = static_cast<double>(trials);
  const double sd = std::sqrt(n * p * (1.0 - p));
  return std::abs(static_cast<double>(observed) - n * p) <= sigmas * sd;
}

// Trace CSV with a header row.
inline std::string export_trace_csv(const EventTrace& trace) {
  std::string out = "tick,observer,advertisement,accepted\n";
  for (const auto& e : trace) {
    out += std::to_string(e.tick);
    out += ',';
    out += e.observer;
    out += ',';
    out += e.advertisement;
    out += e.accepted ? ",true\n" : ",false\n";
  }
  return out;
}

}  // namespace ct::sim
