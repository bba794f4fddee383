#pragma once

// Emulated contact tracing token. Identity and configured health code model
// flash-resident configuration and survive power cycles; the encounter log
// lives only in RAM and is lost on power_off.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ct/error.hpp"
#include "ct/protocol.hpp"

namespace ct {

// Per-peer observation tally. A peer whose health code changes while in
// range contributes to several health_counts buckets under one record.
struct EncounterRecord {
  PublicId peer_public_id;
  std::map<HealthCode, std::uint64_t> health_counts;
  std::uint64_t total_count = 0;

  bool operator==(const EncounterRecord&) const = default;
};

enum class ObserveResult : std::uint8_t { kLogged, kIgnoredMalformed, kIgnoredSelf };

class Token {
 public:
  static Token power_on(Identity identity, HealthCode health) {
    return Token(std::move(identity), health, true);
  }

  // Re-power with the retained configuration; the log starts empty.
  void power_on() noexcept { powered_ = true; }

  // Idempotent. Clears the encounter log irreversibly.
  void power_off() noexcept {
    powered_ = false;
    log_.clear();
  }

  bool powered() const noexcept { return powered_; }
  const Identity& identity() const noexcept { return identity_; }
  HealthCode health() const noexcept { return health_; }

  void set_health(HealthCode health) {
    require_power();
    health_ = health;
  }

  AdvertisedName current_advertisement() const {
    require_power();
    return build_advertised_name(Datagram{identity_.public_id, health_});
  }

  // Malformed names and our own advertisement are ignored, not errors.
  ObserveResult observe_advertisement(std::string_view name) {
    require_power();
    auto parsed = parse_advertised_name(name);
    auto* datagram = std::get_if<Datagram>(&parsed);
    if (datagram == nullptr) return ObserveResult::kIgnoredMalformed;
    if (datagram->public_id == identity_.public_id) return ObserveResult::kIgnoredSelf;

    auto it = log_.find(datagram->public_id);
    if (it == log_.end()) {
      it = log_.emplace(datagram->public_id, EncounterRecord{datagram->public_id, {}, 0}).first;
    }
    ++it->second.health_counts[datagram->health];
    ++it->second.total_count;
    return ObserveResult::kLogged;
  }

  // Snapshot sorted by peer id; does not clear the log.
  std::vector<EncounterRecord> download_log() const {
    require_power();
    std::vector<EncounterRecord> out;
    out.reserve(log_.size());
    for (const auto& [id, record] : log_) out.push_back(record);
    return out;
  }

  bool operator==(const Token&) const = default;

 private:
  Token(Identity identity, HealthCode health, bool powered)
      : identity_(std::move(identity)), health_(health), powered_(powered) {}

  void require_power() const {
    if (!powered_) throw TokenOff();
  }

  Identity identity_;
  HealthCode health_;
  bool powered_ = false;
  std::map<PublicId, EncounterRecord> log_;
};

// ---------------------------------------------------------------------------
// Log export: `peer_public_id,health_code,count`, one line per (peer, code),
// LF terminated, no header.
// ---------------------------------------------------------------------------

struct LogLine {
  PublicId peer_public_id;
  HealthCode health;
  std::uint64_t count = 0;

  bool operator==(const LogLine&) const = default;
};

inline std::string export_log_csv(const std::vector<EncounterRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    for (const auto& [code, count] : r.health_counts) {
      out += r.peer_public_id.str();
      out += ',';
      out += code.to_hex();
      out += ',';
      out += std::to_string(count);
      out += '\n';
    }
  }
  return out;
}

// Parses the export format. Errors name the 1-based line number. A trailing
// CR is tolerated so files edited on Windows still load.
inline std::vector<LogLine> parse_log_csv(std::string_view text) {
  std::vector<LogLine> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw MalformedInput("line " + std::to_string(line_no) + ": " + why + ": '" + line + "'");
    };
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
      fail("expected 3 comma-separated fields");
    }
    const auto count_text = line.substr(c2 + 1);
    if (count_text.empty() || count_text.size() > 19 ||
        count_text.find_first_not_of("0123456789") != std::string::npos) {
      fail("count is not a positive integer");
    }
    try {
      LogLine row{PublicId(line.substr(0, c1)), HealthCode::from_hex(line.substr(c1 + 1, c2 - c1 - 1)),
                  std::stoull(count_text)};
      if (row.count == 0) fail("count is not a positive integer");
      out.push_back(std::move(row));
    } catch (const MalformedInput& e) {
      if (std::string_view(e.what()).starts_with("line ")) throw;
      fail(e.what());
    }
  }
  return out;
}

}  // namespace ct
