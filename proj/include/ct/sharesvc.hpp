#pragma once

// Optional encounter-sharing service: dated encounter records, and messages
// that are visible only to people their author has a record with.
//
// Authentication is by preimage: every mutating request carries the
// author's private code and the server checks that it hashes to the public
// id being written under. There are no accounts or sessions.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "ct/error.hpp"
#include "ct/protocol.hpp"

namespace ct::share {

class OversizedBody : public MalformedInput {
 public:
  using MalformedInput::MalformedInput;
};

inline constexpr std::size_t kMaxMessageBytes = 1024;

// ISO-8601 calendar date, YYYY-MM-DD. Lexicographic order is date order.
class Date {
 public:
  explicit Date(std::string_view text) : text_(text) {
    auto digits = [&](std::size_t pos, std::size_t n) {
      for (std::size_t i = pos; i < pos + n; ++i) {
        if (text_[i] < '0' || text_[i] > '9') return false;
      }
      return true;
    };
    if (text_.size() != 10 || text_[4] != '-' || text_[7] != '-' || !digits(0, 4) ||
        !digits(5, 2) || !digits(8, 2)) {
      throw MalformedInput("malformed date: '" + text_ + "' (expected YYYY-MM-DD)");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{std::stoi(text_.substr(0, 4))},
                                          std::chrono::month{static_cast<unsigned>(std::stoi(text_.substr(5, 2)))},
                                          std::chrono::day{static_cast<unsigned>(std::stoi(text_.substr(8, 2)))}};
    if (!ymd.ok()) throw MalformedInput("not a calendar date: '" + text_ + "'");
  }

  const std::string& str() const noexcept { return text_; }
  auto operator<=>(const Date&) const = default;

 private:
  std::string text_;
};

struct ShareRecord {
  PublicId reporter;
  PublicId peer;
  Date date;

  ShareRecord(PublicId r, PublicId p, Date d)
      : reporter(std::move(r)), peer(std::move(p)), date(std::move(d)) {
    if (reporter == peer) throw MalformedInput("reporter and peer must differ: " + reporter.str());
  }

  // `reporter,peer,YYYY-MM-DD`
  std::string to_line() const { return reporter.str() + "," + peer.str() + "," + date.str(); }

  bool links(const PublicId& id) const { return reporter == id || peer == id; }

  // Sort key (date, reporter, peer).
  friend auto operator<=>(const ShareRecord& x, const ShareRecord& y) {
    return std::tie(x.date, x.reporter, x.peer) <=> std::tie(y.date, y.reporter, y.peer);
  }
  friend bool operator==(const ShareRecord& x, const ShareRecord& y) { return (x <=> y) == 0; }
};

inline ShareRecord parse_share_line(std::string_view line) {
  const auto c1 = line.find(',');
  const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
  if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
    throw MalformedInput("malformed share record: '" + std::string(line) + "'");
  }
  return ShareRecord(PublicId(line.substr(0, c1)), PublicId(line.substr(c1 + 1, c2 - c1 - 1)),
                     Date(line.substr(c2 + 1)));
}

// Blank lines are skipped; errors carry 1-based line numbers.
inline std::vector<ShareRecord> parse_share_csv(std::string_view text) {
  std::vector<ShareRecord> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    try {
      out.push_back(parse_share_line(line));
    } catch (const MalformedInput& e) {
      throw MalformedInput("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::string export_share_csv(const std::vector<ShareRecord>& records) {
  std::string out;
  for (const auto& r : records) out += r.to_line() + "\n";
  return out;
}

namespace detail {

inline bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      n = 1, cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      n = 2, cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      n = 3, cp = c & 0x07;
    } else {
      return false;
    }
    if (i + n >= s.size()) return false;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // overlong, surrogate, out of range
    if ((n == 1 && cp < 0x80) || (n == 2 && cp < 0x800) || (n == 3 && cp < 0x10000) ||
        (cp >= 0xd800 && cp <= 0xdfff) || cp > 0x10ffff) {
      return false;
    }
    i += n + 1;
  }
  return true;
}

}  // namespace detail

struct Message {
  std::uint64_t id = 0;
  PublicId author;
  std::string body;
  Date date;

  bool operator==(const Message&) const = default;
};

inline void validate_body(std::string_view body) {
  if (body.empty()) throw MalformedInput("message body is empty");
  if (body.size() > kMaxMessageBytes) {
    throw OversizedBody("message body is " + std::to_string(body.size()) + " bytes (limit " +
                        std::to_string(kMaxMessageBytes) + ")");
  }
  if (!detail::valid_utf8(body)) throw MalformedInput("message body is not valid UTF-8");
}

// ---------------------------------------------------------------------------
// Storage
// ---------------------------------------------------------------------------

// Single-node store. All mutations take an exclusive lock for the whole
// batch; reads take a shared lock, so a reader never sees half a batch.
// With a data directory, every mutation is appended to
//   <dir>/encounters.csv   canonical record lines
//   <dir>/messages.jsonl   one JSON object per message
// before the lock is released, and both files are replayed on construction.
class ShareStore {
 public:
  ShareStore() = default;

  explicit ShareStore(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
    std::filesystem::create_directories(*data_dir_);
    if (std::ifstream in(records_path()); in) {
      std::stringstream buf;
      buf << in.rdbuf();
      for (auto& r : parse_share_csv(buf.str())) insert_record(std::move(r));
    }
    if (std::ifstream in(messages_path()); in) {
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        messages_.push_back(Message{j.at("id").get<std::uint64_t>(), PublicId(j.at("author").get<std::string>()),
                                    j.at("body").get<std::string>(), Date(j.at("date").get<std::string>())});
      }
    }
  }

  ShareStore(const ShareStore&) = delete;
  ShareStore& operator=(const ShareStore&) = delete;

  // Returns the number of records not already present.
  std::size_t add_records(const std::vector<ShareRecord>& records) {
    std::unique_lock lock(mutex_);
    std::vector<const ShareRecord*> fresh;
    for (const auto& r : records) {
      if (insert_record(r)) fresh.push_back(&r);
    }
    if (data_dir_ && !fresh.empty()) {
      std::ofstream out(records_path(), std::ios::app | std::ios::binary);
      for (const auto* r : fresh) out << r->to_line() << '\n';
      out.flush();
      if (!out) throw Error("failed to persist encounter records");
    }
    return fresh.size();
  }

  // Operator bulk import of canonical record lines. Bypasses preimage
  // checks; not reachable over HTTP.
  std::size_t import_csv(std::string_view text) { return add_records(parse_share_csv(text)); }

  std::string export_csv() const { return export_share_csv(all_records()); }

  std::uint64_t add_message(PublicId author, std::string body, Date date) {
    std::unique_lock lock(mutex_);
    Message m{messages_.size() + 1, std::move(author), std::move(body), std::move(date)};
    if (data_dir_) {
      std::ofstream out(messages_path(), std::ios::app | std::ios::binary);
      out << nlohmann::json{{"id", m.id}, {"author", m.author.str()}, {"body", m.body}, {"date", m.date.str()}}.dump()
          << '\n';
      out.flush();
      if (!out) throw Error("failed to persist message");
    }
    messages_.push_back(std::move(m));
    return messages_.back().id;
  }

  // Records naming `id` in either role, sorted by (date, reporter, peer).
  std::vector<ShareRecord> records_for(const PublicId& id) const {
    std::shared_lock lock(mutex_);
    std::vector<ShareRecord> out;
    for (const auto& r : records_) {
      if (r.links(id)) out.push_back(r);
    }
    return out;
  }

  std::vector<ShareRecord> all_records() const {
    std::shared_lock lock(mutex_);
    return {records_.begin(), records_.end()};
  }

  // Messages whose author shares at least one record with `id`, evaluated
  // against the records present now. Sorted by (date, author, id).
  std::vector<Message> messages_visible_to(const PublicId& id) const {
    std::shared_lock lock(mutex_);
    std::vector<Message> out;
    auto it = partners_.find(id);
    if (it == partners_.end()) return out;
    for (const auto& m : messages_) {
      if (it->second.contains(m.author)) out.push_back(m);
    }
    std::sort(out.begin(), out.end(), [](const Message& x, const Message& y) {
      return std::tie(x.date, x.author, x.id) < std::tie(y.date, y.author, y.id);
    });
    return out;
  }

  std::vector<Message> all_messages() const {
    std::shared_lock lock(mutex_);
    return messages_;
  }

 private:
  bool insert_record(const ShareRecord& r) {
    if (!records_.insert(r).second) return false;
    partners_[r.reporter].insert(r.peer);
    partners_[r.peer].insert(r.reporter);
    return true;
  }

  std::filesystem::path records_path() const { return *data_dir_ / "encounters.csv"; }
  std::filesystem::path messages_path() const { return *data_dir_ / "messages.jsonl"; }

  mutable std::shared_mutex mutex_;
  std::optional<std::filesystem::path> data_dir_;
  std::set<ShareRecord> records_;
  std::map<PublicId, std::set<PublicId>> partners_;
  std::vector<Message> messages_;
};

// ---------------------------------------------------------------------------
// Service operations
// ---------------------------------------------------------------------------

class ShareService {
 public:
  explicit ShareService(ShareStore& store) : store_(store) {}

  // Every record must name the caller as reporter. Nothing is stored unless
  // the whole batch authenticates.
  std::size_t submit_encounters(const PrivateCode& reporter_code, const std::vector<ShareRecord>& records) {
    const auto reporter = derive_public_id(reporter_code);
    for (const auto& r : records) {
      if (r.reporter != reporter) {
        throw AuthenticationFailure("private code does not match reporter " + r.reporter.str());
      }
    }
    return store_.add_records(records);
  }

  std::vector<ShareRecord> query_encounters(const PublicId& id) const { return store_.records_for(id); }

  std::uint64_t post_message(const PrivateCode& author_code, std::string body, Date date) {
    validate_body(body);
    return store_.add_message(derive_public_id(author_code), std::move(body), std::move(date));
  }

  std::vector<Message> fetch_messages_for(const PublicId& id) const { return store_.messages_visible_to(id); }

  ShareStore& store() noexcept { return store_; }

 private:
  ShareStore& store_;
};

// ---------------------------------------------------------------------------
// JSON mapping shared by server and client
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ShareRecord& r) {
  return {{"reporter", r.reporter.str()}, {"peer", r.peer.str()}, {"date", r.date.str()}};
}

inline ShareRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw MalformedInput("record must be an object");
  auto field = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw MalformedInput(std::string("record field '") + key + "' missing");
    return it->get<std::string>();
  };
  return ShareRecord(PublicId(field("reporter")), PublicId(field("peer")), Date(field("date")));
}

inline nlohmann::json to_json(const Message& m) {
  return {{"id", m.id}, {"author", m.author.str()}, {"body", m.body}, {"date", m.date.str()}};
}

inline Message message_from_json(const nlohmann::json& j) {
  return Message{j.at("id").get<std::uint64_t>(), PublicId(j.at("author").get<std::string>()),
                 j.at("body").get<std::string>(), Date(j.at("date").get<std::string>())};
}

}  // namespace ct::share
