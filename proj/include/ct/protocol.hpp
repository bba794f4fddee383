#pragma once

// Wire-level codec for the contact tracing token: symptom bitmask health
// codes, the 20-hex datagram, the "#C19:" BLE local name, and the
// private-code -> public-id identity scheme.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <compare>
#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ct/error.hpp"

namespace ct {

// ---------------------------------------------------------------------------
// hex helpers
// ---------------------------------------------------------------------------

namespace detail {

constexpr bool is_hex(char c) noexcept {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

constexpr char to_lower(char c) noexcept {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

constexpr bool all_hex(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), [](char c) { return is_hex(c); });
}

inline std::string lower_copy(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](char c) { return to_lower(c); });
  return out;
}

inline std::string hex_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

// Fixed-width lower-case hex token; N is the number of characters.
template <std::size_t N>
std::string checked_hex(std::string_view text, const char* what) {
  if (text.size() != N || !all_hex(text)) {
    throw MalformedInput(std::string("malformed ") + what + ": '" + std::string(text) +
                         "' (expected " + std::to_string(N) + " hex chars)");
  }
  return lower_copy(text);
}

}  // namespace detail

// SHA-256 of `data`.
inline std::array<std::uint8_t, 32> sha256(std::string_view data) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != digest.size()) {
    throw Error("SHA-256 digest failed");
  }
  return digest;
}

// ---------------------------------------------------------------------------
// Symptoms and health codes
// ---------------------------------------------------------------------------

enum class Symptom : std::uint8_t {
  kFeelingFine = 0,
  kSoreThroat,
  kCough,
  kRunnyNose,
  kShortnessOfBreath,
  kMusclePain,
  kLossOfSmellOrTaste,
  kDiarrhea,
  kFever,
  kHeadache,
  kTestedNegative,
  kTestedPositive,
  kWearingMask,
  kNotWearingMask,
  kGettingBetter,
  kGettingWorse,
};

inline constexpr std::size_t kSymptomCount = 16;

inline constexpr std::array<std::string_view, kSymptomCount> kSymptomLabels = {
    "Feeling fine",
    "Sore throat",
    "Cough",
    "Runny nose or nasal congestion",
    "Shortness of breath or difficulty breathing",
    "Muscle pain",
    "Loss of smell or taste",
    "Diarrhea",
    "Fever",
    "Headache",
    "Tested negative for Covid-19",
    "Tested positive for Covid-19",
    "Wearing a mask",
    "Not wearing a mask",
    "Symptoms are getting better",
    "Symptoms are getting worse",
};

constexpr int ordinal(Symptom s) noexcept { return static_cast<int>(s); }

constexpr std::uint16_t bit_value(Symptom s) noexcept {
  return static_cast<std::uint16_t>(1u << ordinal(s));
}

constexpr std::string_view label(Symptom s) noexcept { return kSymptomLabels[ordinal(s)]; }

constexpr std::array<Symptom, kSymptomCount> all_symptoms() noexcept {
  std::array<Symptom, kSymptomCount> out{};
  for (std::size_t i = 0; i < kSymptomCount; ++i) out[i] = static_cast<Symptom>(i);
  return out;
}

// Exact, case-sensitive match against the canonical labels.
inline std::optional<Symptom> symptom_from_label(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kSymptomCount; ++i) {
    if (kSymptomLabels[i] == text) return static_cast<Symptom>(i);
  }
  return std::nullopt;
}

// 16-flag symptom bitmask. The mask is the sum of the bit values of the
// member symptoms; no semantic validation of flag combinations is done.
class HealthCode {
 public:
  constexpr HealthCode() noexcept = default;
  constexpr explicit HealthCode(std::uint16_t mask) noexcept : mask_(mask) {}

  static constexpr HealthCode from_symptoms(std::span<const Symptom> symptoms) noexcept {
    std::uint16_t mask = 0;
    for (auto s : symptoms) mask |= bit_value(s);
    return HealthCode(mask);
  }

  // Accepts exactly 4 hex digits, either case.
  static HealthCode from_hex(std::string_view text) {
    auto hex = detail::checked_hex<4>(text, "health code");
    return HealthCode(static_cast<std::uint16_t>(std::stoul(hex, nullptr, 16)));
  }

  constexpr std::uint16_t mask() const noexcept { return mask_; }
  constexpr bool contains(Symptom s) const noexcept { return (mask_ & bit_value(s)) != 0; }

  std::vector<Symptom> symptoms() const {
    std::vector<Symptom> out;
    for (auto s : all_symptoms()) {
      if (contains(s)) out.push_back(s);
    }
    return out;
  }

  std::string to_hex() const {
    const std::array<std::uint8_t, 2> bytes{static_cast<std::uint8_t>(mask_ >> 8),
                                            static_cast<std::uint8_t>(mask_ & 0xff)};
    return detail::hex_encode(bytes);
  }

  constexpr auto operator<=>(const HealthCode&) const noexcept = default;

 private:
  std::uint16_t mask_ = 0;
};

inline std::string encode_health(std::span<const Symptom> symptoms) {
  return HealthCode::from_symptoms(symptoms).to_hex();
}

inline std::vector<Symptom> decode_health(std::string_view code) {
  return HealthCode::from_hex(code).symptoms();
}

// ---------------------------------------------------------------------------
// Identity
// ---------------------------------------------------------------------------

// 16 lower-case hex chars (64 bits).
class PublicId {
 public:
  static constexpr std::size_t kLength = 16;

  explicit PublicId(std::string_view text) : hex_(detail::checked_hex<kLength>(text, "public id")) {}

  const std::string& str() const noexcept { return hex_; }
  auto operator<=>(const PublicId&) const = default;

 private:
  std::string hex_;
};

// 32 lower-case hex chars (128 bits). Secret; revealing it proves authorship
// of the derived public id.
class PrivateCode {
 public:
  static constexpr std::size_t kLength = 32;
  static constexpr std::size_t kBytes = kLength / 2;

  explicit PrivateCode(std::string_view text)
      : hex_(detail::checked_hex<kLength>(text, "private code")) {}

  static PrivateCode from_bytes(std::span<const std::uint8_t, kBytes> bytes) {
    return PrivateCode(detail::hex_encode(bytes));
  }

  const std::string& str() const noexcept { return hex_; }
  auto operator<=>(const PrivateCode&) const = default;

 private:
  std::string hex_;
};

// First 8 bytes of SHA-256 over the ASCII (lower-case) private code.
inline PublicId derive_public_id(const PrivateCode& code) {
  const auto digest = sha256(code.str());
  return PublicId(detail::hex_encode(std::span(digest).first<8>()));
}

inline std::string derive_public_id(std::string_view private_code) {
  return derive_public_id(PrivateCode(private_code)).str();
}

inline bool verify_public_id(const PrivateCode& code, const PublicId& id) {
  return derive_public_id(code) == id;
}

// Both arguments are validated; malformed text throws MalformedInput.
inline bool verify_public_id(std::string_view private_code, std::string_view public_id) {
  return verify_public_id(PrivateCode(private_code), PublicId(public_id));
}

struct Identity {
  PrivateCode private_code;
  PublicId public_id;

  explicit Identity(PrivateCode code)
      : private_code(std::move(code)), public_id(derive_public_id(private_code)) {}

  bool operator==(const Identity&) const = default;
};

// Anything that can fill a byte buffer with randomness; returns false when
// no entropy could be obtained.
template <typename S>
concept EntropySource = requires(S& s, std::span<std::uint8_t> out) {
  { s.fill(out) } -> std::same_as<bool>;
};

// OS entropy via std::random_device.
class SystemEntropy {
 public:
  bool fill(std::span<std::uint8_t> out) noexcept {
    try {
      std::random_device rd;
      for (std::size_t i = 0; i < out.size(); i += 4) {
        auto word = static_cast<std::uint32_t>(rd());
        for (std::size_t k = 0; k < 4 && i + k < out.size(); ++k) {
          out[i + k] = static_cast<std::uint8_t>(word >> (8 * k));
        }
      }
      return true;
    } catch (...) {
      return false;
    }
  }
};

// Deterministic byte stream SHA-256(seed ":" counter) for reproducible
// identities in tests, scenarios and `ct id new --seed`.
class SeededEntropy {
 public:
  explicit SeededEntropy(std::string seed) : seed_(std::move(seed)) {}

  bool fill(std::span<std::uint8_t> out) {
    for (auto& b : out) {
      if (used_ == block_.size()) {
        block_ = sha256(seed_ + ":" + std::to_string(counter_++));
        used_ = 0;
      }
      b = block_[used_++];
    }
    return true;
  }

 private:
  std::string seed_;
  std::uint64_t counter_ = 0;
  std::array<std::uint8_t, 32> block_{};
  std::size_t used_ = block_.size();
};

template <EntropySource S>
Identity generate_identity(S& source) {
  std::array<std::uint8_t, PrivateCode::kBytes> bytes{};
  if (!source.fill(bytes)) throw EntropyUnavailable();
  return Identity(PrivateCode::from_bytes(bytes));
}

inline Identity identity_from_seed(std::string seed) {
  SeededEntropy source(std::move(seed));
  return generate_identity(source);
}

// ---------------------------------------------------------------------------
// Datagram and advertised name
// ---------------------------------------------------------------------------

struct Datagram {
  PublicId public_id;
  HealthCode health;

  // 20 lower-case hex chars: public id then health code.
  std::string str() const { return public_id.str() + health.to_hex(); }

  bool operator==(const Datagram&) const = default;
};

inline constexpr std::string_view kNamePrefix = "#C19:";
inline constexpr std::size_t kDatagramLength = PublicId::kLength + 4;
inline constexpr std::size_t kAdvertisedNameLength = kNamePrefix.size() + kDatagramLength;

struct AdvertisedName {
  std::string text;

  bool operator==(const AdvertisedName&) const = default;
};

inline AdvertisedName build_advertised_name(const Datagram& d) {
  return AdvertisedName{std::string(kNamePrefix) + d.str()};
}

// Why a BLE name was not accepted. These are expected outcomes of scanning
// (most names in range belong to unrelated devices), not faults.
enum class ParseReject : std::uint8_t { kWrongPrefix, kWrongLength, kNonHex };

constexpr std::string_view to_string(ParseReject r) noexcept {
  switch (r) {
    case ParseReject::kWrongPrefix: return "wrong-prefix";
    case ParseReject::kWrongLength: return "wrong-length";
    case ParseReject::kNonHex: return "non-hex";
  }
  return "unknown";
}

using ParseOutcome = std::variant<Datagram, ParseReject>;

inline ParseOutcome parse_advertised_name(std::string_view text) {
  if (!text.starts_with(kNamePrefix)) return ParseReject::kWrongPrefix;
  if (text.size() != kAdvertisedNameLength) return ParseReject::kWrongLength;
  const auto payload = text.substr(kNamePrefix.size());
  if (!detail::all_hex(payload)) return ParseReject::kNonHex;
  return Datagram{PublicId(payload.substr(0, PublicId::kLength)),
                  HealthCode::from_hex(payload.substr(PublicId::kLength))};
}

}  // namespace ct
