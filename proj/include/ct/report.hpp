#pragma once

// Encounter report over a downloaded token log.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ct/protocol.hpp"
#include "ct/token.hpp"

namespace ct::report {

// Symptoms that do not by themselves mark an encounter as symptomatic.
inline std::vector<Symptom> default_benign() {
  return {Symptom::kFeelingFine, Symptom::kTestedNegative, Symptom::kWearingMask};
}

struct ReportRow {
  PublicId peer_public_id;
  HealthCode health;
  std::vector<Symptom> symptoms;
  std::uint64_t count = 0;
  bool symptomatic = false;
};

inline bool is_symptomatic(HealthCode code, std::span<const Symptom> benign) {
  const auto benign_mask = HealthCode::from_symptoms(benign).mask();
  return (code.mask() & ~benign_mask) != 0;
}

struct Report {
  std::vector<ReportRow> rows;
  std::size_t symptomatic_peers = 0;  // distinct peers with any symptomatic row
};

// One row per (peer, health code) line of the log, in file order.
inline Report build_report(const std::vector<LogLine>& lines, std::span<const Symptom> benign) {
  Report r;
  std::set<PublicId> flagged;
  for (const auto& line : lines) {
    ReportRow row{line.peer_public_id, line.health, line.health.symptoms(), line.count,
                  is_symptomatic(line.health, benign)};
    if (row.symptomatic) flagged.insert(row.peer_public_id);
    r.rows.push_back(std::move(row));
  }
  r.symptomatic_peers = flagged.size();
  return r;
}

inline std::string join_labels(const std::vector<Symptom>& symptoms) {
  if (symptoms.empty()) return "(none)";
  std::string out;
  for (auto s : symptoms) {
    if (!out.empty()) out += "; ";
    out += label(s);
  }
  return out;
}

// Tab-separated table followed by a summary line.
inline std::string format_report(const Report& r) {
  std::string out = "peer\thealth\tcount\tflag\tsymptoms\n";
  for (const auto& row : r.rows) {
    out += row.peer_public_id.str() + "\t" + row.health.to_hex() + "\t" + std::to_string(row.count) + "\t" +
           (row.symptomatic ? "SYMPTOMATIC" : "-") + "\t" + join_labels(row.symptoms) + "\n";
  }
  out += "symptomatic encounters: " + std::to_string(r.symptomatic_peers) + "\n";
  return out;
}

}  // namespace ct::report
