// ct: operator command line for the contact tracing token suite.
//
// Exit codes: 0 success, 1 usage or validation error, 2 I/O or network error.

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ct/bridge.hpp"
#include "ct/error.hpp"
#include "ct/protocol.hpp"
#include "ct/report.hpp"
#include "ct/share_http.hpp"
#include "ct/sharesvc.hpp"
#include "ct/simnet.hpp"
#include "ct/token.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kIoError = 2;

constexpr const char* kDefaultBridgeUrl = "http://127.0.0.1:8019";
constexpr const char* kDefaultShareUrl = "http://127.0.0.1:8020";

class IoError : public ct::Error {
 public:
  using ct::Error::Error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string env_or(const char* name, const char* fallback) {
  const char* v = std::getenv(name);
  return (v != nullptr && *v != '\0') ? v : fallback;
}

std::vector<ct::Symptom> symptoms_from_labels(const std::vector<std::string>& labels) {
  std::vector<ct::Symptom> out;
  for (const auto& l : labels) {
    auto s = ct::symptom_from_label(l);
    if (!s) throw ct::MalformedInput("unknown symptom label: '" + l + "' (see `ct health list`)");
    out.push_back(*s);
  }
  return out;
}

// --- id ---------------------------------------------------------------------

void add_id(CLI::App& app, std::function<int()>& action) {
  auto* id = app.add_subcommand("id", "Identity generation and verification");
  id->require_subcommand(1);

  auto* fresh = id->add_subcommand("new", "Generate a private code and its public id");
  auto seed = std::make_shared<std::string>();
  fresh->add_option("--seed", *seed, "Deterministic seed (testing only)");
  fresh->callback([&action, fresh, seed] {
    action = [fresh, seed] {
      std::optional<ct::Identity> identity;
      if (fresh->count("--seed") > 0) {
        identity = ct::identity_from_seed(*seed);
      } else {
        ct::SystemEntropy source;
        identity = ct::generate_identity(source);
      }
      std::cout << identity->private_code.str() << '\n' << identity->public_id.str() << '\n';
      return kOk;
    };
  });

  auto* derive = id->add_subcommand("derive", "Print the public id of a private code");
  auto code = std::make_shared<std::string>();
  derive->add_option("private_code", *code)->required();
  derive->callback([&action, code] {
    action = [code] {
      std::cout << ct::derive_public_id(*code) << '\n';
      return kOk;
    };
  });

  auto* verify = id->add_subcommand("verify", "Check that a private code produced a public id");
  auto vcode = std::make_shared<std::string>();
  auto vid = std::make_shared<std::string>();
  verify->add_option("private_code", *vcode)->required();
  verify->add_option("public_id", *vid)->required();
  verify->callback([&action, vcode, vid] {
    action = [vcode, vid] {
      const bool ok = ct::verify_public_id(*vcode, *vid);
      std::cout << (ok ? "true" : "false") << '\n';
      return ok ? kOk : kInvalid;
    };
  });
}

// --- health -----------------------------------------------------------------

void add_health(CLI::App& app, std::function<int()>& action) {
  auto* health = app.add_subcommand("health", "Encode and decode symptom health codes");
  health->require_subcommand(1);

  auto* encode = health->add_subcommand("encode", "Symptom labels -> 4-hex health code");
  auto labels = std::make_shared<std::vector<std::string>>();
  encode->add_option("labels", *labels, "Symptom labels, exactly as listed by `ct health list`");
  encode->callback([&action, labels] {
    action = [labels] {
      std::cout << ct::encode_health(symptoms_from_labels(*labels)) << '\n';
      return kOk;
    };
  });

  auto* decode = health->add_subcommand("decode", "4-hex health code -> symptom labels");
  auto code = std::make_shared<std::string>();
  decode->add_option("code", *code)->required();
  decode->callback([&action, code] {
    action = [code] {
      for (auto s : ct::decode_health(*code)) std::cout << ct::label(s) << '\n';
      return kOk;
    };
  });

  auto* list = health->add_subcommand("list", "Print the symptom list with bit values");
  list->callback([&action] {
    action = [] {
      for (auto s : ct::all_symptoms()) std::cout << ct::bit_value(s) << '\t' << ct::label(s) << '\n';
      return kOk;
    };
  });
}

// --- token (via bridge) -----------------------------------------------------

void add_token(CLI::App& app, std::function<int()>& action) {
  auto* token = app.add_subcommand("token", "Control the emulated token through the local bridge");
  token->require_subcommand(1);
  auto url = std::make_shared<std::string>(env_or("CT_BRIDGE_URL", kDefaultBridgeUrl));
  token->add_option("--bridge", *url, "Bridge base URL (env CT_BRIDGE_URL)");

  auto* update = token->add_subcommand("update-hardware", "Set identity and health code on the token");
  auto code = std::make_shared<std::string>();
  auto hex = std::make_shared<std::string>();
  auto labels = std::make_shared<std::vector<std::string>>();
  update->add_option("--private", *code, "Private code")->required();
  auto* hex_opt = update->add_option("--health", *hex, "4-hex health code");
  auto* sym_opt = update->add_option("--symptoms", *labels, "Symptom labels");
  hex_opt->excludes(sym_opt);
  update->callback([&action, url, code, hex, labels, update] {
    action = [url, code, hex, labels, update] {
      const auto health = update->count("--health") > 0 ? ct::HealthCode::from_hex(*hex)
                                                        : ct::HealthCode::from_symptoms(symptoms_from_labels(*labels));
      std::cout << ct::bridge::BridgeClient(*url).update_hardware(ct::PrivateCode(*code), health) << '\n';
      return kOk;
    };
  });

  auto* download = token->add_subcommand("download-log", "Print (or save) the token's encounter log CSV");
  auto out = std::make_shared<std::string>();
  download->add_option("-o,--output", *out, "Write to file instead of stdout");
  download->callback([&action, url, out] {
    action = [url, out] {
      const auto csv = ct::bridge::BridgeClient(*url).download_log();
      if (out->empty()) {
        std::cout << csv;
      } else {
        write_file(*out, csv);
      }
      return kOk;
    };
  });

  auto* power = token->add_subcommand("power", "Power the token on or off (off clears the log)");
  auto state = std::make_shared<std::string>();
  power->add_option("state", *state)->required()->check(CLI::IsMember({"on", "off"}));
  power->callback([&action, url, state] {
    action = [url, state] {
      const bool on = ct::bridge::BridgeClient(*url).power(*state == "on");
      std::cout << (on ? "on" : "off") << '\n';
      return kOk;
    };
  });

  auto* adv = token->add_subcommand("advertisement", "Print the current BLE name");
  adv->callback([&action, url] {
    action = [url] {
      std::cout << ct::bridge::BridgeClient(*url).advertisement() << '\n';
      return kOk;
    };
  });

  auto* observe = token->add_subcommand("observe", "Feed a BLE name to the token's scanner");
  auto name = std::make_shared<std::string>();
  observe->add_option("name", *name)->required();
  observe->callback([&action, url, name] {
    action = [url, name] {
      std::cout << ct::bridge::BridgeClient(*url).observe(*name) << '\n';
      return kOk;
    };
  });

  auto* status = token->add_subcommand("status", "Print token status as JSON");
  status->callback([&action, url] {
    action = [url] {
      std::cout << ct::bridge::BridgeClient(*url).status().dump() << '\n';
      return kOk;
    };
  });
}

void add_bridge(CLI::App& app, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("bridge", "Run the local token bridge service for the config page");
  auto host = std::make_shared<std::string>("127.0.0.1");
  auto port = std::make_shared<int>(8019);
  cmd->add_option("--host", *host);
  cmd->add_option("--port", *port);
  cmd->callback([&action, host, port] {
    action = [host, port] {
      ct::bridge::Bridge bridge;
      httplib::Server server;
      ct::bridge::install_bridge_routes(server, bridge);
      std::cout << "bridge listening on http://" << *host << ':' << *port << std::endl;
      if (!server.listen(*host, *port)) throw IoError("cannot listen on " + *host + ":" + std::to_string(*port));
      return kOk;
    };
  });
}

// --- sim --------------------------------------------------------------------

void add_sim(CLI::App& app, std::function<int()>& action) {
  auto* sim = app.add_subcommand("sim", "Proximity simulation");
  sim->require_subcommand(1);

  auto* run = sim->add_subcommand("run", "Run a scenario and print a per-token summary");
  auto path = std::make_shared<std::string>();
  auto trace_out = std::make_shared<std::string>();
  auto logs_out = std::make_shared<std::string>();
  auto check = std::make_shared<bool>(false);
  run->add_option("scenario", *path, "Scenario JSON file")->required();
  run->add_option("--trace-out", *trace_out, "Write the event trace CSV here");
  run->add_option("--logs-out", *logs_out, "Write <label>.csv token logs into this directory");
  run->add_flag("--check-oracle", *check, "Fail if token counts disagree with the enumeration oracle");
  run->callback([&action, path, trace_out, logs_out, check] {
    action = [path, trace_out, logs_out, check] {
      const auto scenario = ct::sim::load_scenario(read_file(*path));
      const auto result = ct::sim::run(scenario);

      if (!trace_out->empty()) write_file(*trace_out, ct::sim::export_trace_csv(result.trace));
      if (!logs_out->empty()) {
        fs::create_directories(*logs_out);
        for (std::size_t i = 0; i < scenario.tokens.size(); ++i) {
          write_file(fs::path(*logs_out) / (scenario.tokens[i].label + ".csv"),
                     ct::export_log_csv(result.tokens[i].download_log()));
        }
      }

      std::cout << "token\tpublic_id\tpeers\tobservations\n";
      for (std::size_t i = 0; i < scenario.tokens.size(); ++i) {
        const auto log = result.tokens[i].download_log();
        std::uint64_t total = 0;
        for (const auto& r : log) total += r.total_count;
        std::cout << scenario.tokens[i].label << '\t' << scenario.tokens[i].identity.public_id.str() << '\t'
                  << log.size() << '\t' << total << '\n';
      }

      if (*check) {
        const auto simulated = ct::sim::simulated_counts(scenario, result);
        const auto oracle = ct::sim::oracle_counts(scenario);
        const double p = scenario.params.detection_probability;
        bool ok = true;
        for (const auto& [key, expect] : oracle) {
          auto it = simulated.find(key);
          const std::uint64_t got = it == simulated.end() ? 0 : it->second;
          const bool pass = p >= 1.0 ? got == expect.trials
                                     : ct::sim::within_binomial_envelope(got, expect.trials, p);
          if (!pass) {
            ok = false;
            std::cerr << "oracle mismatch: " << key.first << " -> " << key.second << ": simulated " << got
                      << ", expected " << expect.expected << '\n';
          }
        }
        for (const auto& [key, got] : simulated) {
          if (!oracle.contains(key)) {
            ok = false;
            std::cerr << "phantom encounter: " << key.first << " -> " << key.second << " (" << got << ")\n";
          }
        }
        std::cout << "oracle check: " << (ok ? "pass" : "FAIL") << '\n';
        if (!ok) return kInvalid;
      }
      return kOk;
    };
  });

  auto* oracle = sim->add_subcommand("oracle", "Print expected per-pair counts by direct enumeration");
  auto opath = std::make_shared<std::string>();
  oracle->add_option("scenario", *opath)->required();
  oracle->callback([&action, opath] {
    action = [opath] {
      const auto scenario = ct::sim::load_scenario(read_file(*opath));
      std::cout << "observer\tpeer\ttrials\texpected\n";
      for (const auto& [key, v] : ct::sim::oracle_counts(scenario)) {
        std::cout << key.first << '\t' << key.second << '\t' << v.trials << '\t' << v.expected << '\n';
      }
      return kOk;
    };
  });
}

// --- report -----------------------------------------------------------------

void add_report(CLI::App& app, std::function<int()>& action) {
  auto* cmd = app.add_subcommand("report", "Summarize a downloaded token log");
  auto path = std::make_shared<std::string>();
  auto benign = std::make_shared<std::vector<std::string>>();
  cmd->add_option("log", *path, "Token log CSV")->required();
  cmd->add_option("--benign", *benign,
                  "Labels that do not count as symptoms (default: Feeling fine, Tested negative, Wearing a mask)");
  cmd->callback([&action, path, benign, cmd] {
    action = [path, benign, cmd] {
      const auto benign_set =
          cmd->count("--benign") > 0 ? symptoms_from_labels(*benign) : ct::report::default_benign();
      const auto lines = ct::parse_log_csv(read_file(*path));
      std::cout << ct::report::format_report(ct::report::build_report(lines, benign_set));
      return kOk;
    };
  });
}

// --- share ------------------------------------------------------------------

void add_share(CLI::App& app, std::function<int()>& action) {
  auto* share = app.add_subcommand("share", "Encounter-sharing service client and server");
  share->require_subcommand(1);
  auto url = std::make_shared<std::string>(env_or("CT_SHARE_URL", kDefaultShareUrl));
  share->add_option("--url", *url, "Service base URL (env CT_SHARE_URL)");

  auto* submit = share->add_subcommand("submit", "Submit reporter,peer,YYYY-MM-DD lines");
  auto scode = std::make_shared<std::string>();
  auto sfile = std::make_shared<std::string>();
  submit->add_option("--private", *scode, "Reporter's private code")->required();
  submit->add_option("file", *sfile, "CSV of share records")->required();
  submit->callback([&action, url, scode, sfile] {
    action = [url, scode, sfile] {
      const auto records = ct::share::parse_share_csv(read_file(*sfile));
      std::cout << ct::share::ShareClient(*url).submit(ct::PrivateCode(*scode), records) << '\n';
      return kOk;
    };
  });

  auto* query = share->add_subcommand("query", "Print records naming a public id");
  auto qid = std::make_shared<std::string>();
  query->add_option("public_id", *qid)->required();
  query->callback([&action, url, qid] {
    action = [url, qid] {
      std::cout << ct::share::export_share_csv(ct::share::ShareClient(*url).query(ct::PublicId(*qid)));
      return kOk;
    };
  });

  auto* post = share->add_subcommand("post", "Post a message to your encounters");
  auto pcode = std::make_shared<std::string>();
  auto pauthor = std::make_shared<std::string>();
  auto pdate = std::make_shared<std::string>();
  auto pbody = std::make_shared<std::string>();
  post->add_option("--private", *pcode, "Author's private code")->required();
  post->add_option("--author", *pauthor, "Expected public id; refuses to post if the code does not match");
  post->add_option("--date", *pdate, "YYYY-MM-DD")->required();
  post->add_option("body", *pbody)->required();
  post->callback([&action, url, pcode, pauthor, pdate, pbody] {
    action = [url, pcode, pauthor, pdate, pbody] {
      const ct::PrivateCode code(*pcode);
      if (!pauthor->empty() && !ct::verify_public_id(code, ct::PublicId(*pauthor))) {
        throw ct::AuthenticationFailure("private code does not match author " + *pauthor);
      }
      ct::share::validate_body(*pbody);
      std::cout << ct::share::ShareClient(*url).post_message(code, *pbody, ct::share::Date(*pdate)) << '\n';
      return kOk;
    };
  });

  auto* fetch = share->add_subcommand("fetch", "Print messages visible to a public id (JSON lines)");
  auto fid = std::make_shared<std::string>();
  fetch->add_option("public_id", *fid)->required();
  fetch->callback([&action, url, fid] {
    action = [url, fid] {
      for (const auto& m : ct::share::ShareClient(*url).fetch(ct::PublicId(*fid))) {
        std::cout << ct::share::to_json(m).dump() << '\n';
      }
      return kOk;
    };
  });

  auto* serve = share->add_subcommand("serve", "Run the sharing service");
  auto host = std::make_shared<std::string>("127.0.0.1");
  auto port = std::make_shared<int>(8020);
  auto data_dir = std::make_shared<std::string>();
  serve->add_option("--host", *host);
  serve->add_option("--port", *port);
  serve->add_option("--data-dir", *data_dir, "Persist records and messages here (default: in memory)");
  serve->callback([&action, host, port, data_dir] {
    action = [host, port, data_dir] {
      auto store = data_dir->empty() ? std::make_unique<ct::share::ShareStore>()
                                     : std::make_unique<ct::share::ShareStore>(fs::path(*data_dir));
      ct::share::ShareService service(*store);
      httplib::Server server;
      ct::share::install_share_routes(server, service);
      std::cout << "share service listening on http://" << *host << ':' << *port << std::endl;
      if (!server.listen(*host, *port)) throw IoError("cannot listen on " + *host + ":" + std::to_string(*port));
      return kOk;
    };
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact tracing token suite"};
  app.name("ct");
  app.require_subcommand(1);

  std::function<int()> action;
  add_id(app, action);
  add_health(app, action);
  add_token(app, action);
  add_bridge(app, action);
  add_sim(app, action);
  add_report(app, action);
  add_share(app, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    return action ? action() : kInvalid;
  } catch (const ct::NetworkError& e) {
    std::cerr << "ct: network error: " << e.what() << '\n';
    return kIoError;
  } catch (const IoError& e) {
    std::cerr << "ct: " << e.what() << '\n';
    return kIoError;
  } catch (const ct::EntropyUnavailable& e) {
    std::cerr << "ct: " << e.what() << '\n';
    return kIoError;
  } catch (const ct::AuthenticationFailure& e) {
    std::cerr << "ct: authentication failed: " << e.what() << '\n';
    return kInvalid;
  } catch (const ct::Error& e) {
    std::cerr << "ct: " << e.what() << '\n';
    return kInvalid;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ct: " << e.what() << '\n';
    return kIoError;
  }
}
