// Drives the built `ct` binary as a subprocess.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ct/bridge.hpp"
#include "ct/share_http.hpp"
#include "ct/sharesvc.hpp"
#include "ct/simnet.hpp"
#include "http_fixture.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += (c == '\'') ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

Run ct_run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + quote(CT_BINARY) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string data(const char* name) { return quote(std::string(CT_TEST_DATA) + "/" + name); }

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("ct-cli-" + std::to_string(::getpid()) + "-" + std::to_string(++n_))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int n_ = 0;
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(CliId, NewPrintsTwoLines) {
  const auto r = ct_run("id new");
  ASSERT_EQ(r.exit_code, 0);
  std::istringstream in(r.out);
  std::string code, id, extra;
  ASSERT_TRUE(std::getline(in, code));
  ASSERT_TRUE(std::getline(in, id));
  EXPECT_FALSE(std::getline(in, extra));
  EXPECT_EQ(code.size(), 32u);
  EXPECT_EQ(id.size(), 16u);
  EXPECT_TRUE(ct::verify_public_id(code, id));
  EXPECT_EQ(ct_run("id verify " + code + " " + id).out, "true\n");
}

TEST(CliId, SeedIsDeterministic) {
  const auto a = ct_run("id new --seed demo");
  const auto b = ct_run("id new --seed demo");
  EXPECT_EQ(a.out, b.out);
  const auto expect = ct::identity_from_seed("demo");
  EXPECT_EQ(a.out, expect.private_code.str() + "\n" + expect.public_id.str() + "\n");
}

TEST(CliId, VerifyAndDerive) {
  const std::string zero(32, '0');
  EXPECT_EQ(ct_run("id derive " + zero).out, "84e0c0eafaa95a34\n");
  const auto ok = ct_run("id verify " + zero + " 84e0c0eafaa95a34");
  EXPECT_EQ(ok.exit_code, 0);
  const auto bad = ct_run("id verify " + zero + " 2ef94e20ba20beea");
  EXPECT_EQ(bad.exit_code, 1);
  EXPECT_EQ(bad.out, "false\n");
  EXPECT_EQ(ct_run("id derive 1234").exit_code, 1);
}

TEST(CliHealth, EncodeDecode) {
  auto r = ct_run("health encode 'Sore throat' 'Headache'");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "0202\n");
  r = ct_run("health decode 0001");
  EXPECT_EQ(r.out, "Feeling fine\n");
  EXPECT_EQ(ct_run("health decode 020").exit_code, 1);
  EXPECT_EQ(ct_run("health encode 'Sore thraot'").exit_code, 1);
  EXPECT_EQ(ct_run("health encode").out, "0000\n");
  const auto list = ct_run("health list");
  EXPECT_TRUE(list.out.starts_with("1\tFeeling fine\n2\tSore throat\n"));
  EXPECT_TRUE(list.out.ends_with("32768\tSymptoms are getting worse\n"));
}

TEST(CliUsage, BadArgumentsExitOne) {
  EXPECT_EQ(ct_run("").exit_code, 1);
  EXPECT_EQ(ct_run("frobnicate").exit_code, 1);
  EXPECT_EQ(ct_run("health").exit_code, 1);
  EXPECT_EQ(ct_run("--help").exit_code, 0);
}

TEST(CliSim, TwoTokenDemo) {
  TempDir tmp;
  const auto trace = tmp.path() / "trace.csv";
  const auto logs = tmp.path() / "logs";
  const auto r = ct_run("sim run " + data("two_tokens.json") + " --check-oracle --trace-out " + quote(trace) +
                        " --logs-out " + quote(logs));
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const auto alice = ct::identity_from_seed("alice").public_id.str();
  const auto bob = ct::identity_from_seed("bob").public_id.str();
  EXPECT_EQ(r.out, "token\tpublic_id\tpeers\tobservations\n"
                   "alice\t" + alice + "\t1\t10\n"
                   "bob\t" + bob + "\t1\t10\n"
                   "oracle check: pass\n");
  EXPECT_EQ(slurp(logs / "alice.csv"), bob + ",0001,10\n");
  EXPECT_EQ(slurp(logs / "bob.csv"), alice + ",0202,10\n");
  const auto t = slurp(trace);
  EXPECT_TRUE(t.starts_with("tick,observer,advertisement,accepted\n0,alice,#C19:" + bob + "0001,true\n"));

  // Same inputs, same bytes.
  EXPECT_EQ(ct_run("sim run " + data("two_tokens.json")).out, ct_run("sim run " + data("two_tokens.json")).out);
}

TEST(CliSim, Errors) {
  EXPECT_EQ(ct_run("sim run /nonexistent/scenario.json").exit_code, 2);
  EXPECT_EQ(ct_run("sim run " + data("bad_label.json")).exit_code, 1);
}

TEST(CliSim, ErrorsNameTheLocation) {
  TempDir tmp;
  const auto path = tmp.path() / "broken.json";
  std::ofstream(path) << "{\n  \"tokens\": [\n    {\"label\": \"A\",}\n  ]\n}\n";
  const auto cmd = quote(CT_BINARY) + " sim run " + quote(path) + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  char buf[1024];
  std::string err;
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) err.append(buf, n);
  EXPECT_EQ(WEXITSTATUS(::pclose(pipe)), 1);
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}

TEST(CliSim, CheckOracleHoldsOnRandomStochasticDemo) {
  const auto r = ct_run("sim run " + quote(std::string(CT_TEST_DATA) + "/../../scenarios/office_day.json") +
                        " --check-oracle");
  EXPECT_EQ(r.exit_code, 0) << r.out;
  EXPECT_TRUE(r.out.ends_with("oracle check: pass\n"));
}

TEST(CliReport, FlagsAndSummary) {
  const auto r = ct_run("report " + data("sample_log.csv"));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out,
            "peer\thealth\tcount\tflag\tsymptoms\n"
            "8a04e24bcd91beea\t0202\t3\tSYMPTOMATIC\tSore throat; Headache\n"
            "9b04e24bcd91beea\t0001\t1\t-\tFeeling fine\n"
            "aa04e24bcd91beea\t0401\t5\t-\tFeeling fine; Tested negative for Covid-19\n"
            "symptomatic encounters: 1\n");
  const auto custom = ct_run("report " + data("sample_log.csv") + " --benign 'Sore throat' 'Headache'");
  // Feeling fine is no longer benign, so 0001 and 0401 flag while 0202 does not.
  EXPECT_TRUE(custom.out.ends_with("symptomatic encounters: 2\n")) << custom.out;
  EXPECT_EQ(ct_run("report " + data("bad_log.csv")).exit_code, 1);
  EXPECT_EQ(ct_run("report /nonexistent.csv").exit_code, 2);
}

class CliShare : public ::testing::Test {
 protected:
  std::string url() const { return "--url " + server_.url(); }

  ct::share::ShareStore store_;
  ct::share::ShareService service_{store_};
  ct::testing::LocalServer server_{[this](httplib::Server& s) { ct::share::install_share_routes(s, service_); }};
};

TEST_F(CliShare, SubmitQueryPostFetch) {
  const auto alice = ct::identity_from_seed("alice");
  const auto bob = ct::identity_from_seed("bob");
  TempDir tmp;
  const auto file = tmp.path() / "enc.csv";
  const auto line = alice.public_id.str() + ",8a04e24bcd91beea,2020-08-01";
  std::ofstream(file) << line << "\n" << alice.public_id.str() << "," << bob.public_id.str() << ",2020-08-02\n";

  auto r = ct_run("share " + url() + " submit --private " + alice.private_code.str() + " " + quote(file));
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "2\n");
  EXPECT_EQ(ct_run("share " + url() + " submit --private " + alice.private_code.str() + " " + quote(file)).out, "0\n");

  r = ct_run("share " + url() + " query 8a04e24bcd91beea");
  EXPECT_EQ(r.out, line + "\n");

  // Wrong private code for the reporter column.
  EXPECT_EQ(ct_run("share " + url() + " submit --private " + bob.private_code.str() + " " + quote(file)).exit_code, 1);
  // Author check on post.
  EXPECT_EQ(ct_run("share " + url() + " post --private " + bob.private_code.str() + " --author " +
                   alice.public_id.str() + " --date 2020-08-03 'hello'")
                .exit_code,
            1);

  r = ct_run("share " + url() + " post --private " + alice.private_code.str() +
             " --date 2020-08-03 'Tested positive 2020-08-03'");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "1\n");
  r = ct_run("share " + url() + " fetch " + bob.public_id.str());
  EXPECT_EQ(r.out, R"({"author":")" + alice.public_id.str() +
                       R"(","body":"Tested positive 2020-08-03","date":"2020-08-03","id":1})" + "\n");

  // Env var is honoured.
  EXPECT_EQ(ct_run("share query 8a04e24bcd91beea", "CT_SHARE_URL=" + server_.url()).out, line + "\n");
}

TEST(CliShareNetwork, UnreachableExitsTwo) {
  int port;
  {
    ct::testing::LocalServer probe;
    port = probe.port();
  }
  EXPECT_EQ(ct_run("share --url http://127.0.0.1:" + std::to_string(port) + " query 8a04e24bcd91beea").exit_code, 2);
}

TEST(CliToken, BridgeVerbs) {
  ct::bridge::Bridge bridge;
  ct::testing::LocalServer server([&](httplib::Server& s) { ct::bridge::install_bridge_routes(s, bridge); });
  const auto b = "token --bridge " + server.url() + " ";
  const auto self = ct::identity_from_seed("cli-token");

  EXPECT_EQ(ct_run(b + "download-log").exit_code, 1);  // unconfigured
  auto r = ct_run(b + "update-hardware --private " + self.private_code.str() + " --symptoms 'Sore throat' Headache");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "#C19:" + self.public_id.str() + "0202\n");
  EXPECT_EQ(ct_run(b + "observe '#C19:8a04e24bcd91beea0001'").out, "logged\n");
  EXPECT_EQ(ct_run(b + "observe '#C19:8a04e24bcd91beea0001'").out, "logged\n");
  EXPECT_EQ(ct_run(b + "observe 'JBL Speaker'").out, "ignored-malformed\n");

  TempDir tmp;
  const auto saved = tmp.path() / "log.csv";
  EXPECT_EQ(ct_run(b + "download-log").out, "8a04e24bcd91beea,0001,2\n");
  EXPECT_EQ(ct_run(b + "download-log -o " + quote(saved)).exit_code, 0);
  EXPECT_EQ(slurp(saved), "8a04e24bcd91beea,0001,2\n");

  EXPECT_EQ(ct_run(b + "power off").out, "off\n");
  EXPECT_EQ(ct_run(b + "advertisement").exit_code, 1);
  EXPECT_EQ(ct_run(b + "power on").out, "on\n");
  EXPECT_EQ(ct_run(b + "download-log").out, "");
  r = ct_run(b + "update-hardware --private " + self.private_code.str() + " --health 0206");
  EXPECT_EQ(r.out, "#C19:" + self.public_id.str() + "0206\n");
  EXPECT_EQ(ct_run(b + "advertisement").out, r.out);
}

}  // namespace
